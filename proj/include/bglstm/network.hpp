#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bglstm/cells.hpp"
#include "bglstm/numerics.hpp"
#include "bglstm/optim.hpp"

namespace bglstm {

// A batch of sequences, time-major: one batch x features matrix per step.
using Sequence = std::vector<Matrix>;

enum class ActivationKind { Relu, Tanh };

std::string to_string(ActivationKind kind);
ActivationKind parse_activation(const std::string& name);

struct AutoencoderConfig {
    std::size_t frame_dim = 1024;
    std::size_t T = 4;
    std::vector<std::size_t> hidden{32, 16, 8, 16, 32};
    std::size_t output_dim = 1024;
    CellVariant variant = CellVariant::bi_gated();
    ActivationKind activation = ActivationKind::Relu;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;

    // Throws ConfigError when the invariants do not hold.
    void validate() const;

    bool operator==(const AutoencoderConfig&) const = default;
};

enum class Mode { Train, Infer };

struct BatchNormState {
    Vector gamma;
    Vector beta;
    Vector running_mean;
    Vector running_var;

    static BatchNormState identity(std::size_t dim);
    std::size_t dim() const noexcept { return gamma.size(); }

    bool operator==(const BatchNormState&) const = default;
};

struct BatchNormCache {
    Matrix xhat;      // normalized input, rows = batch * time
    Vector inv_std;
};

// Normalizes every row of x (rows pool batch and time). Train mode uses the
// batch statistics and, when update_running is set, folds them into the
// running estimates with the given momentum.
Matrix batchnorm_apply(const Matrix& x, BatchNormState& state, Mode mode, double epsilon,
                       double momentum, BatchNormCache* cache = nullptr,
                       bool update_running = true);
// Vector-per-row convenience form.
std::vector<Vector> batchnorm_apply(std::span<const Vector> x, BatchNormState& state, Mode mode,
                                    double epsilon = 1e-5, double momentum = 0.9);

struct RecurrentLayer {
    CellWeights weights;
    bool operator==(const RecurrentLayer&) const = default;
};

struct ActivationLayer {
    ActivationKind kind;
    bool operator==(const ActivationLayer&) const = default;
};

struct BatchNormLayer {
    BatchNormState state;
    bool operator==(const BatchNormLayer&) const = default;
};

using Layer = std::variant<RecurrentLayer, ActivationLayer, BatchNormLayer>;

// Per-tensor gradients aligned with Autoencoder::parameter_spans().
using ParamGrads = std::vector<std::vector<double>>;

struct ForwardCache {
    Mode mode = Mode::Infer;
    std::vector<Sequence> inputs;  // input of each layer
    std::vector<SequenceCache> recurrent;
    std::vector<BatchNormCache> batchnorm;
};

class Autoencoder {
public:
    Autoencoder() = default;
    Autoencoder(AutoencoderConfig config, std::vector<Layer> layers);

    const AutoencoderConfig& config() const noexcept { return config_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    std::vector<std::size_t> recurrent_dims() const;
    std::size_t param_count() const;

    // Trainable tensors in layer order: recurrent gates (weight, bias) and
    // batch-norm (gamma, beta).
    std::vector<std::span<double>> parameter_spans();
    std::vector<std::span<const double>> parameter_spans() const;
    // Batch-norm running statistics (mean, var) in layer order.
    std::vector<std::span<double>> running_stat_spans();
    std::vector<std::span<const double>> running_stat_spans() const;

    // Input: T matrices of batch x frame_dim.
    Sequence forward(const Sequence& input, Mode mode, ForwardCache* cache = nullptr,
                     bool update_running = true);
    ParamGrads backward(const ForwardCache& cache, const Sequence& grad_output) const;

    ParamGrads zero_grads() const;

    bool operator==(const Autoencoder&) const = default;

private:
    AutoencoderConfig config_;
    std::vector<Layer> layers_;
};

Autoencoder build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

// Stacks per-item frame lists (each T vectors of frame_dim) into a Sequence.
Sequence to_sequence(std::span<const std::vector<Vector>> items);
// Inverse of to_sequence.
std::vector<std::vector<Vector>> from_sequence(const Sequence& seq);

struct ModelOutput {
    std::vector<std::vector<Vector>> reconstructions;
    ForwardCache cache;
};

ModelOutput model_forward(Autoencoder& model, std::span<const std::vector<Vector>> batch, Mode mode);

struct LossResult {
    double loss = 0.0;
    Sequence grad;
};

// Mean squared error over every element; grad = 2 (recon - target) / count.
LossResult mse_loss(const Sequence& recon, const Sequence& target);
double mse_loss(std::span<const double> recon, std::span<const double> target,
                std::span<double> grad);

// One forward pass in Train mode, full backward, one Adam update. Returns the
// loss measured before the update. The target is the input batch itself.
double train_step(Autoencoder& model, std::span<const std::vector<Vector>> batch, AdamState& opt);

}  // namespace bglstm
