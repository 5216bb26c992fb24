#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bglstm/numerics.hpp"

namespace bglstm {

// Which recurrent cell a layer uses.
//   Standard     forget, input and output gates; tanh candidate.
//   BiGated      input and output gates only (forget gate fixed at 1);
//                sigmoid candidate.
//   NoInputGate  forget and output gates (input gate fixed at 1); tanh candidate.
enum class CellKind { Standard, BiGated, NoInputGate };

enum class CandidateActivation { Tanh, Sigmoid };

enum class Gate : std::size_t { Forget = 0, Input = 1, Candidate = 2, Output = 3 };
inline constexpr std::size_t kMaxGates = 4;

struct CellVariant {
    CellKind kind = CellKind::BiGated;
    CandidateActivation candidate = CandidateActivation::Sigmoid;
    // BiGated only: drop the input gate from the cell update, C = C_prev + C~,
    // instead of the default C = C_prev + i * C~.
    bool literal_eq13 = false;

    static CellVariant standard() { return {CellKind::Standard, CandidateActivation::Tanh, false}; }
    static CellVariant bi_gated(bool literal = false) {
        return {CellKind::BiGated, CandidateActivation::Sigmoid, literal};
    }
    static CellVariant no_input_gate() {
        return {CellKind::NoInputGate, CandidateActivation::Tanh, false};
    }

    bool operator==(const CellVariant&) const = default;
};

std::string to_string(CellKind kind);
std::string to_string(CandidateActivation act);
CellKind parse_cell_kind(const std::string& name);
CandidateActivation parse_candidate_activation(const std::string& name);

// Gates that carry trainable parameters, in storage order.
std::vector<Gate> gates_of(CellKind kind);

std::size_t param_count(CellKind kind, std::size_t input_dim, std::size_t hidden_dim);

struct GateParams {
    Matrix weight;  // hidden x (hidden + input), acting on [h_prev, x]
    Vector bias;    // hidden

    bool operator==(const GateParams&) const = default;
};

// Parameters of one recurrent layer. Gates absent from the cell kind have no
// storage.
class CellWeights {
public:
    CellWeights() = default;
    // All parameters zero.
    CellWeights(CellKind kind, std::size_t input_dim, std::size_t hidden_dim);
    // Glorot-uniform weights, zero biases. Gates are drawn in storage order.
    static CellWeights glorot(CellKind kind, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    CellKind kind() const noexcept { return kind_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    std::size_t concat_dim() const noexcept { return hidden_dim_ + input_dim_; }

    bool has(Gate g) const noexcept { return gates_[static_cast<std::size_t>(g)].has_value(); }
    GateParams& gate(Gate g);
    const GateParams& gate(Gate g) const;

    std::size_t param_count() const;
    // Views over every parameter tensor: for each present gate, weight then bias.
    std::vector<std::span<double>> parameter_spans();
    std::vector<std::span<const double>> parameter_spans() const;

    bool operator==(const CellWeights&) const = default;

private:
    CellKind kind_ = CellKind::BiGated;
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    std::array<std::optional<GateParams>, kMaxGates> gates_;
};

// Test hook: runs a Standard cell with its forget gate pinned to one and/or its
// candidate activation swapped. Ignored for other kinds.
struct StepOverride {
    bool forget_to_one = false;
    std::optional<CandidateActivation> candidate;
};

struct CellState {
    Vector h;
    Vector c;
};

// Hidden and cell state for a batch, one row per batch item.
struct BatchState {
    Matrix h;
    Matrix c;

    static BatchState zeros(std::size_t batch, std::size_t hidden) {
        return {Matrix(batch, hidden), Matrix(batch, hidden)};
    }
};

struct StepCache {
    Matrix hx;                                 // [h_prev, x], batch x concat
    std::array<Matrix, kMaxGates> activation;  // post-nonlinearity gate values
    Matrix c_prev;
    Matrix tanh_c;
};

struct SequenceCache {
    CellVariant variant;
    StepOverride override_;
    std::vector<StepCache> steps;
};

struct StepResult {
    CellState state;
    StepCache cache;
};

StepResult cell_step(const CellVariant& variant, const CellWeights& w, const CellState& prev,
                     const Vector& x, const StepOverride& override_ = {});

struct SequenceOutput {
    std::vector<Matrix> hs;  // one batch x hidden matrix per step
    BatchState final_state;
    SequenceCache cache;
};

// xs: one batch x input matrix per time step.
SequenceOutput sequence_forward(const CellVariant& variant, const CellWeights& w,
                                const BatchState& init, std::span<const Matrix> xs,
                                const StepOverride& override_ = {});

struct SequenceGradients {
    CellWeights weights;
    BatchState init;
    std::vector<Matrix> xs;
};

// Reverse-mode gradients of sum_t <grad_hs[t], hs[t]> (+ <grad_final, final>
// when given) with respect to weights, initial state and inputs.
SequenceGradients sequence_backward(const CellWeights& w, const SequenceCache& cache,
                                    std::span<const Matrix> grad_hs,
                                    const BatchState* grad_final = nullptr);

}  // namespace bglstm
