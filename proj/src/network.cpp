#include "bglstm/network.hpp"

#include <algorithm>
#include <cmath>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Matrix stack_rows(const Sequence& seq) {
    const std::size_t batch = seq.front().rows();
    const std::size_t dim = seq.front().cols();
    Matrix out(batch * seq.size(), dim);
    for (std::size_t t = 0; t < seq.size(); ++t)
        std::copy(seq[t].data(), seq[t].data() + seq[t].size(), out.data() + t * batch * dim);
    return out;
}

Sequence unstack_rows(const Matrix& m, std::size_t steps) {
    const std::size_t batch = m.rows() / steps;
    const std::size_t dim = m.cols();
    Sequence out(steps, Matrix(batch, dim));
    for (std::size_t t = 0; t < steps; ++t)
        std::copy(m.data() + t * batch * dim, m.data() + (t + 1) * batch * dim, out[t].data());
    return out;
}

Matrix batchnorm_backward(const Matrix& grad, const BatchNormCache& cache, const Vector& gamma,
                          std::vector<double>& dgamma, std::vector<double>& dbeta) {
    const std::size_t rows = grad.rows();
    const std::size_t dim = grad.cols();
    const double inv_n = 1.0 / static_cast<double>(rows);
    std::vector<double> sum_dxhat(dim, 0.0), sum_dxhat_xhat(dim, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double g = grad(r, j);
            const double xh = cache.xhat(r, j);
            dgamma[j] += g * xh;
            dbeta[j] += g;
            const double dxh = g * gamma[j];
            sum_dxhat[j] += dxh;
            sum_dxhat_xhat[j] += dxh * xh;
        }
    }
    Matrix dx(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double dxh = grad(r, j) * gamma[j];
            dx(r, j) = cache.inv_std[j] * inv_n *
                       (static_cast<double>(rows) * dxh - sum_dxhat[j] -
                        cache.xhat(r, j) * sum_dxhat_xhat[j]);
        }
    }
    return dx;
}

}  // namespace

std::string to_string(ActivationKind kind) { return kind == ActivationKind::Relu ? "relu" : "tanh"; }

ActivationKind parse_activation(const std::string& name) {
    if (name == "relu") return ActivationKind::Relu;
    if (name == "tanh") return ActivationKind::Tanh;
    throw ConfigError("unknown activation '" + name + "'");
}

void AutoencoderConfig::validate() const {
    if (frame_dim == 0) throw ConfigError("frame_dim must be positive");
    if (T == 0) throw ConfigError("T must be at least 1");
    if (hidden.empty()) throw ConfigError("hidden sizes must not be empty");
    if (std::find(hidden.begin(), hidden.end(), std::size_t{0}) != hidden.end())
        throw ConfigError("hidden sizes must be positive");
    if (!std::equal(hidden.begin(), hidden.end(), hidden.rbegin()))
        throw ConfigError("hidden sizes must be symmetric around the bottleneck");
    if (output_dim != frame_dim) throw ConfigError("output_dim must equal frame_dim");
    if (!(bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be positive");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in [0,1)");
}

BatchNormState BatchNormState::identity(std::size_t dim) {
    return {Vector(dim, 1.0), Vector(dim, 0.0), Vector(dim, 0.0), Vector(dim, 1.0)};
}

Matrix batchnorm_apply(const Matrix& x, BatchNormState& state, Mode mode, double epsilon,
                       double momentum, BatchNormCache* cache, bool update_running) {
    const std::size_t rows = x.rows();
    const std::size_t dim = x.cols();
    if (dim != state.dim() || state.beta.size() != dim || state.running_mean.size() != dim ||
        state.running_var.size() != dim)
        throw ShapeError("batchnorm: feature dimension mismatch");

    Vector mean(dim), inv_std(dim);
    if (mode == Mode::Train) {
        if (rows < 2) throw InvalidInput("batchnorm: Train mode needs at least two rows");
        Vector var(dim);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < dim; ++j) mean[j] += x(r, j);
        for (std::size_t j = 0; j < dim; ++j) mean[j] /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = x(r, j) - mean[j];
                var[j] += d * d;
            }
        for (std::size_t j = 0; j < dim; ++j) {
            var[j] /= static_cast<double>(rows);
            inv_std[j] = 1.0 / std::sqrt(var[j] + epsilon);
            if (update_running) {
                state.running_mean[j] = momentum * state.running_mean[j] + (1.0 - momentum) * mean[j];
                state.running_var[j] = momentum * state.running_var[j] + (1.0 - momentum) * var[j];
            }
        }
    } else {
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] = state.running_mean[j];
            inv_std[j] = 1.0 / std::sqrt(std::max(state.running_var[j], 0.0) + epsilon);
        }
    }

    Matrix out(rows, dim);
    Matrix xhat(rows, dim);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < dim; ++j) {
            const double xh = (x(r, j) - mean[j]) * inv_std[j];
            xhat(r, j) = xh;
            out(r, j) = state.gamma[j] * xh + state.beta[j];
        }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

std::vector<Vector> batchnorm_apply(std::span<const Vector> x, BatchNormState& state, Mode mode,
                                    double epsilon, double momentum) {
    if (x.empty()) throw InvalidInput("batchnorm: empty batch");
    Matrix out = batchnorm_apply(Matrix::from_rows(x), state, mode, epsilon, momentum);
    std::vector<Vector> rows;
    for (std::size_t r = 0; r < out.rows(); ++r) rows.push_back(out.row_vector(r));
    return rows;
}

Autoencoder::Autoencoder(AutoencoderConfig config, std::vector<Layer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {}

std::vector<std::size_t> Autoencoder::recurrent_dims() const {
    std::vector<std::size_t> dims;
    for (const Layer& l : layers_)
        if (auto* r = std::get_if<RecurrentLayer>(&l)) dims.push_back(r->weights.hidden_dim());
    return dims;
}

std::size_t Autoencoder::param_count() const {
    std::size_t n = 0;
    for (auto s : parameter_spans()) n += s.size();
    return n;
}

std::vector<std::span<double>> Autoencoder::parameter_spans() {
    std::vector<std::span<double>> out;
    for (Layer& l : layers_) {
        std::visit(overloaded{
                       [&](RecurrentLayer& r) {
                           for (auto s : r.weights.parameter_spans()) out.push_back(s);
                       },
                       [&](BatchNormLayer& b) {
                           out.push_back(b.state.gamma.span());
                           out.push_back(b.state.beta.span());
                       },
                       [](ActivationLayer&) {},
                   },
                   l);
    }
    return out;
}

std::vector<std::span<const double>> Autoencoder::parameter_spans() const {
    auto spans = const_cast<Autoencoder*>(this)->parameter_spans();
    return {spans.begin(), spans.end()};
}

std::vector<std::span<double>> Autoencoder::running_stat_spans() {
    std::vector<std::span<double>> out;
    for (Layer& l : layers_)
        if (auto* b = std::get_if<BatchNormLayer>(&l)) {
            out.push_back(b->state.running_mean.span());
            out.push_back(b->state.running_var.span());
        }
    return out;
}

std::vector<std::span<const double>> Autoencoder::running_stat_spans() const {
    auto spans = const_cast<Autoencoder*>(this)->running_stat_spans();
    return {spans.begin(), spans.end()};
}

ParamGrads Autoencoder::zero_grads() const {
    ParamGrads g;
    for (auto s : parameter_spans()) g.emplace_back(s.size(), 0.0);
    return g;
}

Sequence Autoencoder::forward(const Sequence& input, Mode mode, ForwardCache* cache,
                              bool update_running) {
    if (input.size() != config_.T)
        throw ShapeError("forward: sequence has " + std::to_string(input.size()) +
                         " steps, model expects T=" + std::to_string(config_.T));
    const std::size_t batch = input.front().rows();
    if (batch == 0) throw InvalidInput("forward: empty batch");
    for (const Matrix& m : input)
        if (m.rows() != batch || m.cols() != config_.frame_dim)
            throw ShapeError("forward: input frames must be batch x " +
                             std::to_string(config_.frame_dim));

    if (cache) {
        *cache = ForwardCache{};
        cache->mode = mode;
    }
    Sequence x = input;
    for (Layer& layer : layers_) {
        if (cache) cache->inputs.push_back(x);
        std::visit(overloaded{
                       [&](RecurrentLayer& r) {
                           auto out = sequence_forward(
                               config_.variant, r.weights,
                               BatchState::zeros(batch, r.weights.hidden_dim()), x);
                           x = std::move(out.hs);
                           if (cache) cache->recurrent.push_back(std::move(out.cache));
                       },
                       [&](ActivationLayer& a) {
                           for (Matrix& m : x)
                               for (double& v : m.span())
                                   v = a.kind == ActivationKind::Relu ? std::max(v, 0.0) : std::tanh(v);
                       },
                       [&](BatchNormLayer& b) {
                           BatchNormCache bc;
                           Matrix y = batchnorm_apply(stack_rows(x), b.state, mode, config_.bn_epsilon,
                                                      config_.bn_momentum, &bc, update_running);
                           x = unstack_rows(y, config_.T);
                           if (cache) cache->batchnorm.push_back(std::move(bc));
                       },
                   },
                   layer);
    }
    return x;
}

ParamGrads Autoencoder::backward(const ForwardCache& cache, const Sequence& grad_output) const {
    if (cache.inputs.size() != layers_.size())
        throw InvalidInput("backward: cache does not belong to this model");
    if (cache.mode != Mode::Train)
        throw InvalidInput("backward: gradients require a Train-mode forward cache");

    ParamGrads grads = zero_grads();
    // Locate each layer's first tensor in the flat gradient list.
    std::vector<std::size_t> offset(layers_.size());
    {
        std::size_t k = 0;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            offset[l] = k;
            if (auto* r = std::get_if<RecurrentLayer>(&layers_[l]))
                k += 2 * gates_of(r->weights.kind()).size();
            else if (std::holds_alternative<BatchNormLayer>(layers_[l]))
                k += 2;
        }
    }

    std::size_t rec_idx = cache.recurrent.size();
    std::size_t bn_idx = cache.batchnorm.size();
    Sequence g = grad_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Layer& layer = layers_[l];
        if (auto* r = std::get_if<RecurrentLayer>(&layer)) {
            auto sg = sequence_backward(r->weights, cache.recurrent[--rec_idx], g);
            std::size_t k = offset[l];
            for (auto s : sg.weights.parameter_spans()) {
                std::copy(s.begin(), s.end(), grads[k].begin());
                ++k;
            }
            g = std::move(sg.xs);
        } else if (auto* a = std::get_if<ActivationLayer>(&layer)) {
            const Sequence& in = cache.inputs[l];
            for (std::size_t t = 0; t < g.size(); ++t) {
                auto gs = g[t].span();
                auto xs = in[t].span();
                for (std::size_t k = 0; k < gs.size(); ++k) {
                    if (a->kind == ActivationKind::Relu) {
                        if (!(xs[k] > 0.0)) gs[k] = 0.0;
                    } else {
                        const double y = std::tanh(xs[k]);
                        gs[k] *= 1.0 - y * y;
                    }
                }
            }
        } else {
            const auto& b = std::get<BatchNormLayer>(layer);
            Matrix dx = batchnorm_backward(stack_rows(g), cache.batchnorm[--bn_idx], b.state.gamma,
                                           grads[offset[l]], grads[offset[l] + 1]);
            g = unstack_rows(dx, config_.T);
        }
    }
    return grads;
}

Autoencoder build_autoencoder(const AutoencoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    std::vector<Layer> layers;
    std::size_t in = config.frame_dim;
    for (std::size_t h : config.hidden) {
        layers.emplace_back(RecurrentLayer{CellWeights::glorot(config.variant.kind, in, h, rng)});
        layers.emplace_back(ActivationLayer{config.activation});
        layers.emplace_back(BatchNormLayer{BatchNormState::identity(h)});
        in = h;
    }
    layers.emplace_back(
        RecurrentLayer{CellWeights::glorot(config.variant.kind, in, config.output_dim, rng)});
    return Autoencoder(config, std::move(layers));
}

Sequence to_sequence(std::span<const std::vector<Vector>> items) {
    if (items.empty()) throw InvalidInput("to_sequence: empty batch");
    const std::size_t steps = items.front().size();
    if (steps == 0) throw InvalidInput("to_sequence: empty item");
    const std::size_t dim = items.front().front().size();
    Sequence seq(steps, Matrix(items.size(), dim));
    for (std::size_t b = 0; b < items.size(); ++b) {
        if (items[b].size() != steps) throw ShapeError("to_sequence: items differ in length");
        for (std::size_t t = 0; t < steps; ++t) {
            if (items[b][t].size() != dim) throw ShapeError("to_sequence: frames differ in size");
            std::copy(items[b][t].begin(), items[b][t].end(), seq[t].row(b).begin());
        }
    }
    return seq;
}

std::vector<std::vector<Vector>> from_sequence(const Sequence& seq) {
    std::vector<std::vector<Vector>> items;
    if (seq.empty()) return items;
    items.resize(seq.front().rows());
    for (std::size_t b = 0; b < items.size(); ++b)
        for (const Matrix& m : seq) items[b].push_back(m.row_vector(b));
    return items;
}

ModelOutput model_forward(Autoencoder& model, std::span<const std::vector<Vector>> batch, Mode mode) {
    if (batch.empty()) throw InvalidInput("model_forward: empty batch");
    ModelOutput out;
    Sequence y = model.forward(to_sequence(batch), mode, &out.cache);
    out.reconstructions = from_sequence(y);
    return out;
}

double mse_loss(std::span<const double> recon, std::span<const double> target,
                std::span<double> grad) {
    if (recon.size() != target.size() || grad.size() != recon.size())
        throw ShapeError("mse_loss: shape mismatch");
    if (recon.empty()) throw InvalidInput("mse_loss: empty input");
    const double inv = 1.0 / static_cast<double>(recon.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < recon.size(); ++k) {
        const double d = recon[k] - target[k];
        sum += d * d;
        grad[k] = 2.0 * d * inv;
    }
    return sum * inv;
}

LossResult mse_loss(const Sequence& recon, const Sequence& target) {
    if (recon.size() != target.size()) throw ShapeError("mse_loss: step count mismatch");
    std::size_t count = 0;
    for (std::size_t t = 0; t < recon.size(); ++t) {
        if (recon[t].rows() != target[t].rows() || recon[t].cols() != target[t].cols())
            throw ShapeError("mse_loss: shape mismatch");
        count += recon[t].size();
    }
    if (count == 0) throw InvalidInput("mse_loss: empty input");
    const double inv = 1.0 / static_cast<double>(count);
    LossResult res;
    res.grad.reserve(recon.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < recon.size(); ++t) {
        Matrix g(recon[t].rows(), recon[t].cols());
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double d = recon[t].data()[k] - target[t].data()[k];
            sum += d * d;
            g.data()[k] = 2.0 * d * inv;
        }
        res.grad.push_back(std::move(g));
    }
    res.loss = sum * inv;
    return res;
}

double train_step(Autoencoder& model, std::span<const std::vector<Vector>> batch, AdamState& opt) {
    if (batch.empty()) throw InvalidInput("train_step: empty batch");
    Sequence input = to_sequence(batch);
    ForwardCache cache;
    Sequence recon = model.forward(input, Mode::Train, &cache);
    LossResult loss = mse_loss(recon, input);
    ParamGrads grads = model.backward(cache, loss.grad);
    auto params = model.parameter_spans();
    if (opt.m.empty()) opt = AdamState::for_params(std::span<const std::span<double>>(params), opt.hyper);
    adam_update(params, grads, opt);
    return loss.loss;
}

}  // namespace bglstm
