#include "bglstm/numerics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
    return MutMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::span<const Vector> rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw ShapeError("Matrix::from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Vector Matrix::row_vector(std::size_t r) const {
    auto s = row(r);
    return Vector(std::vector<double>(s.begin(), s.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw InvalidInput("Rng::below: empty range");
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split() {
    std::uint64_t mixed = next_u64();
    return Rng(splitmix64(mixed));
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

bool all_finite(std::span<const double> values) noexcept {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(std::span<const double> values, const char* what) {
    if (!all_finite(values)) throw InvalidInput(std::string(what) + ": non-finite value");
}

Vector sigmoid(const Vector& x) {
    require_finite(x.span(), "sigmoid");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
    return out;
}

Vector tanh_act(const Vector& x) {
    require_finite(x.span(), "tanh_act");
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    return out;
}

Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
    if (w.cols() != x.size() || w.rows() != b.size())
        throw ShapeError("affine: W is " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()) + ", x has " + std::to_string(x.size()) +
                         ", b has " + std::to_string(b.size()));
    Vector out(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double acc = 0.0;
        auto row = w.row(r);
        for (std::size_t c = 0; c < w.cols(); ++c) acc += row[c] * x[c];
        out[r] = acc + b[r];
    }
    return out;
}

Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) throw InvalidInput("glorot_init: zero dimension");
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.span()) v = rng.uniform(-limit, limit);
    return m;
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimension mismatch");
    if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
    view(out).noalias() = view(a) * view(b).transpose();
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn_acc: inner dimension mismatch");
    if (out.rows() != a.cols() || out.cols() != b.cols())
        throw ShapeError("matmul_tn_acc: output shape mismatch");
    view(out).noalias() += view(a).transpose() * view(b);
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows()) throw ShapeError("matmul_nn: inner dimension mismatch");
    if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
    view(out).noalias() = view(a) * view(b);
}

}  // namespace bglstm
