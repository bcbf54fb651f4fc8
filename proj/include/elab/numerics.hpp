#ifndef ELAB_NUMERICS_HPP
#define ELAB_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace elab {

using Vec = std::vector<double>;

// Dense row-major matrix; the only tensor shape the lab needs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data).subspan(r * cols, cols);
    }
};

// log(sum_i exp(z_i)), shifted by max(z) so |z_i| <= 700 never overflows.
// The sum accumulates in long double, the widest native real type.
inline double log_sum_exp(std::span<const double> z) {
    if (z.empty()) throw std::invalid_argument("empty reduction");
    const double m = *std::max_element(z.begin(), z.end());
    long double acc = 0.0L;
    for (double v : z) acc += std::exp(static_cast<long double>(v - m));
    return static_cast<double>(static_cast<long double>(m) + std::log(acc));
}

inline double log_sum_exp(std::initializer_list<double> z) {
    return log_sum_exp(std::span<const double>(z.begin(), z.size()));
}

// log-sum-exp over all entries except index `skip`.
inline double log_sum_exp_excluding(std::span<const double> z, std::size_t skip) {
    if (z.size() < 2) throw std::invalid_argument("empty reduction");
    if (skip >= z.size()) throw std::out_of_range("skip index out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.size(); ++i)
        if (i != skip) m = std::max(m, z[i]);
    long double acc = 0.0L;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (i != skip) acc += std::exp(static_cast<long double>(z[i] - m));
    return static_cast<double>(static_cast<long double>(m) + std::log(acc));
}

inline Vec softmax(std::span<const double> z) {
    const double lse = log_sum_exp(z);
    Vec p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - lse);
    return p;
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Probability-space logs clamp their argument at 1e-12; p -> 0 is reachable
// during training. Logit-space code paths avoid the clamp entirely.
inline double safe_log(double p) { return std::log(std::max(p, 1e-12)); }

// First index of the maximum; ties resolve to the lowest class index.
inline std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("empty reduction");
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace elab

#endif  // ELAB_NUMERICS_HPP
