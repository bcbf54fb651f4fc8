#ifndef ELAB_ATTACKS_HPP
#define ELAB_ATTACKS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "elab/data.hpp"
#include "elab/losses.hpp"
#include "elab/network.hpp"
#include "elab/numerics.hpp"
#include "elab/rng.hpp"

namespace elab {

enum class AttackMethod { fgsm, pgd };
enum class AttackNorm { linf, l2 };

struct AttackConfig {
    AttackMethod method = AttackMethod::fgsm;
    AttackNorm norm = AttackNorm::linf;  // pgd only; fgsm is linf
    double epsilon = 0.1;
    int steps = 40;
    double step_size = 0.0;  // <= 0 picks the default epsilon/10
    bool random_start = true;
    double clip_lo = 0.0;
    double clip_hi = 1.0;
    std::uint64_t seed = 0;
    // EL is unbounded below as p -> 1, which makes "maximize the training
    // loss" ill-posed; by default the attacker climbs the CE loss instead.
    bool attack_train_loss = false;

    void validate() const {
        if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
        if (steps < 1) throw std::invalid_argument("steps must be >= 1");
        if (!(clip_lo <= clip_hi)) throw std::invalid_argument("clip range is inverted");
        if (method == AttackMethod::pgd && step_size > 0.0 && step_size > epsilon)
            std::cerr << "warning: pgd step_size " << step_size << " exceeds epsilon " << epsilon
                      << "\n";
    }

    double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 10.0; }

    LossSpec attack_loss(const LossSpec& train_loss) const {
        return attack_train_loss ? train_loss : LossSpec{};
    }
};

namespace detail {

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline void clip_box(Vec& x, double lo, double hi) {
    for (double& v : x) v = std::clamp(v, lo, hi);
}

inline void project_linf(Vec& x, std::span<const double> origin, double epsilon) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], origin[i] - epsilon, origin[i] + epsilon);
}

inline void project_l2(Vec& x, std::span<const double> origin, double epsilon) {
    long double r2 = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - origin[i];
        r2 += static_cast<long double>(d) * d;
    }
    const double r = std::sqrt(static_cast<double>(r2));
    if (r > epsilon && r > 0.0) {
        const double scale = epsilon / r;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = origin[i] + (x[i] - origin[i]) * scale;
    }
}

}  // namespace detail

// Single-step sign attack: x' = clip(x + epsilon * sign(grad_x L)).
inline Vec fgsm(const Mlp& m, std::span<const double> x, int y, const LossSpec& train_loss,
                const AttackConfig& cfg) {
    cfg.validate();
    const Vec grad = input_gradient(m, x, y, cfg.attack_loss(train_loss));
    Vec out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i] + cfg.epsilon * detail::sign_of(grad[i]), cfg.clip_lo,
                            cfg.clip_hi);
    return out;
}

// Projected gradient descent inside the epsilon ball around x, with an
// optional seeded uniform random start. A zero gradient leaves the iterate
// unchanged.
inline Vec pgd(const Mlp& m, std::span<const double> x, int y, const LossSpec& train_loss,
               const AttackConfig& cfg) {
    cfg.validate();
    const LossSpec loss = cfg.attack_loss(train_loss);
    const double alpha = cfg.effective_step();

    Vec cur(x.begin(), x.end());
    if (cfg.random_start && cfg.epsilon > 0.0) {
        Rng rng(cfg.seed);
        if (cfg.norm == AttackNorm::linf) {
            for (double& v : cur) v += rng.uniform_range(-cfg.epsilon, cfg.epsilon);
        } else {
            Vec dir(cur.size());
            long double n2 = 0.0L;
            for (double& d : dir) {
                d = rng.normal();
                n2 += static_cast<long double>(d) * d;
            }
            const double norm = std::sqrt(static_cast<double>(n2));
            if (norm > 0.0) {
                const double radius =
                    cfg.epsilon *
                    std::pow(rng.uniform(), 1.0 / static_cast<double>(cur.size()));
                for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += dir[i] / norm * radius;
            }
        }
        detail::clip_box(cur, cfg.clip_lo, cfg.clip_hi);
        if (cfg.norm == AttackNorm::l2) detail::project_l2(cur, x, cfg.epsilon);
    }

    for (int step = 0; step < cfg.steps; ++step) {
        const Vec grad = input_gradient(m, cur, y, loss);
        if (cfg.norm == AttackNorm::linf) {
            for (std::size_t i = 0; i < cur.size(); ++i)
                cur[i] += alpha * detail::sign_of(grad[i]);
        } else {
            long double n2 = 0.0L;
            for (double g : grad) n2 += static_cast<long double>(g) * g;
            const double norm = std::sqrt(static_cast<double>(n2));
            if (norm > 0.0)
                for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += alpha * grad[i] / norm;
        }
        detail::clip_box(cur, cfg.clip_lo, cfg.clip_hi);
        if (cfg.norm == AttackNorm::linf)
            detail::project_linf(cur, x, cfg.epsilon);
        else
            detail::project_l2(cur, x, cfg.epsilon);
    }
    return cur;
}

struct RobustnessPoint {
    double epsilon;
    double accuracy;
};

// Accuracy of the attacked subset per epsilon. Every epsilon attacks fresh
// copies of the clean inputs, so the epsilon = 0 row is the clean accuracy.
// Per-example seeds derive from the example index, so entries are
// order-independent and reproducible.
inline std::vector<RobustnessPoint> robustness_curve(const Mlp& m, const LabeledDataset& ds,
                                                     Split subset, const LossSpec& train_loss,
                                                     const AttackConfig& base,
                                                     std::span<const double> epsilons) {
    for (std::size_t i = 1; i < epsilons.size(); ++i)
        if (epsilons[i] < epsilons[i - 1])
            throw std::invalid_argument("epsilons must be sorted ascending");
    const auto idx = ds.indices_of(subset);
    if (idx.empty()) throw std::invalid_argument("empty subset");

    std::vector<RobustnessPoint> out;
    for (double eps : epsilons) {
        AttackConfig cfg = base;
        cfg.epsilon = eps;
        std::size_t correct = 0;
        for (std::size_t e = 0; e < idx.size(); ++e) {
            const std::size_t row = idx[e];
            std::uint64_t s = base.seed ^ (0x9e3779b97f4a7c15ULL * (e + 1));
            cfg.seed = splitmix64(s);
            const Vec adv = cfg.method == AttackMethod::fgsm
                                ? fgsm(m, ds.features.row(row), ds.labels[row], train_loss, cfg)
                                : pgd(m, ds.features.row(row), ds.labels[row], train_loss, cfg);
            const Vec z = forward(m, adv);
            const auto y = static_cast<std::size_t>(ds.labels[row]);
            double other = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < z.size(); ++k)
                if (k != y) other = std::max(other, z[k]);
            if (z[y] - other > 0.0) ++correct;
        }
        out.push_back({eps, static_cast<double>(correct) / static_cast<double>(idx.size())});
    }
    return out;
}

}  // namespace elab

#endif  // ELAB_ATTACKS_HPP
