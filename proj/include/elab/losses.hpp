#ifndef ELAB_LOSSES_HPP
#define ELAB_LOSSES_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "elab/numerics.hpp"

namespace elab {

// Additive bonus attached to cross entropy. `none` is plain CE (a constant
// bonus). `normal` is log(1-p), the mirror flip of CE. `conservative`
// follows log(1-p) up to p = LE and continues along its tangent line.
// `aggressive` is zero below the threshold and log(1-p) above it, shifted
// so the value stays continuous.
enum class BonusKind { none, normal, conservative, aggressive };

struct BonusSpec {
    BonusKind kind = BonusKind::none;
    double le = 1.0;         // conservative only, in (0, 1]
    double threshold = 0.5;  // aggressive only, in (0, 1)

    void validate() const {
        if (kind == BonusKind::conservative && !(le > 0.0 && le <= 1.0))
            throw std::invalid_argument("le must be in (0,1]");
        if (kind == BonusKind::aggressive && !(threshold > 0.0 && threshold < 1.0))
            throw std::invalid_argument("bonus threshold must be in (0,1)");
    }
};

enum class LossFamily { ce, el, focal, hfl, mse, mse_mirror };
enum class Normalization { softmax, sigmoid };

struct LossSpec {
    LossFamily family = LossFamily::ce;
    BonusSpec bonus;                      // el only
    double gamma_f = 2.0;                 // focal / hfl
    double phi = 0.5;                     // hfl, in (0, 1)
    double label_smoothing = 0.0;         // ce / el, in [0, 1)
    Normalization normalization = Normalization::softmax;  // mse variants only

    bool softmax_based() const {
        return !((family == LossFamily::mse || family == LossFamily::mse_mirror) &&
                 normalization == Normalization::sigmoid);
    }

    void validate() const {
        if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
            throw std::invalid_argument("label_smoothing must be in [0,1)");
        if (label_smoothing > 0.0 && family != LossFamily::ce && family != LossFamily::el)
            throw std::invalid_argument("label_smoothing applies to ce and el only");
        if (family == LossFamily::focal || family == LossFamily::hfl) {
            if (!(gamma_f >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
        }
        if (family == LossFamily::hfl && !(phi > 0.0 && phi < 1.0))
            throw std::invalid_argument("phi must be in (0,1)");
        if (family == LossFamily::el)
            bonus.validate();
        else if (bonus.kind != BonusKind::none)
            throw std::invalid_argument("bonus applies to el only");
        if (normalization == Normalization::sigmoid && family != LossFamily::mse &&
            family != LossFamily::mse_mirror)
            throw std::invalid_argument("sigmoid normalization applies to mse variants only");
    }
};

// Loss value, analytic gradient with respect to the logits, and the
// probability of the label class under the spec's normalization.
struct LossEval {
    double value = 0.0;
    Vec grad_logits;
    double p_label = 0.0;
};

namespace detail {

inline void check_label(std::span<const double> z, int y) {
    if (z.size() < 2) throw std::invalid_argument("need at least 2 classes");
    if (y < 0 || static_cast<std::size_t>(y) >= z.size())
        throw std::out_of_range("label index out of range");
}

// Softmax quantities shared by the label-probability losses. one_minus_p
// and the non-label softmax are formed in logit space, which stays exact
// as p -> 1 where the p-space expressions are 0/0.
struct SoftmaxParts {
    double lse;          // log sum exp of all logits
    double lse_nonlabel; // log sum exp excluding the label logit
    double log_p;        // z_y - lse
    double p;            // exp(log_p)
    double one_minus_p;  // exp(lse_nonlabel - lse)
    Vec prob;            // softmax(z)
};

inline SoftmaxParts softmax_parts(std::span<const double> z, int y) {
    SoftmaxParts sp;
    sp.lse = log_sum_exp(z);
    sp.lse_nonlabel = log_sum_exp_excluding(z, static_cast<std::size_t>(y));
    sp.log_p = z[static_cast<std::size_t>(y)] - sp.lse;
    sp.p = std::exp(sp.log_p);
    sp.one_minus_p = std::exp(sp.lse_nonlabel - sp.lse);
    sp.prob.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) sp.prob[k] = std::exp(z[k] - sp.lse);
    return sp;
}

// Gradient of the log(1-p_y) term. Chaining -1/(1-p) through the softmax
// Jacobian collapses to -p at the label and p * softmax-over-non-label
// elsewhere, so nothing divides by 1-p.
inline void add_log_bonus_grad(Vec& g, std::span<const double> z, int y, const SoftmaxParts& sp) {
    const auto yi = static_cast<std::size_t>(y);
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (k == yi)
            g[k] -= sp.p;
        else
            g[k] += sp.p * std::exp(z[k] - sp.lse_nonlabel);
    }
}

// Gradient contribution of a term with derivative dBdp at the label
// probability, chained through the softmax Jacobian.
inline void add_chain_grad(Vec& g, int y, const SoftmaxParts& sp, double dBdp) {
    const auto yi = static_cast<std::size_t>(y);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double dpdz = (k == yi) ? sp.p * (1.0 - sp.p) : -sp.p * sp.prob[k];
        g[k] += dBdp * dpdz;
    }
}

}  // namespace detail

// Cross entropy (NLL with softmax), optionally label-smoothed. The value is
// formed in logit space as lse(z) - sum_k q_k z_k with the smoothed target
// q = (1-eps) onehot(y) + eps/K; the gradient is p - q.
inline LossEval ce_loss(std::span<const double> z, int y, double label_smoothing = 0.0) {
    detail::check_label(z, y);
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
        throw std::invalid_argument("label_smoothing must be in [0,1)");
    const auto sp = detail::softmax_parts(z, y);
    const std::size_t k_classes = z.size();
    const double q_off = label_smoothing / static_cast<double>(k_classes);
    const double q_label = (1.0 - label_smoothing) + q_off;

    long double weighted_logits = 0.0L;
    for (std::size_t k = 0; k < k_classes; ++k) {
        const double q = (static_cast<int>(k) == y) ? q_label : q_off;
        weighted_logits += static_cast<long double>(q) * z[k];
    }
    LossEval out;
    out.value = static_cast<double>(static_cast<long double>(sp.lse) - weighted_logits);
    out.grad_logits.resize(k_classes);
    for (std::size_t k = 0; k < k_classes; ++k) {
        const double q = (static_cast<int>(k) == y) ? q_label : q_off;
        out.grad_logits[k] = sp.prob[k] - q;
    }
    out.p_label = sp.p;
    return out;
}

// Encouraging loss: cross entropy plus an additive bonus on the label
// probability. The normal-bonus, unsmoothed case is computed entirely in
// logit space: value = -z_y + lse over non-label logits, grad[y] = -1 and
// grad over non-label logits is their softmax.
inline LossEval encouraging_loss(std::span<const double> z, int y, const BonusSpec& bonus,
                                 double label_smoothing = 0.0) {
    detail::check_label(z, y);
    bonus.validate();
    const auto yi = static_cast<std::size_t>(y);

    if (bonus.kind == BonusKind::normal && label_smoothing == 0.0) {
        const auto sp = detail::softmax_parts(z, y);
        LossEval out;
        out.value = sp.lse_nonlabel - z[yi];
        out.grad_logits.resize(z.size());
        for (std::size_t k = 0; k < z.size(); ++k)
            out.grad_logits[k] = (k == yi) ? -1.0 : std::exp(z[k] - sp.lse_nonlabel);
        out.p_label = sp.p;
        return out;
    }

    LossEval out = ce_loss(z, y, label_smoothing);
    const auto sp = detail::softmax_parts(z, y);
    switch (bonus.kind) {
        case BonusKind::none:
            break;
        case BonusKind::normal:
            out.value += sp.lse_nonlabel - sp.lse;  // log(1-p), exact in logit space
            detail::add_log_bonus_grad(out.grad_logits, z, y, sp);
            break;
        case BonusKind::conservative:
            if (sp.p <= bonus.le) {
                out.value += sp.lse_nonlabel - sp.lse;
                detail::add_log_bonus_grad(out.grad_logits, z, y, sp);
            } else {
                // Tangent continuation of log(1-p) at p = LE.
                out.value += std::log1p(-bonus.le) - (sp.p - bonus.le) / (1.0 - bonus.le);
                detail::add_chain_grad(out.grad_logits, y, sp, -1.0 / (1.0 - bonus.le));
            }
            break;
        case BonusKind::aggressive:
            if (sp.p > bonus.threshold) {
                out.value += (sp.lse_nonlabel - sp.lse) - std::log1p(-bonus.threshold);
                detail::add_log_bonus_grad(out.grad_logits, z, y, sp);
            }
            break;
    }
    return out;
}

// Focal loss -(1-p)^gamma log p. Powers of 1-p use the logit-space value,
// and the non-label gradient is -grad[y] times the non-label softmax, so
// the (1-p)^(gamma-1) singularity never materializes.
inline LossEval focal_loss(std::span<const double> z, int y, double gamma_f) {
    detail::check_label(z, y);
    if (!(gamma_f >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    const auto sp = detail::softmax_parts(z, y);
    const double pow_g = std::pow(sp.one_minus_p, gamma_f);

    LossEval out;
    out.value = -pow_g * sp.log_p;
    out.grad_logits.resize(z.size());
    const double grad_label =
        gamma_f * sp.p * pow_g * sp.log_p - pow_g * sp.one_minus_p;
    const auto yi = static_cast<std::size_t>(y);
    for (std::size_t k = 0; k < z.size(); ++k)
        out.grad_logits[k] =
            (k == yi) ? grad_label : -grad_label * std::exp(z[k] - sp.lse_nonlabel);
    out.p_label = sp.p;
    return out;
}

// Shift that makes the CE branch of the halted focal loss meet the focal
// branch at p = phi.
inline double hfl_shift(double gamma_f, double phi) {
    return (std::pow(1.0 - phi, gamma_f) - 1.0) * std::log(phi);
}

// Halted focal loss: focal below phi, shifted cross entropy above it.
inline LossEval halted_focal_loss(std::span<const double> z, int y, double gamma_f, double phi) {
    detail::check_label(z, y);
    if (!(gamma_f >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    if (!(phi > 0.0 && phi < 1.0)) throw std::invalid_argument("phi must be in (0,1)");
    const auto sp = detail::softmax_parts(z, y);
    if (sp.p <= phi) return focal_loss(z, y, gamma_f);

    LossEval out;
    out.value = -(sp.log_p + hfl_shift(gamma_f, phi));
    out.grad_logits.resize(z.size());
    const auto yi = static_cast<std::size_t>(y);
    for (std::size_t k = 0; k < z.size(); ++k)
        out.grad_logits[k] = sp.prob[k] - (k == yi ? 1.0 : 0.0);
    out.p_label = sp.p;
    return out;
}

// Mean squared error between the one-hot target and the normalized
// probabilities. The mirror bonus -(y p)^2 - ((1-y)(1-p))^2 makes the
// per-dimension steepness a constant -2 / +2.
inline LossEval mse_loss(std::span<const double> z, int y, bool mirror,
                         Normalization normalization) {
    detail::check_label(z, y);
    const std::size_t k_classes = z.size();
    const auto yi = static_cast<std::size_t>(y);

    Vec p(k_classes);
    if (normalization == Normalization::softmax) {
        p = softmax(z);
    } else {
        for (std::size_t k = 0; k < k_classes; ++k) p[k] = sigmoid(z[k]);
    }

    long double value = 0.0L;
    Vec dvdp(k_classes);
    for (std::size_t k = 0; k < k_classes; ++k) {
        const double target = (k == yi) ? 1.0 : 0.0;
        value += static_cast<long double>(target - p[k]) * (target - p[k]);
        dvdp[k] = 2.0 * (p[k] - target);
        if (mirror) {
            if (k == yi) {
                value -= static_cast<long double>(p[k]) * p[k];
                dvdp[k] -= 2.0 * p[k];
            } else {
                value -= static_cast<long double>(1.0 - p[k]) * (1.0 - p[k]);
                dvdp[k] += 2.0 * (1.0 - p[k]);
            }
        }
    }

    LossEval out;
    out.value = static_cast<double>(value);
    out.grad_logits.resize(k_classes);
    if (normalization == Normalization::sigmoid) {
        for (std::size_t k = 0; k < k_classes; ++k)
            out.grad_logits[k] = dvdp[k] * p[k] * (1.0 - p[k]);
    } else {
        long double inner = 0.0L;
        for (std::size_t k = 0; k < k_classes; ++k)
            inner += static_cast<long double>(dvdp[k]) * p[k];
        for (std::size_t k = 0; k < k_classes; ++k)
            out.grad_logits[k] = p[k] * (dvdp[k] - static_cast<double>(inner));
    }
    out.p_label = p[yi];
    return out;
}

inline LossEval evaluate(const LossSpec& spec, std::span<const double> z, int y) {
    switch (spec.family) {
        case LossFamily::ce:
            return ce_loss(z, y, spec.label_smoothing);
        case LossFamily::el:
            return encouraging_loss(z, y, spec.bonus, spec.label_smoothing);
        case LossFamily::focal:
            return focal_loss(z, y, spec.gamma_f);
        case LossFamily::hfl:
            return halted_focal_loss(z, y, spec.gamma_f, spec.phi);
        case LossFamily::mse:
            return mse_loss(z, y, false, spec.normalization);
        case LossFamily::mse_mirror:
            return mse_loss(z, y, true, spec.normalization);
    }
    throw std::logic_error("unreachable loss family");
}

// dL/dp at the label probability: how strongly the family pulls on an
// example whose label class currently has probability p.
inline double steepness(const LossSpec& spec, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
    const double focal_slope = [&] {
        return spec.gamma_f * std::pow(1.0 - p, spec.gamma_f - 1.0) * std::log(p) -
               std::pow(1.0 - p, spec.gamma_f) / p;
    }();
    switch (spec.family) {
        case LossFamily::ce:
            return -1.0 / p;
        case LossFamily::el:
            switch (spec.bonus.kind) {
                case BonusKind::none:
                    return -1.0 / p;
                case BonusKind::normal:
                    return -1.0 / p - 1.0 / (1.0 - p);
                case BonusKind::conservative:
                    return p <= spec.bonus.le ? -1.0 / p - 1.0 / (1.0 - p)
                                              : -1.0 / p - 1.0 / (1.0 - spec.bonus.le);
                case BonusKind::aggressive:
                    return p <= spec.bonus.threshold ? -1.0 / p : -1.0 / p - 1.0 / (1.0 - p);
            }
            throw std::logic_error("unreachable bonus kind");
        case LossFamily::focal:
            return focal_slope;
        case LossFamily::hfl:
            return p <= spec.phi ? focal_slope : -1.0 / p;
        case LossFamily::mse:
            return 2.0 * (p - 1.0);
        case LossFamily::mse_mirror:
            return -2.0;
    }
    throw std::logic_error("unreachable loss family");
}

}  // namespace elab

#endif  // ELAB_LOSSES_HPP
