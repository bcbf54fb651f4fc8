#ifndef ELAB_OOD_HPP
#define ELAB_OOD_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "elab/data.hpp"
#include "elab/network.hpp"
#include "elab/numerics.hpp"

namespace elab {

// OOD indicators, all oriented so that higher means more OOD.
// min_conditional_energy = -max_k z_k, free_energy = -logsumexp(z),
// max_prob = -max_k p_k (negated to keep the orientation uniform).
enum class Indicator { min_conditional_energy, free_energy, max_prob };

inline const char* indicator_name(Indicator ind) {
    switch (ind) {
        case Indicator::min_conditional_energy: return "min_conditional_energy";
        case Indicator::free_energy: return "free_energy";
        case Indicator::max_prob: return "max_prob";
    }
    return "?";
}

inline Vec ood_scores(const Mlp& m, const Matrix& features, Indicator indicator) {
    Vec out(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const Vec z = forward(m, features.row(i));
        switch (indicator) {
            case Indicator::min_conditional_energy:
                out[i] = -*std::max_element(z.begin(), z.end());
                break;
            case Indicator::free_energy:
                out[i] = -log_sum_exp(z);
                break;
            case Indicator::max_prob: {
                const Vec p = softmax(z);
                out[i] = -*std::max_element(p.begin(), p.end());
                break;
            }
        }
    }
    return out;
}

inline Vec ood_scores(const Mlp& m, const LabeledDataset& ds, Split subset, Indicator indicator) {
    const auto idx = ds.indices_of(subset);
    Matrix rows(idx.size(), ds.dim());
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t d = 0; d < ds.dim(); ++d) rows(i, d) = ds.features(idx[i], d);
    return ood_scores(m, rows, indicator);
}

struct OodScoreSet {
    Vec in_scores;
    Vec ood_scores;
    Indicator indicator = Indicator::min_conditional_energy;
};

// Probability that a random OOD score exceeds a random in-distribution
// score, ties counted 1/2 (the Mann-Whitney statistic). Pair counts are
// integers, so the result equals brute-force pairwise counting exactly.
inline double auroc(const OodScoreSet& s) {
    if (s.in_scores.empty() || s.ood_scores.empty())
        throw std::invalid_argument("auroc needs nonempty score sets");
    Vec ood_sorted = s.ood_scores;
    std::sort(ood_sorted.begin(), ood_sorted.end());
    std::size_t greater = 0, equal = 0;
    for (double v : s.in_scores) {
        const auto lo = std::lower_bound(ood_sorted.begin(), ood_sorted.end(), v);
        const auto hi = std::upper_bound(lo, ood_sorted.end(), v);
        equal += static_cast<std::size_t>(hi - lo);
        greater += static_cast<std::size_t>(ood_sorted.end() - hi);
    }
    const double pairs =
        static_cast<double>(s.in_scores.size()) * static_cast<double>(s.ood_scores.size());
    return (static_cast<double>(greater) + 0.5 * static_cast<double>(equal)) / pairs;
}

// False-positive rate at the given true-positive rate, OOD positive.
// Threshold rule: the largest t with fraction(ood >= t) >= tpr_target, no
// interpolation; returns fraction(in >= t).
inline double fpr_at_tpr(const OodScoreSet& s, double tpr_target = 0.95) {
    if (s.in_scores.empty() || s.ood_scores.empty())
        throw std::invalid_argument("fpr_at_tpr needs nonempty score sets");
    if (!(tpr_target > 0.0 && tpr_target <= 1.0))
        throw std::invalid_argument("tpr_target must be in (0,1]");
    Vec ood_desc = s.ood_scores;
    std::sort(ood_desc.begin(), ood_desc.end(), std::greater<>());
    const auto n_ood = static_cast<double>(ood_desc.size());

    std::size_t k = static_cast<std::size_t>(std::ceil(tpr_target * n_ood - 1e-12));
    if (k == 0) k = 1;
    // Align with the integer-fraction comparison fraction(k)/n >= target.
    while (k < ood_desc.size() && static_cast<double>(k) / n_ood < tpr_target) ++k;
    while (k > 1 && static_cast<double>(k - 1) / n_ood >= tpr_target) --k;

    const double threshold = ood_desc[k - 1];
    std::size_t fp = 0;
    for (double v : s.in_scores)
        if (v >= threshold) ++fp;
    return static_cast<double>(fp) / static_cast<double>(s.in_scores.size());
}

}  // namespace elab

#endif  // ELAB_OOD_HPP
