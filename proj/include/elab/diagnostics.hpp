#ifndef ELAB_DIAGNOSTICS_HPP
#define ELAB_DIAGNOSTICS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "elab/data.hpp"
#include "elab/network.hpp"
#include "elab/numerics.hpp"

namespace elab {

// Margin gamma(x, y) = z_y - max over other classes, in logit units.
// Correct iff margin > 0; ties count as incorrect.
struct MarginRecord {
    std::size_t example_id;
    double margin;
    bool correct;
};

inline std::vector<MarginRecord> margins(const Mlp& m, const LabeledDataset& ds, Split subset) {
    std::vector<MarginRecord> out;
    for (std::size_t i : ds.indices_of(subset)) {
        const Vec z = forward(m, ds.features.row(i));
        const auto y = static_cast<std::size_t>(ds.labels[i]);
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < z.size(); ++k)
            if (k != y) other = std::max(other, z[k]);
        const double margin = z[y] - other;
        out.push_back({i, margin, margin > 0.0});
    }
    return out;
}

struct HistBin {
    double lo;
    double hi;
    std::size_t count;
};

// Counts per half-open bin [i*w, (i+1)*w); only populated bins are listed.
inline std::vector<HistBin> margin_histogram(std::span<const MarginRecord> records,
                                             double bin_width) {
    if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be > 0");
    std::map<long long, std::size_t> counts;
    for (const auto& r : records)
        ++counts[static_cast<long long>(std::floor(r.margin / bin_width))];
    std::vector<HistBin> out;
    for (const auto& [idx, count] : counts)
        out.push_back({static_cast<double>(idx) * bin_width,
                       static_cast<double>(idx + 1) * bin_width, count});
    return out;
}

// Conditional-energy view of the classifier: E(y|x) = -z_y. free_energy is
// -logsumexp(z), always <= min_energy.
struct EnergyRecord {
    std::size_t example_id;
    double label_energy;
    double min_energy;
    double free_energy;
};

inline std::vector<EnergyRecord> energies(const Mlp& m, const LabeledDataset& ds, Split subset) {
    std::vector<EnergyRecord> out;
    for (std::size_t i : ds.indices_of(subset)) {
        const Vec z = forward(m, ds.features.row(i));
        const auto y = static_cast<std::size_t>(ds.labels[i]);
        const double max_z = *std::max_element(z.begin(), z.end());
        out.push_back({i, -z[y], -max_z, -log_sum_exp(z)});
    }
    return out;
}

inline double mean_class_energy(std::span<const EnergyRecord> records, const LabeledDataset& ds,
                                int class_index) {
    long double acc = 0.0L;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (ds.labels[r.example_id] == class_index) {
            acc += r.label_energy;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("no examples of the requested class");
    return static_cast<double>(acc / static_cast<long double>(n));
}

// Mean conditional energy E(c|x) = -z_c over the examples of each label:
// entry (label, c). The label diagonal is the on-data energy; off-diagonal
// rows show how sharply the energy rises away from the labeled class.
inline Matrix class_energy_matrix(const Mlp& m, const LabeledDataset& ds, Split subset) {
    const auto k = static_cast<std::size_t>(ds.num_classes);
    Matrix sums(k, k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i : ds.indices_of(subset)) {
        const Vec z = forward(m, ds.features.row(i));
        const auto y = static_cast<std::size_t>(ds.labels[i]);
        ++counts[y];
        for (std::size_t c = 0; c < k; ++c) sums(y, c) += -z[c];
    }
    for (std::size_t y = 0; y < k; ++y)
        for (std::size_t c = 0; c < k; ++c)
            sums(y, c) = counts[y] ? sums(y, c) / static_cast<double>(counts[y])
                                   : std::numeric_limits<double>::quiet_NaN();
    return sums;
}

struct EceBin {
    double lo;
    double hi;
    std::size_t count;
    double confidence;  // mean max-probability of the bin, 0 if empty
    double accuracy;    // fraction correct in the bin, 0 if empty
};

struct EceReport {
    std::vector<EceBin> bins;
    std::size_t total = 0;
    double ece = 0.0;
};

// Expected calibration error over B equal-width confidence bins on [0,1];
// the last bin is right-closed. Confidence is the max softmax probability.
inline EceReport ece(const Mlp& m, const LabeledDataset& ds, Split subset, int num_bins = 15) {
    if (num_bins < 1) throw std::invalid_argument("need at least one bin");
    const auto idx = ds.indices_of(subset);
    if (idx.empty()) throw std::invalid_argument("empty subset");

    const auto bins_n = static_cast<std::size_t>(num_bins);
    std::vector<std::size_t> count(bins_n, 0);
    std::vector<long double> conf_sum(bins_n, 0.0L);
    std::vector<std::size_t> correct(bins_n, 0);

    for (std::size_t i : idx) {
        const Vec z = forward(m, ds.features.row(i));
        const Vec p = softmax(z);
        const std::size_t pred = argmax(p);
        const double conf = p[pred];
        auto bin = static_cast<std::size_t>(conf * num_bins);
        if (bin >= bins_n) bin = bins_n - 1;
        ++count[bin];
        conf_sum[bin] += conf;
        if (pred == static_cast<std::size_t>(ds.labels[i])) ++correct[bin];
    }

    EceReport report;
    report.total = idx.size();
    long double ece_acc = 0.0L;
    for (std::size_t b = 0; b < bins_n; ++b) {
        EceBin bin;
        bin.lo = static_cast<double>(b) / num_bins;
        bin.hi = static_cast<double>(b + 1) / num_bins;
        bin.count = count[b];
        bin.confidence =
            count[b] ? static_cast<double>(conf_sum[b] / static_cast<long double>(count[b])) : 0.0;
        bin.accuracy =
            count[b] ? static_cast<double>(correct[b]) / static_cast<double>(count[b]) : 0.0;
        if (count[b])
            ece_acc += (static_cast<long double>(count[b]) / static_cast<long double>(report.total)) *
                       std::abs(bin.accuracy - bin.confidence);
        report.bins.push_back(bin);
    }
    report.ece = static_cast<double>(ece_acc);
    return report;
}

}  // namespace elab

#endif  // ELAB_DIAGNOSTICS_HPP
