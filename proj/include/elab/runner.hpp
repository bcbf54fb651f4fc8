#ifndef ELAB_RUNNER_HPP
#define ELAB_RUNNER_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "elab/attacks.hpp"
#include "elab/config.hpp"
#include "elab/data.hpp"
#include "elab/diagnostics.hpp"
#include "elab/losses.hpp"
#include "elab/network.hpp"
#include "elab/ood.hpp"
#include "elab/rng.hpp"

namespace elab {

inline constexpr const char* kToolVersion = "0.1.0";

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every numeric CSV field is emitted with 9 significant digits.
inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Exact hexadecimal float, for the model file.
inline std::string fmt_exact(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

struct ResultBundle {
    Config manifest;
    TrainTrace trace;
    std::map<std::string, double> metrics;
    std::vector<std::string> artifacts;
};

// ---------------------------------------------------------------------------
// Config resolution: fill every default so the written manifest is a
// complete, self-contained description of the run.
// ---------------------------------------------------------------------------

inline Config resolve_config(Config cfg) {
    cfg.set_default("seed", "1");
    cfg.set_default("loss", "ce");
    const std::string loss = cfg.get("loss");
    static const std::set<std::string> kFamilies{"ce", "el", "focal", "hfl", "mse", "mse_mirror"};
    if (!kFamilies.count(loss)) throw ConfigError("unknown loss family: " + loss);
    cfg.set_default("bonus", loss == "el" ? "normal" : "none");
    if (cfg.get("bonus") == "conservative" && !cfg.has("le"))
        throw ConfigError("le is required for the conservative bonus");
    cfg.set_default("le", "1");
    cfg.set_default("bonus_threshold", "0.5");
    cfg.set_default("gamma", "2");
    cfg.set_default("phi", "0.5");
    cfg.set_default("label_smoothing", "0");
    cfg.set_default("mse_norm", "softmax");

    cfg.set_default("dataset", "blobs");
    cfg.set_default("blob_classes", "3");
    cfg.set_default("blob_dim", "2");
    cfg.set_default("blob_count", "1000");
    cfg.set_default("blob_stddev", "1");
    cfg.set_default("blob_radius", "4");
    cfg.set_default("imb_ratio", "0.5");
    cfg.set_default("split", "0.8,0.1,0.1");

    cfg.set_default("hidden", "64,64");
    cfg.set_default("lr", "0.05");
    cfg.set_default("lr_scale", "1");
    cfg.set_default("momentum", "0");
    cfg.set_default("epochs", "50");
    cfg.set_default("batch_size", "64");
    cfg.set_default("reweight_start", "1");

    cfg.set_default("diagnostics", "");
    cfg.set_default("ece_bins", "15");
    cfg.set_default("indicator", "min_conditional_energy");
    cfg.set_default("ood_shift", "6");
    cfg.set_default("margin_bin_width", "0.5");

    cfg.set_default("attack", "fgsm");
    cfg.set_default("norm", "linf");
    cfg.set_default("eps", "0,0.1,0.2,0.3");
    cfg.set_default("steps", "40");
    cfg.set_default("step_size", "0");
    cfg.set_default("random_start", "true");
    cfg.set_default("clip_lo", "auto");
    cfg.set_default("clip_hi", "auto");
    cfg.set_default("attack_train_loss", "false");
    cfg.set_default("probe_balanced", "false");

    std::string run_id = loss;
    if (loss == "el") run_id += "-" + cfg.get("bonus");
    run_id += "-" + cfg.get("dataset") + "-s" + cfg.get("seed");
    cfg.set_default("run_id", run_id);
    cfg.set("tool_version", kToolVersion);

    // out / force steer file placement only and stay out of the manifest.
    cfg.erase("out");
    cfg.erase("force");
    return cfg;
}

inline LossSpec loss_from_config(const Config& cfg) {
    LossSpec spec;
    const std::string family = cfg.get("loss");
    if (family == "ce") spec.family = LossFamily::ce;
    else if (family == "el") spec.family = LossFamily::el;
    else if (family == "focal") spec.family = LossFamily::focal;
    else if (family == "hfl") spec.family = LossFamily::hfl;
    else if (family == "mse") spec.family = LossFamily::mse;
    else if (family == "mse_mirror") spec.family = LossFamily::mse_mirror;
    else throw ConfigError("unknown loss family: " + family);

    if (spec.family == LossFamily::el) {
        const std::string bonus = cfg.get("bonus");
        if (bonus == "none") spec.bonus.kind = BonusKind::none;
        else if (bonus == "normal") spec.bonus.kind = BonusKind::normal;
        else if (bonus == "conservative") spec.bonus.kind = BonusKind::conservative;
        else if (bonus == "aggressive") spec.bonus.kind = BonusKind::aggressive;
        else throw ConfigError("unknown bonus kind: " + bonus);
        spec.bonus.le = cfg.get_double("le");
        spec.bonus.threshold = cfg.get_double("bonus_threshold");
    }
    spec.gamma_f = cfg.get_double("gamma");
    spec.phi = cfg.get_double("phi");
    spec.label_smoothing = cfg.get_double("label_smoothing");
    const std::string norm = cfg.get("mse_norm");
    if (norm == "softmax") spec.normalization = Normalization::softmax;
    else if (norm == "sigmoid") spec.normalization = Normalization::sigmoid;
    else throw ConfigError("unknown mse_norm: " + norm);
    spec.validate();
    return spec;
}

inline TrainConfig train_config_from_config(const Config& cfg) {
    TrainConfig tc;
    tc.lr = cfg.get_double("lr");
    tc.lr_scale = cfg.get_double("lr_scale");
    tc.momentum = cfg.get_double("momentum");
    tc.epochs = static_cast<int>(cfg.get_int("epochs"));
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size"));
    tc.seed = derive_seed(cfg.get_u64("seed"), "train");
    if (cfg.has("class_weights") && !cfg.get("class_weights").empty())
        tc.class_weights = cfg.get_double_list("class_weights");
    tc.reweight_start_epoch = static_cast<int>(cfg.get_int("reweight_start"));
    if (cfg.has("schedule") && !cfg.get("schedule").empty()) {
        for (const std::string& item : cfg.get_string_list("schedule")) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw ConfigError("schedule entries must look like epoch:multiplier");
            tc.schedule.emplace_back(std::stoi(item.substr(0, colon)),
                                     std::stod(item.substr(colon + 1)));
        }
    }
    return tc;
}

namespace detail {

inline std::array<double, 3> fractions_from(const Config& cfg) {
    const auto f = cfg.get_double_list("split");
    if (f.size() != 3) throw ConfigError("split must have 3 fractions");
    return {f[0], f[1], f[2]};
}

// Class means either given explicitly ("x,y; x,y; ...") or laid out on a
// circle of the configured radius in the first two dimensions.
inline std::vector<Vec> blob_means_from(const Config& cfg, int classes, std::size_t dim) {
    std::vector<Vec> means;
    if (cfg.has("blob_means") && !cfg.get("blob_means").empty()) {
        std::stringstream ss(cfg.get("blob_means"));
        std::string entry;
        while (std::getline(ss, entry, ';')) {
            Vec mean;
            std::stringstream es(entry);
            std::string comp;
            while (std::getline(es, comp, ','))
                if (!comp.empty()) mean.push_back(std::stod(comp));
            if (mean.size() != dim) throw ConfigError("blob_means entry has wrong dimension");
            means.push_back(std::move(mean));
        }
        if (means.size() != static_cast<std::size_t>(classes))
            throw ConfigError("blob_means must list one mean per class");
        return means;
    }
    const double radius = cfg.get_double("blob_radius");
    for (int c = 0; c < classes; ++c) {
        Vec mean(dim, 0.0);
        const double angle = 2.0 * std::numbers::pi * c / classes;
        mean[0] = radius * std::cos(angle);
        if (dim > 1) mean[1] = radius * std::sin(angle);
        means.push_back(std::move(mean));
    }
    return means;
}

inline BlobSpec blob_spec_from(const Config& cfg, std::uint64_t seed) {
    BlobSpec spec;
    spec.classes = static_cast<int>(cfg.get_int("blob_classes"));
    const auto dim = static_cast<std::size_t>(cfg.get_int("blob_dim"));
    spec.means = blob_means_from(cfg, spec.classes, dim);
    spec.stddevs.assign(static_cast<std::size_t>(spec.classes), cfg.get_double("blob_stddev"));
    spec.counts.assign(static_cast<std::size_t>(spec.classes),
                       static_cast<int>(cfg.get_int("blob_count")));
    spec.seed = seed;
    spec.fractions = fractions_from(cfg);
    return spec;
}

}  // namespace detail

inline LabeledDataset dataset_from_config(const Config& cfg) {
    const std::uint64_t master = cfg.get_u64("seed");
    const std::string kind = cfg.get("dataset");
    if (kind == "blobs") return gen_blobs(detail::blob_spec_from(cfg, derive_seed(master, "data")));
    if (kind == "imb-blobs")
        return gen_imbalanced_blobs(detail::blob_spec_from(cfg, derive_seed(master, "data")),
                                    cfg.get_double("imb_ratio"));
    if (kind == "idx") {
        LabeledDataset ds = load_idx(cfg.get("idx_images"), cfg.get("idx_labels"));
        return split_dataset(ds, detail::fractions_from(cfg), derive_seed(master, "split"));
    }
    throw ConfigError("unknown dataset kind: " + kind);
}

// OOD partner set: a second IDX pair when configured, otherwise the blob
// layout shifted by ood_shift (a scalar applied to every dimension, or a
// comma list with one entry per dimension).
inline LabeledDataset ood_set_from_config(const Config& cfg) {
    if (cfg.has("ood_images") && !cfg.get("ood_images").empty())
        return load_idx(cfg.get("ood_images"), cfg.get("ood_labels"));
    if (cfg.get("dataset") == "idx")
        throw ConfigError("ood for idx datasets needs ood_images/ood_labels");
    const std::uint64_t master = cfg.get_u64("seed");
    BlobSpec spec = detail::blob_spec_from(cfg, derive_seed(master, "ood-data"));
    const auto shift = cfg.get_double_list("ood_shift");
    for (auto& mean : spec.means)
        for (std::size_t d = 0; d < mean.size(); ++d)
            mean[d] += shift.size() == 1 ? shift[0] : shift.at(d);
    return gen_blobs(spec);
}

inline AttackConfig attack_config_from_config(const Config& cfg) {
    AttackConfig ac;
    const std::string method = cfg.get("attack");
    if (method == "fgsm") ac.method = AttackMethod::fgsm;
    else if (method == "pgd") ac.method = AttackMethod::pgd;
    else throw ConfigError("unknown attack method: " + method);
    const std::string norm = cfg.get("norm");
    if (norm == "linf") ac.norm = AttackNorm::linf;
    else if (norm == "l2") ac.norm = AttackNorm::l2;
    else throw ConfigError("unknown attack norm: " + norm);
    ac.steps = static_cast<int>(cfg.get_int("steps"));
    ac.step_size = cfg.get_double("step_size");
    ac.random_start = cfg.get_bool("random_start");
    ac.attack_train_loss = cfg.get_bool("attack_train_loss");
    ac.seed = derive_seed(cfg.get_u64("seed"), "attack");

    // "auto" clip: [0,1] for idx pixel data, effectively unclipped for the
    // unbounded synthetic features.
    const bool pixels = cfg.get("dataset") == "idx";
    ac.clip_lo = cfg.get("clip_lo") == "auto" ? (pixels ? 0.0 : -1e9) : cfg.get_double("clip_lo");
    ac.clip_hi = cfg.get("clip_hi") == "auto" ? (pixels ? 1.0 : 1e9) : cfg.get_double("clip_hi");
    return ac;
}

// ---------------------------------------------------------------------------
// CSV artifacts.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_file(const std::string& path, const std::string& content,
                       std::vector<std::string>& artifacts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    artifacts.push_back(path);
}

inline std::string trace_csv(const TrainTrace& trace) {
    std::string s = "epoch,train_loss,train_acc,test_acc,mean_margin,mean_label_energy\n";
    for (const auto& r : trace.epochs)
        s += std::to_string(r.epoch) + "," + fmt9(r.train_loss) + "," + fmt9(r.train_acc) + "," +
             fmt9(r.test_acc) + "," + fmt9(r.mean_margin) + "," + fmt9(r.mean_label_energy) + "\n";
    return s;
}

inline std::string model_txt(const Mlp& m) {
    std::string s = "dims";
    for (std::size_t d : m.layer_dims) s += " " + std::to_string(d);
    s += "\n";
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        s += "W " + std::to_string(l) + "\n";
        for (std::size_t r = 0; r < m.weights[l].rows; ++r) {
            for (std::size_t c = 0; c < m.weights[l].cols; ++c)
                s += (c ? " " : "") + fmt_exact(m.weights[l](r, c));
            s += "\n";
        }
        s += "b " + std::to_string(l) + "\n";
        for (std::size_t i = 0; i < m.biases[l].size(); ++i)
            s += (i ? " " : "") + fmt_exact(m.biases[l][i]);
        s += "\n";
    }
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment pipeline. `stage` is updated as the run progresses so failures
// can be reported against the stage that raised them.
// ---------------------------------------------------------------------------

inline ResultBundle run_experiment(const Config& resolved, const std::string& out_dir, bool force,
                                   std::string* stage = nullptr) {
    namespace fs = std::filesystem;
    const auto set_stage = [&](const char* s) {
        if (stage) *stage = s;
    };

    set_stage("configure");
    const LossSpec loss = loss_from_config(resolved);
    const TrainConfig tc = train_config_from_config(resolved);
    const std::uint64_t master = resolved.get_u64("seed");
    const auto diagnostics = resolved.get_string_list("diagnostics");

    set_stage("setup");
    const fs::path dir(out_dir);
    if (fs::exists(dir / "manifest.txt") && !force)
        throw IoError("output directory " + out_dir + " already holds a run (use --force)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir);

    ResultBundle bundle;
    bundle.manifest = resolved;
    detail::write_file((dir / "manifest.txt").string(), resolved.serialize(), bundle.artifacts);

    set_stage("data");
    const LabeledDataset ds = dataset_from_config(resolved);

    set_stage("train");
    std::vector<std::size_t> dims{ds.dim()};
    for (double h : resolved.get_double_list("hidden"))
        dims.push_back(static_cast<std::size_t>(h));
    dims.push_back(static_cast<std::size_t>(ds.num_classes));
    Mlp model = init_mlp(dims, derive_seed(master, "init"));
    auto [trained, trace] = train(std::move(model), ds, loss, tc);
    bundle.trace = trace;

    detail::write_file((dir / "trace.csv").string(), detail::trace_csv(trace), bundle.artifacts);
    detail::write_file((dir / "model.txt").string(), detail::model_txt(trained), bundle.artifacts);

    const EpochRecord& last = trace.epochs.back();
    bundle.metrics["test_acc"] = last.test_acc;
    bundle.metrics["train_acc"] = last.train_acc;
    bundle.metrics["train_loss"] = last.train_loss;
    bundle.metrics["mean_margin"] = last.mean_margin;
    bundle.metrics["mean_label_energy"] = last.mean_label_energy;

    if (!ds.class_shot.empty()) {
        set_stage("shot-metrics");
        std::array<std::size_t, 3> total{0, 0, 0}, correct{0, 0, 0};
        for (std::size_t i : ds.indices_of(Split::test)) {
            const auto cat =
                static_cast<std::size_t>(ds.class_shot[static_cast<std::size_t>(ds.labels[i])]);
            const Vec z = forward(trained, ds.features.row(i));
            const auto y = static_cast<std::size_t>(ds.labels[i]);
            double other = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < z.size(); ++k)
                if (k != y) other = std::max(other, z[k]);
            ++total[cat];
            if (z[y] - other > 0.0) ++correct[cat];
        }
        const char* names[3] = {"acc_many", "acc_medium", "acc_few"};
        for (std::size_t c = 0; c < 3; ++c)
            if (total[c])
                bundle.metrics[names[c]] =
                    static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    }

    for (const std::string& diag : diagnostics) {
        if (diag == "margins") {
            set_stage("margins");
            const auto recs = margins(trained, ds, Split::train);
            std::string s = "example_id,margin,correct\n";
            for (const auto& r : recs)
                s += std::to_string(r.example_id) + "," + fmt9(r.margin) + "," +
                     (r.correct ? "1" : "0") + "\n";
            detail::write_file((dir / "margins.csv").string(), s, bundle.artifacts);

            const auto hist = margin_histogram(recs, resolved.get_double("margin_bin_width"));
            std::string h = "bin_lo,bin_hi,count\n";
            for (const auto& b : hist)
                h += fmt9(b.lo) + "," + fmt9(b.hi) + "," + std::to_string(b.count) + "\n";
            detail::write_file((dir / "margin_hist.csv").string(), h, bundle.artifacts);
        } else if (diag == "energy") {
            set_stage("energy");
            const auto recs = energies(trained, ds, Split::train);
            std::string s = "example_id,label_energy,min_energy,free_energy\n";
            for (const auto& r : recs)
                s += std::to_string(r.example_id) + "," + fmt9(r.label_energy) + "," +
                     fmt9(r.min_energy) + "," + fmt9(r.free_energy) + "\n";
            detail::write_file((dir / "energy.csv").string(), s, bundle.artifacts);

            const Matrix matrix = class_energy_matrix(trained, ds, Split::train);
            std::string ce_csv = "label,class,mean_energy\n";
            for (std::size_t y = 0; y < matrix.rows; ++y)
                for (std::size_t c = 0; c < matrix.cols; ++c)
                    ce_csv += std::to_string(y) + "," + std::to_string(c) + "," +
                              fmt9(matrix(y, c)) + "\n";
            detail::write_file((dir / "class_energy.csv").string(), ce_csv, bundle.artifacts);
        } else if (diag == "ece") {
            set_stage("ece");
            const auto report =
                ece(trained, ds, Split::test, static_cast<int>(resolved.get_int("ece_bins")));
            std::string s = "bin_lo,bin_hi,count,confidence,accuracy\n";
            for (const auto& b : report.bins)
                s += fmt9(b.lo) + "," + fmt9(b.hi) + "," + std::to_string(b.count) + "," +
                     fmt9(b.confidence) + "," + fmt9(b.accuracy) + "\n";
            s += "# ece," + fmt9(report.ece) + "\n";
            detail::write_file((dir / "ece.csv").string(), s, bundle.artifacts);
            bundle.metrics["ece"] = report.ece;
        } else if (diag == "ood") {
            set_stage("ood");
            const std::string ind_name = resolved.get("indicator");
            Indicator ind;
            if (ind_name == "min_conditional_energy") ind = Indicator::min_conditional_energy;
            else if (ind_name == "free_energy") ind = Indicator::free_energy;
            else if (ind_name == "max_prob") ind = Indicator::max_prob;
            else throw ConfigError("unknown indicator: " + ind_name);

            const LabeledDataset ood_set = ood_set_from_config(resolved);
            OodScoreSet scores;
            scores.indicator = ind;
            scores.in_scores = ood_scores(trained, ds, Split::test, ind);
            scores.ood_scores = ood_scores(trained, ood_set.features, ind);

            std::string s = "score,is_ood,indicator\n";
            for (double v : scores.in_scores) s += fmt9(v) + ",0," + ind_name + "\n";
            for (double v : scores.ood_scores) s += fmt9(v) + ",1," + ind_name + "\n";
            const double roc = auroc(scores);
            const double fpr = fpr_at_tpr(scores, 0.95);
            s += "# summary," + ind_name + "," + fmt9(roc) + "," + fmt9(fpr) + "\n";
            detail::write_file((dir / "ood.csv").string(), s, bundle.artifacts);
            bundle.metrics["auroc"] = roc;
            bundle.metrics["fpr95"] = fpr;
        } else if (diag == "attack") {
            set_stage("attack");
            const AttackConfig ac = attack_config_from_config(resolved);
            const auto eps = resolved.get_double_list("eps");
            const auto curve = robustness_curve(trained, ds, Split::test, loss, ac, eps);
            std::string s = "epsilon,accuracy,method,norm\n";
            for (const auto& pt : curve)
                s += fmt9(pt.epsilon) + "," + fmt9(pt.accuracy) + "," + resolved.get("attack") +
                     "," + resolved.get("norm") + "\n";
            detail::write_file((dir / "robustness.csv").string(), s, bundle.artifacts);
            if (!curve.empty()) bundle.metrics["adv_acc"] = curve.back().accuracy;
        } else if (diag == "probe") {
            set_stage("probe");
            const bool balanced = resolved.get_bool("probe_balanced");
            const double acc =
                probe_representation(trained, ds, derive_seed(master, "probe"), balanced);
            std::string s = "probe_accuracy,balanced\n";
            s += fmt9(acc) + std::string(",") + (balanced ? "1" : "0") + "\n";
            detail::write_file((dir / "probe.csv").string(), s, bundle.artifacts);
            bundle.metrics["probe_acc"] = acc;
        } else {
            throw ConfigError("unknown diagnostic: " + diag);
        }
    }

    set_stage("summary");
    std::string s = "metric,value\n";
    for (const auto& [k, v] : bundle.metrics) s += k + "," + fmt9(v) + "\n";
    detail::write_file((dir / "summary.csv").string(), s, bundle.artifacts);
    return bundle;
}

// ---------------------------------------------------------------------------
// Sweep: repeat the base run while one parameter walks a value list. Every
// entry owns its subdirectory; seeds vary only when the axis is the seed.
// ---------------------------------------------------------------------------

inline std::vector<ResultBundle> run_sweep(const Config& base, const std::string& axis,
                                           const std::vector<std::string>& values,
                                           const std::string& out_dir, bool force,
                                           std::string* stage = nullptr) {
    static const std::set<std::string> kAxes{"le", "lr_scale", "seed", "eps"};
    if (!kAxes.count(axis)) throw ConfigError("axis must be one of le, lr_scale, seed, eps");
    if (values.empty()) throw ConfigError("sweep needs a nonempty value list");

    std::vector<ResultBundle> bundles;
    for (const std::string& value : values) {
        Config cfg = base;
        if (axis == "le") {
            cfg.set("loss", "el");
            cfg.set("bonus", "conservative");
            cfg.set("le", value);
        } else if (axis == "eps") {
            cfg.set("eps", value);
            std::string diags = cfg.get("diagnostics", "");
            if (diags.find("attack") == std::string::npos)
                cfg.set("diagnostics", diags.empty() ? "attack" : diags + ",attack");
        } else {
            cfg.set(axis, value);
        }
        cfg.set("run_id", base.get("run_id", "sweep") + "-" + axis + "=" + value);
        const Config resolved = resolve_config(cfg);
        const std::string sub = out_dir + "/" + axis + "=" + value;
        bundles.push_back(run_experiment(resolved, sub, force, stage));
    }

    if (stage) *stage = "comparison";
    std::set<std::string> keys;
    for (const auto& b : bundles)
        for (const auto& [k, v] : b.metrics) keys.insert(k);

    std::string csv = "axis,value";
    for (const auto& k : keys) csv += "," + k;
    csv += "\n";
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        csv += axis + "," + values[i];
        for (const auto& k : keys) {
            const auto it = bundles[i].metrics.find(k);
            csv += ",";
            if (it != bundles[i].metrics.end()) csv += fmt9(it->second);
        }
        csv += "\n";
    }
    if (axis == "seed" && bundles.size() > 1) {
        // Mean and sample standard deviation per metric across seeds.
        std::string mean_row = axis + ",mean", std_row = axis + ",stddev";
        for (const auto& k : keys) {
            long double sum = 0.0L;
            std::size_t n = 0;
            for (const auto& b : bundles)
                if (b.metrics.count(k)) {
                    sum += b.metrics.at(k);
                    ++n;
                }
            const double mean = n ? static_cast<double>(sum / n) : 0.0;
            long double sq = 0.0L;
            for (const auto& b : bundles)
                if (b.metrics.count(k)) {
                    const double d = b.metrics.at(k) - mean;
                    sq += static_cast<long double>(d) * d;
                }
            const double sd = n > 1 ? std::sqrt(static_cast<double>(sq / (n - 1))) : 0.0;
            mean_row += "," + (n ? fmt9(mean) : std::string());
            std_row += "," + (n ? fmt9(sd) : std::string());
        }
        csv += mean_row + "\n" + std_row + "\n";
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream out(out_dir + "/comparison.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + out_dir + "/comparison.csv");
    out << csv;
    return bundles;
}

// ---------------------------------------------------------------------------
// Gradient check used by the `gradcheck` subcommand: analytic logit
// gradients against central differences, standalone and through a small
// MLP. Returns the worst relative deviation seen.
// ---------------------------------------------------------------------------

inline double gradcheck_report(const LossSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, "gradcheck"));
    const double h = 1e-5;
    double worst = 0.0;
    const auto rel_dev = [](double analytic, double numeric) {
        const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        return std::abs(analytic - numeric) / scale;
    };

    // Piecewise families have a knot in p where central differences straddle
    // two branches; draws within 1e-3 of it are redrawn.
    const double knot = spec.family == LossFamily::hfl
                            ? spec.phi
                            : (spec.family == LossFamily::el &&
                                       spec.bonus.kind == BonusKind::conservative
                                   ? spec.bonus.le
                                   : (spec.family == LossFamily::el &&
                                              spec.bonus.kind == BonusKind::aggressive
                                          ? spec.bonus.threshold
                                          : -1.0));

    for (int draw = 0; draw < 200; ++draw) {
        const std::size_t k = 2 + rng.bounded(5);
        Vec z(k);
        int y = 0;
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (double& v : z) v = rng.uniform_range(-6.0, 6.0);
            y = static_cast<int>(rng.bounded(k));
            if (knot < 0.0 || std::abs(softmax(z)[static_cast<std::size_t>(y)] - knot) > 1e-3)
                break;
        }
        const LossEval eval = evaluate(spec, z, y);
        for (std::size_t i = 0; i < k; ++i) {
            Vec zp = z, zm = z;
            zp[i] += h;
            zm[i] -= h;
            const double fd = (evaluate(spec, zp, y).value - evaluate(spec, zm, y).value) / (2 * h);
            worst = std::max(worst, rel_dev(eval.grad_logits[i], fd));
        }
    }

    // End to end through a 2-8-3 network.
    Mlp m = init_mlp({2, 8, 3}, derive_seed(seed, "gradcheck-mlp"));
    for (int draw = 0; draw < 5; ++draw) {
        Vec x{rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0)};
        int y = static_cast<int>(rng.bounded(3));
        for (int attempt = 0; attempt < 100; ++attempt) {
            const Vec p = softmax(forward(m, x));
            if (knot < 0.0 || std::abs(p[static_cast<std::size_t>(y)] - knot) > 1e-3) break;
            x = {rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0)};
            y = static_cast<int>(rng.bounded(3));
        }
        const LossEval eval = evaluate(spec, forward(m, x), y);
        const Gradients g = backward(m, x, eval.grad_logits);
        for (std::size_t l = 0; l < m.num_layers(); ++l) {
            for (std::size_t i = 0; i < m.weights[l].data.size(); ++i) {
                Mlp mp = m, mm = m;
                mp.weights[l].data[i] += h;
                mm.weights[l].data[i] -= h;
                const double fd = (evaluate(spec, forward(mp, x), y).value -
                                   evaluate(spec, forward(mm, x), y).value) /
                                  (2 * h);
                worst = std::max(worst, rel_dev(g.weights[l].data[i], fd));
            }
            for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
                Mlp mp = m, mm = m;
                mp.biases[l][i] += h;
                mm.biases[l][i] -= h;
                const double fd = (evaluate(spec, forward(mp, x), y).value -
                                   evaluate(spec, forward(mm, x), y).value) /
                                  (2 * h);
                worst = std::max(worst, rel_dev(g.biases[l][i], fd));
            }
        }
    }
    return worst;
}

}  // namespace elab

#endif  // ELAB_RUNNER_HPP
