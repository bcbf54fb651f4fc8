#ifndef ELAB_NETWORK_HPP
#define ELAB_NETWORK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "elab/data.hpp"
#include "elab/losses.hpp"
#include "elab/numerics.hpp"
#include "elab/rng.hpp"

namespace elab {

// Fully connected network: ReLU on hidden layers, identity on the output.
struct Mlp {
    std::vector<std::size_t> layer_dims;  // [D, h1, ..., K]
    std::vector<Matrix> weights;          // layer l maps dims[l] -> dims[l+1]
    std::vector<Vec> biases;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t num_classes() const { return layer_dims.back(); }
    std::size_t num_layers() const { return weights.size(); }
};

// He-scheme initialization: weights ~ N(0, 2/fan_in), biases zero.
inline Mlp init_mlp(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw std::invalid_argument("need at least input and output dims");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("layer dims must be positive");

    Mlp m;
    m.layer_dims = layer_dims;
    Rng rng(derive_seed(seed, "mlp-init"));
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l];
        const std::size_t fan_out = layer_dims[l + 1];
        Matrix w(fan_out, fan_in);
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (double& v : w.data) v = stddev * rng.normal();
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

struct ForwardTrace {
    std::vector<Vec> acts;  // acts[0] = input, acts[l] = post-activation of layer l
    std::vector<Vec> pre;   // pre-activation of layer l (1-based as pre[l-1])
};

inline void forward_trace(const Mlp& m, std::span<const double> x, ForwardTrace& t) {
    if (x.size() != m.input_dim()) throw std::invalid_argument("input dimension mismatch");
    t.acts.resize(m.num_layers() + 1);
    t.pre.resize(m.num_layers());
    t.acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        const Matrix& w = m.weights[l];
        const Vec& in = t.acts[l];
        Vec& h = t.pre[l];
        h.assign(w.rows, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            double acc = m.biases[l][r];
            const double* wr = &w.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * in[c];
            h[r] = acc;
        }
        if (l + 1 < m.num_layers()) {
            Vec& a = t.acts[l + 1];
            a.resize(h.size());
            for (std::size_t r = 0; r < h.size(); ++r) a[r] = h[r] > 0.0 ? h[r] : 0.0;
        } else {
            t.acts[l + 1] = h;
        }
    }
}

inline Vec forward(const Mlp& m, std::span<const double> x) {
    ForwardTrace t;
    forward_trace(m, x, t);
    return t.acts.back();
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    Vec input;
};

inline Gradients zero_gradients(const Mlp& m) {
    Gradients g;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        g.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
        g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    g.input.assign(m.input_dim(), 0.0);
    return g;
}

// Reverse pass for the scalar <grad_logits, f(x)>; adds `weight` times the
// parameter and input gradients into `accum`. ReLU subgradient at 0 is 0.
inline void backward_into(const Mlp& m, const ForwardTrace& t, std::span<const double> grad_logits,
                          double weight, Gradients& accum) {
    if (grad_logits.size() != m.num_classes())
        throw std::invalid_argument("grad_logits dimension mismatch");
    Vec delta(grad_logits.begin(), grad_logits.end());
    for (std::size_t li = m.num_layers(); li-- > 0;) {
        const Matrix& w = m.weights[li];
        const Vec& in = t.acts[li];
        Matrix& gw = accum.weights[li];
        Vec& gb = accum.biases[li];
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double wd = weight * delta[r];
            gb[r] += wd;
            double* gwr = &gw.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) gwr[c] += wd * in[c];
        }
        Vec prev(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* wr = &w.data[r * w.cols];
            for (std::size_t c = 0; c < w.cols; ++c) prev[c] += wr[c] * d;
        }
        if (li > 0) {
            const Vec& h = t.pre[li - 1];
            for (std::size_t c = 0; c < prev.size(); ++c)
                if (!(h[c] > 0.0)) prev[c] = 0.0;
        } else {
            for (std::size_t c = 0; c < prev.size(); ++c) accum.input[c] += weight * prev[c];
            return;
        }
        delta = std::move(prev);
    }
}

inline Gradients backward(const Mlp& m, std::span<const double> x,
                          std::span<const double> grad_logits) {
    ForwardTrace t;
    forward_trace(m, x, t);
    Gradients g = zero_gradients(m);
    backward_into(m, t, grad_logits, 1.0, g);
    return g;
}

// Gradient of the chosen loss with respect to the input features.
inline Vec input_gradient(const Mlp& m, std::span<const double> x, int y, const LossSpec& loss) {
    const Vec z = forward(m, x);
    const LossEval eval = evaluate(loss, z, y);
    return backward(m, x, eval.grad_logits).input;
}

struct MomentumState {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
};

inline MomentumState zero_momentum(const Mlp& m) {
    MomentumState v;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        v.weights.emplace_back(m.weights[l].rows, m.weights[l].cols);
        v.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return v;
}

// v <- momentum * v + g; theta <- theta - lr_effective * v.
inline void sgd_step(Mlp& m, const Gradients& g, double lr_effective, double momentum,
                     MomentumState& v) {
    if (!(lr_effective > 0.0)) throw std::invalid_argument("lr_effective must be > 0");
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (std::size_t i = 0; i < m.weights[l].data.size(); ++i) {
            double& vel = v.weights[l].data[i];
            vel = momentum * vel + g.weights[l].data[i];
            m.weights[l].data[i] -= lr_effective * vel;
        }
        for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
            double& vel = v.biases[l][i];
            vel = momentum * vel + g.biases[l][i];
            m.biases[l][i] -= lr_effective * vel;
        }
    }
}

struct TrainConfig {
    double lr = 0.05;
    double lr_scale = 1.0;  // global multiplier on lr, the Table-2 style knob
    double momentum = 0.0;
    int epochs = 1;
    int batch_size = 64;
    std::uint64_t seed = 1;
    std::vector<double> class_weights;  // empty = unweighted
    int reweight_start_epoch = 1;       // weights are 1 before this epoch
    std::vector<std::pair<int, double>> schedule;  // (epoch, lr multiplier), applied from epoch on

    void validate(int num_classes) const {
        if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
        if (!(lr_scale > 0.0)) throw std::invalid_argument("lr_scale must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw std::invalid_argument("momentum must be in [0,1)");
        if (epochs <= 0) throw std::invalid_argument("epochs must be > 0");
        if (batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
        if (!class_weights.empty()) {
            if (class_weights.size() != static_cast<std::size_t>(num_classes))
                throw std::invalid_argument("class_weights must have one entry per class");
            if (reweight_start_epoch > epochs)
                throw std::invalid_argument("reweight_start must be <= epochs");
        }
    }
};

struct EpochRecord {
    int epoch;
    double train_loss;
    double train_acc;
    double test_acc;
    double mean_margin;
    double mean_label_energy;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

class TrainError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct EvalStats {
    double accuracy = 0.0;
    double mean_margin = 0.0;
    double mean_label_energy = 0.0;
};

// Correct means margin > 0; a tie with another class counts as incorrect,
// which keeps accuracy consistent with the margin records.
inline EvalStats eval_model(const Mlp& m, const LabeledDataset& ds,
                            std::span<const std::size_t> idx) {
    EvalStats s;
    if (idx.empty()) return s;
    long double margin_acc = 0.0L, energy_acc = 0.0L;
    std::size_t correct = 0;
    for (std::size_t i : idx) {
        const Vec z = forward(m, ds.features.row(i));
        const auto y = static_cast<std::size_t>(ds.labels[i]);
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < z.size(); ++k)
            if (k != y) other = std::max(other, z[k]);
        const double margin = z[y] - other;
        margin_acc += margin;
        energy_acc += -z[y];
        if (margin > 0.0) ++correct;
    }
    const auto n = static_cast<double>(idx.size());
    s.accuracy = static_cast<double>(correct) / n;
    s.mean_margin = static_cast<double>(margin_acc) / n;
    s.mean_label_energy = static_cast<double>(energy_acc) / n;
    return s;
}

inline double schedule_multiplier(const std::vector<std::pair<int, double>>& schedule, int epoch) {
    double mult = 1.0;
    for (const auto& [start, value] : schedule)
        if (epoch >= start) mult = value;
    return mult;
}

}  // namespace detail

// Mini-batch SGD. Per-example class weights multiply the loss value and the
// logit gradient before the batch mean; they activate at
// reweight_start_epoch (deferred re-weighting). Shuffling, and therefore the
// whole trajectory, is a pure function of the config seed.
inline std::pair<Mlp, TrainTrace> train(Mlp model, const LabeledDataset& ds, const LossSpec& loss,
                                        const TrainConfig& cfg) {
    loss.validate();
    cfg.validate(ds.num_classes);
    if (ds.size() == 0) throw std::invalid_argument("dataset is empty");
    for (int label : ds.labels)
        if (label < 0 || label >= ds.num_classes)
            throw std::invalid_argument("label out of range");
    if (model.num_classes() != static_cast<std::size_t>(ds.num_classes))
        throw std::invalid_argument("model output dimension must equal the class count");

    const std::vector<std::size_t> base_train = ds.indices_of(Split::train);
    const std::vector<std::size_t> test_idx = ds.indices_of(Split::test);
    if (base_train.empty()) throw std::invalid_argument("dataset has no train rows");

    std::vector<std::pair<int, double>> schedule = cfg.schedule;
    std::sort(schedule.begin(), schedule.end());

    Rng shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));
    MomentumState velocity = zero_momentum(model);
    Gradients batch_grads = zero_gradients(model);
    ForwardTrace trace;
    std::vector<std::size_t> order = base_train;

    TrainTrace out_trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr_eff =
            cfg.lr * cfg.lr_scale * detail::schedule_multiplier(schedule, epoch);
        const bool weights_active = !cfg.class_weights.empty() && epoch >= cfg.reweight_start_epoch;

        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.bounded(i)]);

        long double loss_acc = 0.0L;
        const auto batch = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(start + batch, order.size());
            const auto batch_n = static_cast<double>(end - start);
            for (auto& w : batch_grads.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
            for (auto& b : batch_grads.biases) std::fill(b.begin(), b.end(), 0.0);

            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t row = order[bi];
                forward_trace(model, ds.features.row(row), trace);
                const LossEval eval = evaluate(loss, trace.acts.back(), ds.labels[row]);
                if (!std::isfinite(eval.value))
                    throw TrainError("NaN loss at epoch " + std::to_string(epoch) + " batch " +
                                     std::to_string(start / batch));
                const double w =
                    weights_active ? cfg.class_weights[static_cast<std::size_t>(ds.labels[row])]
                                   : 1.0;
                loss_acc += static_cast<long double>(w) * eval.value;
                backward_into(model, trace, eval.grad_logits, w / batch_n, batch_grads);
            }
            sgd_step(model, batch_grads, lr_eff, cfg.momentum, velocity);
        }

        const detail::EvalStats train_stats = detail::eval_model(model, ds, base_train);
        const detail::EvalStats test_stats = detail::eval_model(model, ds, test_idx);
        out_trace.epochs.push_back({epoch,
                                    static_cast<double>(loss_acc) /
                                        static_cast<double>(base_train.size()),
                                    train_stats.accuracy, test_stats.accuracy,
                                    train_stats.mean_margin, train_stats.mean_label_energy});
    }
    return {std::move(model), std::move(out_trace)};
}

// Representation probe: freeze everything, re-initialize the output layer,
// retrain it alone with CE for 20 epochs (lr 0.1, x0.1 every 5 epochs), and
// report test accuracy. balanced=true draws each example by first picking a
// class uniformly, the CRT-style resampling.
inline double probe_representation(const Mlp& trained, const LabeledDataset& ds,
                                   std::uint64_t seed, bool balanced) {
    constexpr int kEpochs = 20;
    constexpr int kBatch = 64;
    constexpr double kLr = 0.1;

    Mlp m = trained;
    const std::size_t last = m.num_layers() - 1;
    {
        Rng rng(derive_seed(seed, "probe-init"));
        const double stddev = std::sqrt(2.0 / static_cast<double>(m.weights[last].cols));
        for (double& v : m.weights[last].data) v = stddev * rng.normal();
        std::fill(m.biases[last].begin(), m.biases[last].end(), 0.0);
    }

    const std::vector<std::size_t> train_idx = ds.indices_of(Split::train);
    const std::vector<std::size_t> test_idx = ds.indices_of(Split::test);
    if (train_idx.empty() || test_idx.empty())
        throw std::invalid_argument("probe needs train and test rows");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.num_classes));
    for (std::size_t i : train_idx) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    const LossSpec ce_spec{};
    Rng rng(derive_seed(seed, "probe-shuffle"));
    ForwardTrace trace;
    std::vector<std::size_t> order = train_idx;
    Matrix grad_w(m.weights[last].rows, m.weights[last].cols);
    Vec grad_b(m.biases[last].size(), 0.0);

    for (int epoch = 1; epoch <= kEpochs; ++epoch) {
        const double lr = kLr * std::pow(0.1, (epoch - 1) / 5);
        if (balanced) {
            for (auto& slot : order) {
                const auto c = rng.bounded(static_cast<std::uint64_t>(ds.num_classes));
                const auto& pool = by_class[static_cast<std::size_t>(c)];
                if (pool.empty()) throw std::invalid_argument("balanced probe needs every class");
                slot = pool[rng.bounded(pool.size())];
            }
        } else {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.bounded(i)]);
        }

        for (std::size_t start = 0; start < order.size(); start += kBatch) {
            const std::size_t end = std::min(start + static_cast<std::size_t>(kBatch), order.size());
            const auto batch_n = static_cast<double>(end - start);
            std::fill(grad_w.data.begin(), grad_w.data.end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);
            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t row = order[bi];
                forward_trace(m, ds.features.row(row), trace);
                const LossEval eval = evaluate(ce_spec, trace.acts.back(), ds.labels[row]);
                const Vec& feat = trace.acts[last];
                for (std::size_t r = 0; r < grad_w.rows; ++r) {
                    const double d = eval.grad_logits[r] / batch_n;
                    grad_b[r] += d;
                    double* gw = &grad_w.data[r * grad_w.cols];
                    for (std::size_t c = 0; c < grad_w.cols; ++c) gw[c] += d * feat[c];
                }
            }
            for (std::size_t i = 0; i < grad_w.data.size(); ++i)
                m.weights[last].data[i] -= lr * grad_w.data[i];
            for (std::size_t i = 0; i < grad_b.size(); ++i) m.biases[last][i] -= lr * grad_b[i];
        }
    }
    return detail::eval_model(m, ds, test_idx).accuracy;
}

}  // namespace elab

#endif  // ELAB_NETWORK_HPP
