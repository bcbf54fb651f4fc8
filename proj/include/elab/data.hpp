#ifndef ELAB_DATA_HPP
#define ELAB_DATA_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "elab/numerics.hpp"
#include "elab/rng.hpp"

namespace elab {

enum class Split : std::uint8_t { train, valid, test };

// Shot-size tag of a class by its sample count: many > 100, few < 20,
// medium in between.
enum class ShotCategory : std::uint8_t { many, medium, few };

inline ShotCategory shot_category(std::size_t class_count) {
    if (class_count > 100) return ShotCategory::many;
    if (class_count < 20) return ShotCategory::few;
    return ShotCategory::medium;
}

struct LabeledDataset {
    Matrix features;  // N x D
    std::vector<int> labels;
    int num_classes = 0;
    std::vector<Split> split;
    std::vector<ShotCategory> class_shot;  // per class; filled by the imbalanced generator

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == s) idx.push_back(i);
        return idx;
    }
};

struct BlobSpec {
    int classes = 3;
    std::vector<Vec> means;          // one D-vector per class
    std::vector<double> stddevs;     // one per class, > 0
    std::vector<int> counts;         // one per class, > 0
    std::uint64_t seed = 1;
    std::array<double, 3> fractions{0.8, 0.1, 0.1};

    void validate() const {
        if (classes < 2) throw std::invalid_argument("blob spec needs at least 2 classes");
        if (means.size() != static_cast<std::size_t>(classes) ||
            stddevs.size() != static_cast<std::size_t>(classes) ||
            counts.size() != static_cast<std::size_t>(classes))
            throw std::invalid_argument("blob spec fields must all have one entry per class");
        const std::size_t d = means[0].size();
        for (const auto& m : means)
            if (m.size() != d) throw std::invalid_argument("blob means must share a dimension");
        for (double s : stddevs)
            if (!(s > 0.0)) throw std::invalid_argument("blob stddev must be > 0");
        for (int c : counts)
            if (c <= 0) throw std::invalid_argument("blob counts must be > 0");
    }
};

// Seeded shuffle then contiguous train/valid/test assignment. Rows are
// physically reordered. Rejects configurations that leave no train or no
// test rows.
inline LabeledDataset split_dataset(const LabeledDataset& ds, std::array<double, 3> fractions,
                                    std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw std::invalid_argument("split fractions must be nonnegative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (n_train + n_valid > n) throw std::invalid_argument("split fractions overflow dataset");
    const std::size_t n_test = n - n_train - n_valid;
    if (n_train == 0) throw std::invalid_argument("split leaves no train rows");
    if (n_test == 0) throw std::invalid_argument("split leaves no test rows");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.bounded(i);
        std::swap(order[i - 1], order[j]);
    }

    LabeledDataset out;
    out.features = Matrix(n, ds.dim());
    out.labels.resize(n);
    out.split.resize(n);
    out.num_classes = ds.num_classes;
    out.class_shot = ds.class_shot;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        for (std::size_t d = 0; d < ds.dim(); ++d) out.features(i, d) = ds.features(src, d);
        out.labels[i] = ds.labels[src];
        out.split[i] = i < n_train ? Split::train : (i < n_train + n_valid ? Split::valid : Split::test);
    }
    return out;
}

// Gaussian clusters, one per class, deterministic per seed. Rows are
// shuffled and split by the spec's fractions (0.8/0.1/0.1 by default).
inline LabeledDataset gen_blobs(const BlobSpec& spec) {
    spec.validate();
    std::size_t total = 0;
    for (int c : spec.counts) total += static_cast<std::size_t>(c);
    const std::size_t dim = spec.means[0].size();

    LabeledDataset ds;
    ds.features = Matrix(total, dim);
    ds.labels.resize(total);
    ds.split.assign(total, Split::train);
    ds.num_classes = spec.classes;

    Rng rng(derive_seed(spec.seed, "blobs"));
    std::size_t row = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int i = 0; i < spec.counts[static_cast<std::size_t>(c)]; ++i, ++row) {
            for (std::size_t d = 0; d < dim; ++d)
                ds.features(row, d) = spec.means[static_cast<std::size_t>(c)][d] +
                                      spec.stddevs[static_cast<std::size_t>(c)] * rng.normal();
            ds.labels[row] = c;
        }
    }
    return split_dataset(ds, spec.fractions, derive_seed(spec.seed, "split"));
}

// Long-tailed variant: class k gets ceil(n0 * ratio^k) points where n0 is
// the spec's first count. Tags every class with its shot category.
inline LabeledDataset gen_imbalanced_blobs(const BlobSpec& spec, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("decay ratio must be in (0,1]");
    BlobSpec imb = spec;
    const double n0 = static_cast<double>(spec.counts.at(0));
    for (int c = 0; c < spec.classes; ++c)
        imb.counts[static_cast<std::size_t>(c)] =
            static_cast<int>(std::ceil(n0 * std::pow(ratio, c)));
    LabeledDataset ds = gen_blobs(imb);
    ds.class_shot.resize(static_cast<std::size_t>(spec.classes));
    for (int c = 0; c < spec.classes; ++c)
        ds.class_shot[static_cast<std::size_t>(c)] =
            shot_category(static_cast<std::size_t>(imb.counts[static_cast<std::size_t>(c)]));
    return ds;
}

// ---------------------------------------------------------------------------
// IDX container (the MNIST binary format). Images: magic 0x00000803,
// big-endian u32 dims count/rows/cols, unsigned bytes scaled to [0,1].
// Labels: magic 0x00000801, big-endian u32 count, one byte per label.
// ---------------------------------------------------------------------------

enum class IdxError { io, bad_magic, truncated, count_mismatch };

class IdxParseError : public std::runtime_error {
public:
    IdxParseError(IdxError kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    IdxError kind() const { return kind_; }

private:
    IdxError kind_;
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxParseError(IdxError::io, "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                               const std::string& path) {
    if (off + 4 > b.size()) throw IdxParseError(IdxError::truncated, "truncated file " + path);
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);

    if (detail::read_be32(img, 0, images_path) != 0x00000803u)
        throw IdxParseError(IdxError::bad_magic, "bad image magic in " + images_path);
    if (detail::read_be32(lab, 0, labels_path) != 0x00000801u)
        throw IdxParseError(IdxError::bad_magic, "bad label magic in " + labels_path);

    const std::uint32_t n_img = detail::read_be32(img, 4, images_path);
    const std::uint32_t rows = detail::read_be32(img, 8, images_path);
    const std::uint32_t cols = detail::read_be32(img, 12, images_path);
    const std::uint32_t n_lab = detail::read_be32(lab, 4, labels_path);
    if (n_img != n_lab)
        throw IdxParseError(IdxError::count_mismatch, "count mismatch: " + std::to_string(n_img) +
                                                          " images vs " + std::to_string(n_lab) +
                                                          " labels");

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    if (16 + static_cast<std::size_t>(n_img) * dim > img.size())
        throw IdxParseError(IdxError::truncated, "truncated file " + images_path);
    if (8 + static_cast<std::size_t>(n_lab) > lab.size())
        throw IdxParseError(IdxError::truncated, "truncated file " + labels_path);

    LabeledDataset ds;
    ds.features = Matrix(n_img, dim);
    ds.labels.resize(n_img);
    ds.split.assign(n_img, Split::train);
    int max_label = 1;
    for (std::uint32_t i = 0; i < n_img; ++i) {
        for (std::size_t d = 0; d < dim; ++d)
            ds.features(i, d) = static_cast<double>(img[16 + i * dim + d]) / 255.0;
        ds.labels[i] = static_cast<int>(lab[8 + i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

// Inverse of load_idx for features in [0,1]; pixels quantize to
// round(v * 255), so a loaded dataset round-trips exactly.
inline void save_idx(const Matrix& features, const std::vector<int>& labels,
                     const std::string& images_path, const std::string& labels_path,
                     std::uint32_t rows, std::uint32_t cols) {
    if (static_cast<std::size_t>(rows) * cols != features.cols)
        throw std::invalid_argument("rows*cols must equal the feature dimension");
    if (labels.size() != features.rows) throw std::invalid_argument("label count mismatch");

    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IdxParseError(IdxError::io, "cannot open " + images_path);
    detail::write_be32(img, 0x00000803u);
    detail::write_be32(img, static_cast<std::uint32_t>(features.rows));
    detail::write_be32(img, rows);
    detail::write_be32(img, cols);
    for (double v : features.data) {
        const auto byte = static_cast<unsigned char>(std::llround(v * 255.0));
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw IdxParseError(IdxError::io, "cannot open " + labels_path);
    detail::write_be32(lab, 0x00000801u);
    detail::write_be32(lab, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        const auto byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

}  // namespace elab

#endif  // ELAB_DATA_HPP
