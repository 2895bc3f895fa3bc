#include "mdn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdn/rng.hpp"

namespace mdn {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path, std::size_t offset,
                          const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw std::runtime_error(path + ": truncated reading " + what + " at offset " +
                                 std::to_string(offset));
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::string hex_magic(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

// Largest-remainder allocation of round(fraction*m) across class counts.
std::vector<std::size_t> stratified_quotas(const std::vector<std::size_t>& class_counts,
                                           double fraction, std::size_t target,
                                           bool* clamped) {
    const std::size_t k = class_counts.size();
    std::vector<std::size_t> quota(k);
    std::vector<std::pair<double, std::size_t>> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double exact = fraction * static_cast<double>(class_counts[c]);
        quota[c] = static_cast<std::size_t>(exact);
        remainder[c] = {exact - static_cast<double>(quota[c]), c};
        assigned += quota[c];
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t idx = 0; assigned < target && idx < k; ++idx) {
        std::size_t c = remainder[idx].second;
        if (quota[c] < class_counts[c]) {
            ++quota[c];
            ++assigned;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (class_counts[c] > 0 && quota[c] == 0) {
            quota[c] = 1;
            *clamped = true;
        }
    }
    return quota;
}

}  // namespace

void Dataset::validate() const {
    if (features.size() != labels.size()) {
        throw std::invalid_argument("Dataset: features/labels length mismatch");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw std::invalid_argument("Dataset: label out of range");
        }
    }
    for (const auto& x : features) {
        if (x.dim() != features.front().dim()) {
            throw std::invalid_argument("Dataset: inconsistent feature dims");
        }
    }
}

IdxImages parse_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    const std::uint32_t magic = read_be_u32(in, path, 0, "magic");
    if (magic != kImagesMagic) {
        throw std::runtime_error(path + ": bad magic " + hex_magic(magic) + " at offset 0, expected " +
                                 hex_magic(kImagesMagic));
    }
    IdxImages images;
    images.count = read_be_u32(in, path, 4, "image count");
    images.rows = read_be_u32(in, path, 8, "row count");
    images.cols = read_be_u32(in, path, 12, "column count");
    const std::size_t total =
        std::size_t(images.count) * std::size_t(images.rows) * std::size_t(images.cols);
    images.pixels.resize(total);
    in.read(reinterpret_cast<char*>(images.pixels.data()), static_cast<std::streamsize>(total));
    if (static_cast<std::size_t>(in.gcount()) != total) {
        throw std::runtime_error(path + ": truncated pixel data at offset " +
                                 std::to_string(16 + in.gcount()));
    }
    return images;
}

std::vector<std::uint8_t> parse_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    const std::uint32_t magic = read_be_u32(in, path, 0, "magic");
    if (magic != kLabelsMagic) {
        throw std::runtime_error(path + ": bad magic " + hex_magic(magic) + " at offset 0, expected " +
                                 hex_magic(kLabelsMagic));
    }
    const std::uint32_t count = read_be_u32(in, path, 4, "label count");
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw std::runtime_error(path + ": truncated label data at offset " +
                                 std::to_string(8 + in.gcount()));
    }
    return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
    if (images.pixels.size() !=
        std::size_t(images.count) * std::size_t(images.rows) * std::size_t(images.cols)) {
        throw std::invalid_argument("write_idx_images: pixel buffer size mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    write_be_u32(out, kImagesMagic);
    write_be_u32(out, images.count);
    write_be_u32(out, images.rows);
    write_be_u32(out, images.cols);
    out.write(reinterpret_cast<const char*>(images.pixels.data()),
              static_cast<std::streamsize>(images.pixels.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    write_be_u32(out, kLabelsMagic);
    write_be_u32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const IdxImages images = parse_idx_images(images_path);
    const std::vector<std::uint8_t> labels = parse_idx_labels(labels_path);
    if (images.count != labels.size()) {
        throw std::runtime_error("load_idx: " + std::to_string(images.count) + " images vs " +
                                 std::to_string(labels.size()) + " labels");
    }
    if (images.count == 0) throw std::runtime_error("load_idx: empty dataset");

    const std::size_t dim = std::size_t(images.rows) * std::size_t(images.cols);
    Dataset data;
    data.features.reserve(images.count);
    data.labels.reserve(images.count);
    int max_label = 0;
    for (std::size_t s = 0; s < images.count; ++s) {
        std::vector<double> feat(dim);
        const std::uint8_t* px = images.pixels.data() + s * dim;
        for (std::size_t i = 0; i < dim; ++i) feat[i] = static_cast<double>(px[i]) / 255.0;
        data.features.emplace_back(std::move(feat));
        data.labels.push_back(static_cast<int>(labels[s]));
        max_label = std::max(max_label, data.labels.back());
    }
    data.num_classes = max_label + 1;

    double max_norm = 0.0;
    for (const auto& x : data.features) max_norm = std::max(max_norm, norm2(x));
    if (max_norm > 0.0) {
        for (auto& x : data.features) {
            for (std::size_t i = 0; i < x.dim(); ++i) x[i] /= max_norm;
        }
    }
    data.norm_bound_B = 1.0;
    data.validate();
    return data;
}

Dataset synth_blobs(int k, std::size_t n, std::size_t per_class, double separation,
                    std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("synth_blobs: need k >= 2");
    if (per_class < 1) throw std::invalid_argument("synth_blobs: need per_class >= 1");

    std::vector<DenseVector> centers;
    centers.reserve(k);
    Rng center_rng(derive_seed(seed, 0));
    for (int c = 0; c < k; ++c) {
        DenseVector dir(n);
        center_rng.fill_gaussian(dir.data(), n);
        double nd = norm2(dir);
        if (nd == 0.0) {
            dir[0] = 1.0;
            nd = 1.0;
        }
        for (std::size_t i = 0; i < n; ++i) dir[i] *= separation / nd;
        centers.push_back(std::move(dir));
    }

    Dataset data;
    data.num_classes = k;
    data.features.reserve(std::size_t(k) * per_class);
    data.labels.reserve(std::size_t(k) * per_class);
    for (int c = 0; c < k; ++c) {
        Rng rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(c)));
        for (std::size_t s = 0; s < per_class; ++s) {
            DenseVector x(n);
            rng.fill_gaussian(x.data(), n);
            for (std::size_t i = 0; i < n; ++i) x[i] += centers[c][i];
            data.features.push_back(std::move(x));
            data.labels.push_back(c);
        }
    }

    double max_norm = 0.0;
    for (const auto& x : data.features) max_norm = std::max(max_norm, norm2(x));
    if (max_norm > 0.0) {
        for (auto& x : data.features) {
            for (std::size_t i = 0; i < x.dim(); ++i) x[i] /= max_norm;
        }
    }
    data.norm_bound_B = 1.0;
    return data;
}

SubsetResult subset_fraction(const Dataset& data, double fraction, std::uint64_t seed,
                             bool stratified) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::invalid_argument("subset_fraction: fraction must be in (0, 1]");
    }
    const std::size_t m = data.size();
    if (m == 0) throw std::invalid_argument("subset_fraction: empty dataset");
    const std::size_t target =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * double(m))));

    std::vector<std::size_t> chosen;
    bool clamped = false;
    if (stratified) {
        std::vector<std::vector<std::size_t>> by_class(data.num_classes);
        for (std::size_t s = 0; s < m; ++s) by_class[data.labels[s]].push_back(s);
        std::vector<std::size_t> counts(data.num_classes);
        for (int c = 0; c < data.num_classes; ++c) counts[c] = by_class[c].size();
        const auto quota = stratified_quotas(counts, fraction, target, &clamped);
        for (int c = 0; c < data.num_classes; ++c) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
            auto& pool = by_class[c];
            rng.shuffle(pool);
            for (std::size_t i = 0; i < quota[c] && i < pool.size(); ++i) {
                chosen.push_back(pool[i]);
            }
        }
    } else {
        std::vector<std::size_t> order(m);
        for (std::size_t s = 0; s < m; ++s) order[s] = s;
        Rng rng(seed);
        rng.shuffle(order);
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target));
    }
    std::sort(chosen.begin(), chosen.end());

    SubsetResult out;
    out.clamped_classes = clamped;
    out.data.num_classes = data.num_classes;
    out.data.norm_bound_B = data.norm_bound_B;
    out.data.features.reserve(chosen.size());
    out.data.labels.reserve(chosen.size());
    for (std::size_t idx : chosen) {
        out.data.features.push_back(data.features[idx]);
        out.data.labels.push_back(data.labels[idx]);
    }
    return out;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t holdout,
                                          std::uint64_t seed) {
    const std::size_t m = data.size();
    if (holdout >= m) throw std::invalid_argument("split_holdout: holdout >= dataset size");

    std::vector<std::size_t> order(m);
    for (std::size_t s = 0; s < m; ++s) order[s] = s;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(holdout), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto take = [&](const std::vector<std::size_t>& idx) {
        Dataset out;
        out.num_classes = data.num_classes;
        out.norm_bound_B = data.norm_bound_B;
        out.features.reserve(idx.size());
        out.labels.reserve(idx.size());
        for (std::size_t s : idx) {
            out.features.push_back(data.features[s]);
            out.labels.push_back(data.labels[s]);
        }
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << "label";
    for (std::size_t i = 0; i < data.feature_dim(); ++i) out << ",f" << i;
    out << '\n';
    char buf[32];
    for (std::size_t s = 0; s < data.size(); ++s) {
        out << data.labels[s];
        for (std::size_t i = 0; i < data.feature_dim(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", data.features[s][i]);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace mdn
