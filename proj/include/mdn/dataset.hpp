#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdn/matrix.hpp"

namespace mdn {

// Labeled samples with a declared norm bound B: every feature vector
// satisfies ||x||_2 <= norm_bound_B. Loaders scale features so the max
// sample norm is exactly 1.
struct Dataset {
    std::vector<DenseVector> features;
    std::vector<int> labels;
    int num_classes = 0;
    double norm_bound_B = 1.0;

    std::size_t size() const { return features.size(); }
    std::size_t feature_dim() const { return features.empty() ? 0 : features.front().dim(); }

    void validate() const;  // throws if labels/features disagree with the invariants
};

// Raw contents of an IDX image/label file pair.
struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count*rows*cols, row-major per image
};

IdxImages parse_idx_images(const std::string& path);
std::vector<std::uint8_t> parse_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Parses the big-endian IDX pair, scales pixels from [0,255] to [0,1],
// flattens row-major, then rescales all samples so the max norm is B = 1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// k Gaussian clusters in n dims; cluster centers at distance controlled by
// `separation`, then the whole set is scaled into the unit ball (B = 1).
Dataset synth_blobs(int k, std::size_t n, std::size_t per_class, double separation,
                    std::uint64_t seed);

// Seeded subsample of round(fraction*m) samples, original order preserved.
// Stratified mode keeps per-class proportions within one sample and never
// drops a class below one sample (warned via the returned flag).
struct SubsetResult {
    Dataset data;
    bool clamped_classes = false;  // some class was held at 1 sample
};
SubsetResult subset_fraction(const Dataset& data, double fraction, std::uint64_t seed,
                             bool stratified);

// Disjoint, exhaustive, deterministic split; validation gets `holdout` samples.
std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t holdout,
                                          std::uint64_t seed);

// CSV export: label,f0,f1,...
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace mdn
