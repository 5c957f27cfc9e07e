#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matchlab/manifest.hpp"

namespace matchlab {

struct PairRef {
    std::string src_id;
    std::string tgt_id;
    bool labeled = false;

    bool operator==(const PairRef&) const = default;
};

struct PairSet {
    std::vector<PairRef> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
    bool contains(const std::string& s, const std::string& t) const;
};

// All ordered within-class pairs (s, t), s != t, train split only:
// n_c (n_c - 1) pairs for a class with n_c train images.
PairSet enumerate_pairs(const DatasetManifest& m, const std::string& class_id);

// The manifest's annotated pairs whose endpoints are both train-split images
// and that carry at least one keypoint pair.
PairSet labeled_pairs(const DatasetManifest& m);

// Subsample S by image: keeps ceil(fraction * n) labeled images per class
// (chosen deterministically from `seed`) and drops pairs touching the rest.
PairSet subsample_labeled_by_image(const DatasetManifest& m, const PairSet& labeled,
                                   double fraction, std::uint64_t seed);

// Class-balanced sample from U_c \ S without replacement, train split only,
// excluded classes skipped. Pure function of (manifest, budget, seed,
// iteration); successive iterations draw different batches.
PairSet sample_unlabeled_batch(const DatasetManifest& m, int per_class_budget, std::uint64_t seed,
                               int iteration);

// Variant that treats `labeled` as S (used when S was subsampled).
PairSet sample_unlabeled_batch(const DatasetManifest& m, const PairSet& labeled,
                               int per_class_budget, std::uint64_t seed, int iteration);

// CSV with header src_id,tgt_id,labeled.
void save_pairs_csv(const PairSet& set, const std::filesystem::path& path);

}  // namespace matchlab
