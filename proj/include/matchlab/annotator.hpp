#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matchlab/geometry.hpp"
#include "matchlab/matcher.hpp"

namespace matchlab {

// Machine-generated dense correspondence for one pair, gated at tau.
struct PseudoLabel {
    std::string pair_src;
    std::string pair_tgt;
    MatchField field;
    std::vector<std::uint8_t> mask;  // mask[i] = 1 iff field.confidence[i] > tau
    double tau = 0.7;
    int teacher_generation = 0;

    std::size_t retained() const;
};

// Full teacher forward pass; strict (>) threshold comparison, so cells at
// exactly tau are excluded.
PseudoLabel annotate_pair(const MatcherParams& teacher, const Image& src, const Image& tgt,
                          double tau, int teacher_generation = 0);

// Pull the label through the same geometric transform applied to the target
// image: each augmented-target cell samples the original field and confidence
// at its pre-image, with mask re-thresholded on the interpolated confidence;
// pre-images outside the original target image get mask 0.
PseudoLabel warp_pseudo_label(const PseudoLabel& label, const GeometricTransform& t,
                              PixelGrid tgt_image_grid);

// Binary record-per-pair store with a directory-level index file.
void save_pseudo_labels(const std::vector<PseudoLabel>& labels, const std::filesystem::path& dir);
std::vector<PseudoLabel> load_pseudo_labels(const std::filesystem::path& dir);

}  // namespace matchlab
