#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matchlab/annotator.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/image.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

struct PhotometricSpec {
    double apply_probability = 0.2;
    double brightness = 0.2;  // jitter half-range, additive
    double contrast = 0.2;    // jitter half-range, multiplicative about the mean
    double saturation = 0.2;  // jitter half-range, chroma scale
    double grayscale_probability = 0.1;
};

enum class GeoFamily { none, affine, tps };

struct GeometricSpec {
    GeoFamily family = GeoFamily::none;
    double rotation = 0.3;          // radians, half-range
    double scale_lo = 0.85;
    double scale_hi = 1.2;
    double translation = 3.0;       // pixels, half-range
    int tps_grid = 3;               // control grid per side
    double tps_displacement = 2.0;  // pixels, half-range per control point
};

// Named presets: weak photometric-only warm-up, strong photometric +
// geometric for the self-training stages.
PhotometricSpec weak_photometric();
PhotometricSpec strong_photometric();
GeometricSpec weak_geometric();    // family = none
GeometricSpec strong_geometric();  // affine by default

// One photometric draw: sampled jitter factors, or identity when the
// apply-probability coin says no.
struct PhotometricDraw {
    bool apply = false;
    double brightness = 0.0;
    double contrast = 0.0;
    double saturation = 0.0;
    bool to_grayscale = false;
};

struct AugmentationDraws {
    PhotometricDraw photo_src;
    PhotometricDraw photo_tgt;
    GeometricTransform geo_tgt;  // identity when family = none
    bool geo_identity = true;
};

// Independent photometric draws for source and target, one geometric
// transform destined for the target. Pure function of the rng state.
AugmentationDraws sample_augmentations(const PhotometricSpec& photo, const GeometricSpec& geo,
                                       Rng& rng, PixelGrid tgt_grid);

Image apply_photometric(const Image& img, const PhotometricDraw& draw);

struct AugmentedPair {
    Image src;
    Image tgt;
    std::optional<PseudoLabel> dense_label;
    std::vector<KeypointPair> sparse_keypoints;  // out-of-bounds targets dropped
};

// Photometric on both images, geometric warp on the target image only, labels
// routed through warp_pseudo_label / warp_points_batch.
AugmentedPair augment_pair(const Image& src, const Image& tgt,
                           const std::optional<PseudoLabel>& dense_label,
                           const std::vector<KeypointPair>& sparse_keypoints,
                           const AugmentationDraws& draws);

}  // namespace matchlab
