#include "matchlab/augment.hpp"

#include <algorithm>
#include <cmath>

namespace matchlab {

PhotometricSpec weak_photometric() { return PhotometricSpec{0.2, 0.2, 0.2, 0.2, 0.1}; }

PhotometricSpec strong_photometric() { return PhotometricSpec{0.4, 0.4, 0.4, 0.4, 0.2}; }

GeometricSpec weak_geometric() {
    GeometricSpec g;
    g.family = GeoFamily::none;
    return g;
}

GeometricSpec strong_geometric() {
    GeometricSpec g;
    g.family = GeoFamily::affine;
    return g;
}

namespace {

PhotometricDraw sample_photometric(const PhotometricSpec& spec, Rng& rng) {
    PhotometricDraw d;
    // fixed draw order keeps streams aligned whether or not the coin lands
    double coin = rng.uniform();
    d.brightness = rng.uniform(-spec.brightness, spec.brightness);
    d.contrast = rng.uniform(-spec.contrast, spec.contrast);
    d.saturation = rng.uniform(-spec.saturation, spec.saturation);
    double gray_coin = rng.uniform();
    d.apply = coin < spec.apply_probability;
    d.to_grayscale = d.apply && gray_coin < spec.grayscale_probability;
    if (!d.apply) {
        d.brightness = d.contrast = d.saturation = 0.0;
        d.to_grayscale = false;
    }
    return d;
}

GeometricTransform sample_geometric(const GeometricSpec& spec, Rng& rng, PixelGrid grid) {
    if (spec.family == GeoFamily::none) return GeometricTransform::identity();
    Point2 center{(grid.width - 1) / 2.0, (grid.height - 1) / 2.0};
    if (spec.family == GeoFamily::affine) {
        double rot = rng.uniform(-spec.rotation, spec.rotation);
        double scale = rng.uniform(spec.scale_lo, spec.scale_hi);
        Point2 tr{rng.uniform(-spec.translation, spec.translation),
                  rng.uniform(-spec.translation, spec.translation)};
        return GeometricTransform::similarity(rot, scale, center, tr);
    }
    // tps: control grid over the image with jittered targets
    std::vector<Point2> controls, targets;
    for (int gy = 0; gy < spec.tps_grid; ++gy) {
        for (int gx = 0; gx < spec.tps_grid; ++gx) {
            Point2 c{gx * (grid.width - 1.0) / (spec.tps_grid - 1),
                     gy * (grid.height - 1.0) / (spec.tps_grid - 1)};
            controls.push_back(c);
            targets.push_back({c.x + rng.uniform(-spec.tps_displacement, spec.tps_displacement),
                               c.y + rng.uniform(-spec.tps_displacement, spec.tps_displacement)});
        }
    }
    return GeometricTransform::make_tps(std::move(controls), std::move(targets));
}

}  // namespace

AugmentationDraws sample_augmentations(const PhotometricSpec& photo, const GeometricSpec& geo,
                                       Rng& rng, PixelGrid tgt_grid) {
    AugmentationDraws d;
    d.photo_src = sample_photometric(photo, rng);
    d.photo_tgt = sample_photometric(photo, rng);
    d.geo_tgt = sample_geometric(geo, rng, tgt_grid);
    d.geo_identity = geo.family == GeoFamily::none;
    return d;
}

Image apply_photometric(const Image& img, const PhotometricDraw& draw) {
    if (!draw.apply) return img;
    std::vector<float> gray = grayscale(img);
    double mean = 0.0;
    for (float v : gray) mean += v;
    mean /= static_cast<double>(gray.size());

    Image out(img.height, img.width);
    const float contrast = static_cast<float>(1.0 + draw.contrast);
    const float saturation = static_cast<float>(1.0 + draw.saturation);
    const float brightness = static_cast<float>(draw.brightness);
    const float fmean = static_cast<float>(mean);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float* p = img.pixel(y, x);
            float* q = out.pixel(y, x);
            float g = gray[static_cast<std::size_t>(y) * img.width + x];
            for (int c = 0; c < 3; ++c) {
                float v = draw.to_grayscale ? g : g + (p[c] - g) * saturation;
                v = (v - fmean) * contrast + fmean;
                v += brightness;
                q[c] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

AugmentedPair augment_pair(const Image& src, const Image& tgt,
                           const std::optional<PseudoLabel>& dense_label,
                           const std::vector<KeypointPair>& sparse_keypoints,
                           const AugmentationDraws& draws) {
    AugmentedPair out;
    out.src = apply_photometric(src, draws.photo_src);
    out.tgt = apply_photometric(tgt, draws.photo_tgt);
    if (draws.geo_identity) {
        out.dense_label = dense_label;
        out.sparse_keypoints = sparse_keypoints;
        return out;
    }

    out.tgt = warp_image(out.tgt, draws.geo_tgt, tgt.grid());
    if (dense_label) {
        out.dense_label = warp_pseudo_label(*dense_label, draws.geo_tgt, tgt.grid());
    }
    if (!sparse_keypoints.empty()) {
        std::vector<Point2> tgt_pts;
        tgt_pts.reserve(sparse_keypoints.size());
        for (const auto& kp : sparse_keypoints) tgt_pts.push_back(kp.tgt);
        auto warped = warp_points_batch(draws.geo_tgt, tgt_pts, tgt.grid());
        for (std::size_t i = 0; i < warped.size(); ++i) {
            if (!warped[i].second) continue;  // left the frame, drop from supervision
            out.sparse_keypoints.push_back({sparse_keypoints[i].src, warped[i].first});
        }
    }
    return out;
}

}  // namespace matchlab
