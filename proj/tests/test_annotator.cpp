#include <doctest.h>

#include <cmath>

#include "matchlab/annotator.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/synthetic.hpp"

using namespace matchlab;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.05, 0.95));
    return img;
}

MatcherParams teacher_params(std::uint64_t seed) {
    MatcherParams p = MatcherParams::identity_init(DescriptorConfig::kRawDim, 0.05, 4);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < p.projection.rows(); ++i)
        for (Eigen::Index j = 0; j < p.projection.cols(); ++j)
            p.projection(i, j) += 0.2 * rng.normal();
    return p;
}

}  // namespace

TEST_CASE("annotate_pair: threshold limits and the recount oracle") {
    Image src = noise_image(24, 24, 1);
    Image tgt = noise_image(24, 24, 2);
    MatcherParams teacher = teacher_params(3);

    PseudoLabel all = annotate_pair(teacher, src, tgt, 0.0);
    for (auto m : all.mask) CHECK(m == 1);  // confidences strictly positive

    PseudoLabel none = annotate_pair(teacher, src, tgt, 1.0);
    for (auto m : none.mask) CHECK(m == 0);  // confidence <= 1

    // recount oracle: scan the saved confidence array independently
    PseudoLabel label = annotate_pair(teacher, src, tgt, 0.7);
    std::size_t recount = 0;
    for (double c : label.field.confidence)
        if (c > 0.7) ++recount;
    CHECK(label.retained() == recount);
    for (std::size_t i = 0; i < label.mask.size(); ++i) {
        CHECK(label.mask[i] == (label.field.confidence[i] > 0.7 ? 1 : 0));
    }
}

TEST_CASE("annotate_pair: mask monotone in tau, deterministic") {
    Image src = noise_image(24, 24, 5);
    Image tgt = noise_image(24, 24, 6);
    MatcherParams teacher = teacher_params(7);

    std::size_t prev = SIZE_MAX;
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        PseudoLabel label = annotate_pair(teacher, src, tgt, tau);
        CHECK(label.retained() <= prev);
        prev = label.retained();
    }

    PseudoLabel a = annotate_pair(teacher, src, tgt, 0.4);
    PseudoLabel b = annotate_pair(teacher, src, tgt, 0.4);
    CHECK(a.field.coords.size() == b.field.coords.size());
    for (std::size_t i = 0; i < a.field.coords.size(); ++i) {
        CHECK(a.field.coords[i].x == b.field.coords[i].x);
        CHECK(a.field.coords[i].y == b.field.coords[i].y);
        CHECK(a.field.confidence[i] == b.field.confidence[i]);
        CHECK(a.mask[i] == b.mask[i]);
    }
}

TEST_CASE("mask subsets are cellwise monotone across tau") {
    Image src = noise_image(20, 28, 15);
    Image tgt = noise_image(20, 28, 16);
    MatcherParams teacher = teacher_params(17);
    PseudoLabel lo = annotate_pair(teacher, src, tgt, 0.3);
    PseudoLabel hi = annotate_pair(teacher, src, tgt, 0.6);
    for (std::size_t i = 0; i < lo.mask.size(); ++i) {
        if (hi.mask[i]) CHECK(lo.mask[i]);  // M(tau2) subset of M(tau1) for tau1 <= tau2
    }
}

TEST_CASE("warp_pseudo_label: identity transform is the identity") {
    Image src = noise_image(24, 24, 21);
    Image tgt = noise_image(24, 24, 22);
    MatcherParams teacher = teacher_params(23);
    PseudoLabel label = annotate_pair(teacher, src, tgt, 0.5);

    PseudoLabel same = warp_pseudo_label(label, GeometricTransform::identity(), tgt.grid());
    REQUIRE(same.field.coords.size() == label.field.coords.size());
    for (std::size_t i = 0; i < label.field.coords.size(); ++i) {
        CHECK(std::abs(same.field.coords[i].x - label.field.coords[i].x) < 1e-9);
        CHECK(std::abs(same.field.coords[i].y - label.field.coords[i].y) < 1e-9);
        CHECK(same.mask[i] == label.mask[i]);
    }
}

TEST_CASE("warp_pseudo_label: integer cell translation shifts the field") {
    Image src = noise_image(32, 32, 31);
    Image tgt = noise_image(32, 32, 32);
    MatcherParams teacher = teacher_params(33);
    PseudoLabel label = annotate_pair(teacher, src, tgt, 0.0);
    const int stride = label.field.tgt_stride;
    const int w = label.field.tgt_grid.width;
    const int h = label.field.tgt_grid.height;

    // shift the target content right by exactly 2 cells
    const int cells = 2;
    PseudoLabel shifted = warp_pseudo_label(
        label, GeometricTransform::translation(cells * stride, 0), tgt.grid());

    for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            std::size_t j = static_cast<std::size_t>(cy) * w + cx;
            if (cx < cells) {
                CHECK(shifted.mask[j] == 0);  // vacated cells masked out
                continue;
            }
            std::size_t from = static_cast<std::size_t>(cy) * w + (cx - cells);
            CHECK(std::abs(shifted.field.coords[j].x - label.field.coords[from].x) < 1e-9);
            CHECK(std::abs(shifted.field.coords[j].y - label.field.coords[from].y) < 1e-9);
        }
    }
}

// Oracle consistency: warping the exact ground-truth label of a synthetic
// pair must agree with the ground-truth label of the warped pair.
TEST_CASE("warp_pseudo_label agrees with the oracle flow of the warped pair") {
    SynthSpec spec;
    spec.num_classes = 1;
    spec.images_per_class = 4;
    spec.image_size = 48;
    spec.seed = 99;
    spec.val_per_class = 1;
    spec.test_per_class = 1;
    GeneratedDataset ds = generate_dataset(spec);

    const std::string src_id = "c00_i00";
    const std::string tgt_id = "c00_i01";
    const PixelGrid grid{spec.image_size, spec.image_size};
    const int stride = 4;

    PseudoLabel oracle = oracle_field(ds.oracle, src_id, tgt_id, grid, grid, stride);

    Rng rng(5);
    double worst_mean = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        GeometricTransform warp = GeometricTransform::similarity(
            rng.uniform(-0.3, 0.3), rng.uniform(0.85, 1.15),
            {grid.width / 2.0, grid.height / 2.0}, {rng.uniform(-3, 3), rng.uniform(-3, 3)});

        PseudoLabel warped = warp_pseudo_label(oracle, warp, grid);

        // ground truth of the warped pair: x_src = T_src(T_tgt^{-1}(W^{-1}(x)))
        GeometricTransform t_src = ds.oracle.transform(src_id);
        GeometricTransform t_tgt_aug =
            compose_affine(warp, ds.oracle.transform(tgt_id));
        GeometricTransform rel = compose_affine(t_src, invert_affine(t_tgt_aug));

        double total = 0;
        int count = 0;
        const double half = (stride - 1) / 2.0;
        for (int cy = 0; cy < warped.field.tgt_grid.height; ++cy) {
            for (int cx = 0; cx < warped.field.tgt_grid.width; ++cx) {
                std::size_t j = static_cast<std::size_t>(cy) * warped.field.tgt_grid.width + cx;
                if (!warped.mask[j]) continue;
                Point2 center{cx * stride + half, cy * stride + half};
                Point2 expect = apply_transform(rel, center);
                if (!grid.contains(expect)) continue;
                total += norm(warped.field.coords[j] - expect);
                ++count;
            }
        }
        REQUIRE(count > 0);
        worst_mean = std::max(worst_mean, total / count);
    }
    CHECK(worst_mean < 0.5);
}
