#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "matchlab/matcher.hpp"
#include "matchlab/rng.hpp"

using namespace matchlab;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.05, 0.95));
    return img;
}

MatcherParams random_params(std::uint64_t seed, double temperature = 0.05) {
    MatcherParams p = MatcherParams::identity_init(DescriptorConfig::kRawDim, temperature, 4);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < p.projection.rows(); ++i)
        for (Eigen::Index j = 0; j < p.projection.cols(); ++j)
            p.projection(i, j) += 0.3 * rng.normal();
    return p;
}

FeatureMap make_feature_map(const Eigen::MatrixXd& descriptors, PixelGrid grid, int stride) {
    FeatureMap fm;
    fm.grid = grid;
    fm.stride = stride;
    fm.descriptors = descriptors;
    return fm;
}

}  // namespace

TEST_CASE("extract_features: constant image gives identical unit descriptors") {
    Image img(16, 16, 0.5f);
    MatcherParams params = MatcherParams::identity_init();
    FeatureMap fm = extract_features(img, params);
    REQUIRE(fm.grid.height == 4);
    REQUIRE(fm.grid.width == 4);
    for (Eigen::Index i = 0; i < fm.descriptors.cols(); ++i) {
        CHECK(std::abs(fm.descriptors.col(i).norm() - 1.0) < 1e-6);
        CHECK((fm.descriptors.col(i) - fm.descriptors.col(0)).norm() < 1e-12);
    }
}

TEST_CASE("extract_features: unit norm on arbitrary images") {
    Image img = noise_image(24, 20, 99);
    MatcherParams params = random_params(3);
    FeatureMap fm = extract_features(img, params);
    for (Eigen::Index i = 0; i < fm.descriptors.cols(); ++i) {
        CHECK(std::abs(fm.descriptors.col(i).norm() - 1.0) < 1e-6);
    }
    CHECK_THROWS_AS(extract_features(Image(2, 2, 0.1f), params), ImageTooSmall);
}

// Oracle: compute both feature maps and compare interiors cell-by-cell.
TEST_CASE("extract_features: one-stride shift moves interior cells by one") {
    const int h = 32, w = 32, s = 4;
    Image img = noise_image(h, w, 1234);
    Image shifted(h, w);
    // shift content right by exactly one stride, wrap-free fill from the original
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                shifted.at(y, x, c) = img.at(y, (x - s + w) % w, c);

    MatcherParams params = MatcherParams::identity_init();
    FeatureMap a = extract_features(img, params);
    FeatureMap b = extract_features(shifted, params);
    for (int cy = 1; cy + 1 < a.grid.height; ++cy) {
        for (int cx = 1; cx + 2 < a.grid.width; ++cx) {
            Eigen::VectorXd da = a.descriptors.col(cy * a.grid.width + cx);
            Eigen::VectorXd db = b.descriptors.col(cy * b.grid.width + cx + 1);
            CHECK((da - db).norm() < 1e-9);
        }
    }
}

TEST_CASE("correlate: self similarity and transpose symmetry") {
    Image img = noise_image(16, 16, 4);
    MatcherParams params = random_params(5);
    FeatureMap fs = extract_features(img, params);
    CorrelationMap self = correlate(fs, fs);
    for (Eigen::Index i = 0; i < self.scores.rows(); ++i) {
        CHECK(self.scores(i, i) == doctest::Approx(1.0).epsilon(1e-9));
    }
    Image img2 = noise_image(16, 16, 6);
    FeatureMap ft = extract_features(img2, params);
    CorrelationMap ab = correlate(fs, ft);
    CorrelationMap ba = correlate(ft, fs);
    CHECK((ab.scores - ba.scores.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ab.scores.minCoeff() >= -1.0 - 1e-12);
    CHECK(ab.scores.maxCoeff() <= 1.0 + 1e-12);
}

// Oracle: brute-force double loop over cells and dimensions.
TEST_CASE("correlate matches nested-loop inner product oracle") {
    Rng rng(77);
    const int d = 5;
    Eigen::MatrixXd a(d, 4), b(d, 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) {
            a(i, j) = rng.normal();
            b(i, j) = rng.normal();
        }
        a.col(j).normalize();
        b.col(j).normalize();
    }
    FeatureMap fs = make_feature_map(a, {2, 2}, 4);
    FeatureMap ft = make_feature_map(b, {2, 2}, 4);
    CorrelationMap c = correlate(fs, ft);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double expect = 0;
            for (int k = 0; k < d; ++k) expect += a(k, i) * b(k, j);
            CHECK(std::abs(c.scores(i, j) - expect) < 1e-12);
        }
    }

    FeatureMap bad = make_feature_map(Eigen::MatrixXd::Ones(d + 1, 4), {2, 2}, 4);
    CHECK_THROWS_AS(correlate(fs, bad), DimensionMismatch);
}

TEST_CASE("soft_argmax_field: peaked and uniform limits") {
    CorrelationMap c;
    c.src_grid = {2, 2};
    c.tgt_grid = {1, 1};
    c.src_stride = c.tgt_stride = 4;
    c.scores = Eigen::MatrixXd::Constant(4, 1, -10.0);
    c.scores(3, 0) = 10.0;  // cell (1,1), center (5.5, 5.5)
    MatchField peaked = soft_argmax_field(c, 0.1);
    CHECK(std::abs(peaked.coords[0].x - 5.5) < 1e-3);
    CHECK(std::abs(peaked.coords[0].y - 5.5) < 1e-3);
    CHECK(peaked.confidence[0] > 0.999);

    c.scores = Eigen::MatrixXd::Constant(4, 1, 0.31);
    MatchField uniform = soft_argmax_field(c, 0.1);
    // centroid of centers (1.5,1.5),(5.5,1.5),(1.5,5.5),(5.5,5.5)
    CHECK(uniform.coords[0].x == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(uniform.coords[0].y == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(uniform.confidence[0] == doctest::Approx(0.25).epsilon(1e-12));
}

// Oracle: direct softmax-expectation computation, separate code path.
TEST_CASE("soft_argmax_field matches expectation oracle on random 3x3 maps") {
    Rng rng(31);
    CorrelationMap c;
    c.src_grid = {3, 3};
    c.tgt_grid = {3, 3};
    c.src_stride = c.tgt_stride = 4;
    c.scores.resize(9, 9);
    for (Eigen::Index i = 0; i < 81; ++i) c.scores(i / 9, i % 9) = rng.uniform(-1, 1);
    const double beta = 0.07;
    MatchField field = soft_argmax_field(c, beta);

    for (int j = 0; j < 9; ++j) {
        double z = 0;
        for (int i = 0; i < 9; ++i) z += std::exp(c.scores(i, j) / beta);
        double ex = 0, ey = 0, best = 0, wsum = 0;
        for (int i = 0; i < 9; ++i) {
            double w = std::exp(c.scores(i, j) / beta) / z;
            wsum += w;
            double cx = (i % 3) * 4 + 1.5;
            double cy = (i / 3) * 4 + 1.5;
            ex += w * cx;
            ey += w * cy;
            best = std::max(best, w);
        }
        CHECK(std::abs(wsum - 1.0) < 1e-9);
        CHECK(std::abs(field.coords[static_cast<std::size_t>(j)].x - ex) < 1e-10);
        CHECK(std::abs(field.coords[static_cast<std::size_t>(j)].y - ey) < 1e-10);
        CHECK(std::abs(field.confidence[static_cast<std::size_t>(j)] - best) < 1e-10);
        CHECK(field.confidence[static_cast<std::size_t>(j)] >= 1.0 / 9 - 1e-12);
    }
}

TEST_CASE("soft_argmax coordinates stay in the source hull") {
    Image a = noise_image(20, 24, 8);
    Image b = noise_image(20, 24, 9);
    MatcherParams params = random_params(10, 0.02);
    MatchField field = match_field(params, a, b);
    // hull of source cell centers: [1.5, 4*w-1-2.5] x ...
    const double half = 1.5;
    for (const Point2& p : field.coords) {
        CHECK(p.x >= half - 1e-9);
        CHECK(p.x <= 4.0 * 6 - 4 + half + 1e-9);
        CHECK(p.y >= half - 1e-9);
        CHECK(p.y <= 4.0 * 5 - 4 + half + 1e-9);
    }
}

TEST_CASE("transfer_keypoints: constant field, cell centers, midpoint rule") {
    MatchField field;
    field.tgt_grid = {2, 2};
    field.tgt_stride = 4;
    field.coords = {{10, 10}, {10, 10}, {10, 10}, {10, 10}};
    field.confidence = {0.5, 0.5, 0.5, 0.5};
    PixelGrid img{8, 8};
    auto out = transfer_keypoints(field, {{0, 0}, {3.2, 6.9}, {7, 7}}, img);
    for (const Point2& p : out) {
        CHECK(p.x == doctest::Approx(10.0));
        CHECK(p.y == doctest::Approx(10.0));
    }

    field.coords = {{0, 0}, {4, 0}, {2, 8}, {6, 8}};
    // cell centers at (1.5,1.5), (5.5,1.5), ...
    auto centers = transfer_keypoints(field, {{1.5, 1.5}, {5.5, 1.5}}, img);
    CHECK(centers[0].x == doctest::Approx(0.0));
    CHECK(centers[1].x == doctest::Approx(4.0));
    auto mid = transfer_keypoints(field, {{3.5, 1.5}}, img);
    CHECK(mid[0].x == doctest::Approx(2.0));
    CHECK(mid[0].y == doctest::Approx(0.0));

    CHECK_THROWS_AS(transfer_keypoints(field, {{-1, 0}}, img), OutOfBounds);
}

TEST_CASE("loss_and_grad: fixed point has zero loss and vanishing gradient") {
    Image src = noise_image(16, 16, 21);
    Image tgt = noise_image(16, 16, 22);
    MatcherParams params = random_params(23);
    MatchField field = match_field(params, src, tgt);

    DenseSupervision dense;
    dense.coords = field.coords;
    dense.mask.assign(field.cells(), 1);
    LossResult r = loss_and_grad(params, src, tgt, dense);
    CHECK(r.loss == 0.0);
    CHECK(r.grad.cwiseAbs().maxCoeff() < 1e-8);

    std::vector<Point2> tgt_pts{{3.0, 4.0}, {9.5, 7.25}};
    auto preds = transfer_keypoints(field, tgt_pts, tgt.grid());
    SparseSupervision sparse;
    sparse.entries = {{preds[0], tgt_pts[0]}, {preds[1], tgt_pts[1]}};
    LossResult rs = loss_and_grad(params, src, tgt, sparse);
    CHECK(rs.loss < 1e-18);
    CHECK(rs.grad.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("loss_and_grad: masked entries contribute nothing") {
    Image src = noise_image(16, 16, 31);
    Image tgt = noise_image(16, 16, 32);
    MatcherParams params = random_params(33);

    SparseSupervision both;
    both.entries = {{{2.0, 3.0}, {4.0, 5.0}}, {{8.0, 9.0}, {10.0, 11.0}}};
    both.mask = {1, 0};
    SparseSupervision only_a;
    only_a.entries = {both.entries[0]};

    LossResult r_both = loss_and_grad(params, src, tgt, both);
    LossResult r_a = loss_and_grad(params, src, tgt, only_a);
    CHECK(r_both.loss == doctest::Approx(r_a.loss).epsilon(1e-15));
    CHECK((r_both.grad - r_a.grad).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(r_both.used_entries == 1);

    SparseSupervision none;
    none.entries = both.entries;
    none.mask = {0, 0};
    CHECK_THROWS_AS(loss_and_grad(params, src, tgt, none), EmptySupervision);
}

TEST_CASE("loss_and_grad: permutation invariance and weight scaling") {
    Image src = noise_image(16, 16, 41);
    Image tgt = noise_image(16, 16, 42);
    MatcherParams params = random_params(43);
    SparseSupervision fwd;
    fwd.entries = {{{2, 3}, {4, 5}}, {{8, 9}, {10, 11}}, {{5, 5}, {6, 6}}};
    SparseSupervision rev;
    rev.entries = {fwd.entries[2], fwd.entries[0], fwd.entries[1]};
    LossResult a = loss_and_grad(params, src, tgt, fwd);
    LossResult b = loss_and_grad(params, src, tgt, rev);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() < 1e-12);

    LossResult half = loss_and_grad(params, src, tgt, fwd, 0.5);
    CHECK(half.loss == doctest::Approx(0.5 * a.loss).epsilon(1e-14));
    CHECK((half.grad - 0.5 * a.grad).cwiseAbs().maxCoeff() < 1e-14);
}

// Oracle: central finite differences over every projection entry, written
// here independently of the library's own grad_check.
TEST_CASE("loss_and_grad gradient matches finite differences") {
    Rng rng(55);
    for (int trial = 0; trial < 4; ++trial) {
        Image src = noise_image(16, 16, 100 + static_cast<std::uint64_t>(trial));
        Image tgt = noise_image(16, 16, 200 + static_cast<std::uint64_t>(trial));
        MatcherParams params = random_params(300 + static_cast<std::uint64_t>(trial), 0.05);

        Supervision sup;
        if (trial % 2 == 0) {
            SparseSupervision sparse;
            for (int k = 0; k < 4; ++k) {
                sparse.entries.push_back(
                    {{rng.uniform(1, 14), rng.uniform(1, 14)}, {rng.uniform(1, 14), rng.uniform(1, 14)}});
            }
            sup = sparse;
        } else {
            DenseSupervision dense;
            dense.coords.resize(16);
            dense.mask.assign(16, 1);
            for (auto& p : dense.coords) p = {rng.uniform(0, 15), rng.uniform(0, 15)};
            dense.mask[2] = 0;
            sup = dense;
        }

        LossResult analytic = loss_and_grad(params, src, tgt, sup);
        const double eps = 1e-4;
        double max_rel = 0;
        MatcherParams probe = params;
        for (Eigen::Index i = 0; i < params.projection.rows(); ++i) {
            for (Eigen::Index j = 0; j < params.projection.cols(); ++j) {
                const double saved = probe.projection(i, j);
                probe.projection(i, j) = saved + eps;
                double up = loss_and_grad(probe, src, tgt, sup).loss;
                probe.projection(i, j) = saved - eps;
                double down = loss_and_grad(probe, src, tgt, sup).loss;
                probe.projection(i, j) = saved;
                double fd = (up - down) / (2 * eps);
                double an = analytic.grad(i, j);
                double scale = std::max(std::abs(fd), std::abs(an));
                if (scale < 1e-8) continue;
                max_rel = std::max(max_rel, std::abs(fd - an) / scale);
            }
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("checkpoint round trip is exact") {
    MatcherParams params = random_params(91, 0.037);
    auto tmp = std::filesystem::temp_directory_path() / "matchlab_test_ckpt.bin";
    save_params(params, tmp, {{"note", "unit-test"}});
    MatcherParams loaded = load_params(tmp);
    CHECK(loaded.temperature == params.temperature);
    CHECK(loaded.descriptor.stride == params.descriptor.stride);
    CHECK((loaded.projection - params.projection).cwiseAbs().maxCoeff() == 0.0);
    CHECK(params_fingerprint(loaded) == params_fingerprint(params));
    std::filesystem::remove(tmp);
    std::filesystem::remove(tmp.string() + ".meta.txt");
}
