#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "matchlab/eval.hpp"
#include "matchlab/pair_engine.hpp"
#include "matchlab/synthetic.hpp"

using namespace matchlab;

namespace {

SynthSpec small_spec() {
    SynthSpec spec;
    spec.num_classes = 3;
    spec.images_per_class = 10;
    spec.image_size = 48;
    spec.keypoints_per_class = 6;
    spec.val_per_class = 0;
    spec.test_per_class = 0;
    spec.seed = 1234;
    return spec;
}

}  // namespace

TEST_CASE("generate_dataset: single image per class means zero pairs") {
    SynthSpec spec = small_spec();
    spec.num_classes = 2;
    spec.images_per_class = 1;
    GeneratedDataset ds = generate_dataset(spec);
    for (const auto& cls : ds.manifest.classes) {
        CHECK(enumerate_pairs(ds.manifest, cls).size() == 0);
    }
    CHECK(ds.manifest.pairs.empty());
}

TEST_CASE("generate_dataset is bit-deterministic in spec and seed") {
    GeneratedDataset a = generate_dataset(small_spec());
    GeneratedDataset b = generate_dataset(small_spec());
    REQUIRE(a.images.size() == b.images.size());
    for (const auto& [id, img] : a.images) {
        CHECK(img == b.images.at(id));
    }
    CHECK(a.manifest.pairs.size() == b.manifest.pairs.size());
    CHECK(a.oracle.transforms == b.oracle.transforms);

    SynthSpec other = small_spec();
    other.seed = 4321;
    GeneratedDataset c = generate_dataset(other);
    CHECK(c.images.at("c00_i00") != a.images.at("c00_i00"));
}

TEST_CASE("pair universe counts follow n(n-1) on the generated manifest") {
    GeneratedDataset ds = generate_dataset(small_spec());  // 3 classes x 10 train images
    std::size_t total = 0;
    for (const auto& cls : ds.manifest.classes) {
        PairSet u = enumerate_pairs(ds.manifest, cls);
        CHECK(u.size() == 10 * 9);
        total += u.size();
    }
    CHECK(total == 270);
}

TEST_CASE("oracle_field: self pair is the identity field") {
    GeneratedDataset ds = generate_dataset(small_spec());
    const PixelGrid grid{48, 48};
    PseudoLabel self = oracle_field(ds.oracle, "c00_i02", "c00_i02", grid, grid, 4);
    const double half = 1.5;
    for (int cy = 0; cy < self.field.tgt_grid.height; ++cy) {
        for (int cx = 0; cx < self.field.tgt_grid.width; ++cx) {
            std::size_t j = static_cast<std::size_t>(cy) * self.field.tgt_grid.width + cx;
            CHECK(std::abs(self.field.coords[j].x - (cx * 4 + half)) < 1e-9);
            CHECK(std::abs(self.field.coords[j].y - (cy * 4 + half)) < 1e-9);
            CHECK(self.mask[j] == 1);
        }
    }
    CHECK_THROWS_AS(oracle_field(ds.oracle, "c00_i00", "nope", grid, grid, 4), UnknownPair);
}

TEST_CASE("oracle field transfers GT keypoints onto their pairs") {
    GeneratedDataset ds = generate_dataset(small_spec());
    const PixelGrid grid{48, 48};
    int checked = 0;
    for (const auto& pair : ds.manifest.pairs) {
        if (checked >= 12) break;
        PseudoLabel oracle = oracle_field(ds.oracle, pair.src_id, pair.tgt_id, grid, grid, 4);
        std::vector<Point2> tgt_pts, gt_src;
        for (const auto& kp : pair.keypoints) {
            tgt_pts.push_back(kp.tgt);
            gt_src.push_back(kp.src);
        }
        auto preds = transfer_keypoints(oracle.field, tgt_pts, grid);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            CHECK(norm(preds[k] - gt_src[k]) < 0.5);
        }
        // oracle perfection at the benchmark tolerance
        PckSpec spec{0.1, PckNorm::img};
        CHECK(pck(preds, gt_src, spec, 48, 48) == 1.0);
        ++checked;
    }
    CHECK(checked > 0);
}

// Composition invariant: relating transforms chain exactly through a middle
// image, within half a pixel on in-bounds cells.
TEST_CASE("oracle transforms compose consistently") {
    GeneratedDataset ds = generate_dataset(small_spec());
    const PixelGrid grid{48, 48};
    const int stride = 4;
    PseudoLabel ab = oracle_field(ds.oracle, "c01_i00", "c01_i01", grid, grid, stride);
    PseudoLabel bc = oracle_field(ds.oracle, "c01_i01", "c01_i02", grid, grid, stride);
    PseudoLabel ac = oracle_field(ds.oracle, "c01_i00", "c01_i02", grid, grid, stride);

    // oracle(a->c) composed check: field_ac(cell) == field_ab evaluated at
    // field_bc(cell). The hop through b interpolates ab's field, which is
    // bilinear-exact only between the outermost cell centers, so border
    // landings are skipped.
    const double inner = stride;
    int checked = 0;
    for (int cy = 0; cy < ac.field.tgt_grid.height; ++cy) {
        for (int cx = 0; cx < ac.field.tgt_grid.width; ++cx) {
            std::size_t j = static_cast<std::size_t>(cy) * ac.field.tgt_grid.width + cx;
            if (!ac.mask[j] || !bc.mask[j]) continue;
            Point2 via_b = bc.field.coords[j];  // c -> b
            if (via_b.x < inner || via_b.y < inner || via_b.x > grid.width - 1 - inner ||
                via_b.y > grid.height - 1 - inner) {
                continue;
            }
            auto hops = transfer_keypoints(ab.field, {via_b}, grid);  // b -> a
            CHECK(norm(hops[0] - ac.field.coords[j]) < 0.5);
            ++checked;
        }
    }
    CHECK(checked > 10);
}

TEST_CASE("labeled fraction partitions train pairs within rounding") {
    SynthSpec spec = small_spec();
    spec.val_per_class = 2;
    spec.test_per_class = 2;  // 6 train images per class
    spec.labeled_fraction = 0.5;
    GeneratedDataset ds = generate_dataset(spec);

    PairSet labeled = labeled_pairs(ds.manifest);
    // ceil(0.5 * 6) = 3 labeled images per class, so at most 3*2 ordered
    // pairs each (pairs whose keypoints all leave the frame are skipped)
    CHECK(labeled.size() <= static_cast<std::size_t>(6 * spec.num_classes));
    CHECK(labeled.size() >= static_cast<std::size_t>(2 * spec.num_classes));

    std::map<std::string, std::set<std::string>> labeled_imgs_per_class;
    for (const auto& p : labeled.pairs) {
        labeled_imgs_per_class[ds.manifest.image(p.src_id).class_id].insert(p.src_id);
        labeled_imgs_per_class[ds.manifest.image(p.tgt_id).class_id].insert(p.tgt_id);
    }
    for (const auto& [cls, imgs] : labeled_imgs_per_class) {
        CHECK(imgs.size() <= 3);  // the image partition honors the fraction
    }
}

TEST_CASE("annotated keypoints are in bounds on both sides, tags populated") {
    SynthSpec spec = small_spec();
    spec.val_per_class = 2;
    spec.test_per_class = 2;
    GeneratedDataset ds = generate_dataset(spec);
    const PixelGrid grid{48, 48};
    std::set<std::string> viewpoints;
    for (const auto& pair : ds.manifest.pairs) {
        REQUIRE(!pair.keypoints.empty());
        for (const auto& kp : pair.keypoints) {
            CHECK(grid.contains(kp.src));
            CHECK(grid.contains(kp.tgt));
        }
        viewpoints.insert(pair.tags.viewpoint);
        CHECK((pair.tags.truncation == "none" || pair.tags.truncation == "src" ||
               pair.tags.truncation == "tgt" || pair.tags.truncation == "both"));
    }
    CHECK(viewpoints.size() >= 2);  // difficulty buckets actually vary
}

TEST_CASE("dataset writes and reloads through the standard formats") {
    SynthSpec spec = small_spec();
    spec.num_classes = 1;
    spec.images_per_class = 3;
    GeneratedDataset ds = generate_dataset(spec);
    auto dir = std::filesystem::temp_directory_path() / "matchlab_synth_roundtrip";
    std::filesystem::remove_all(dir);
    write_dataset(ds, dir);

    LoadedDataset loaded = load_dataset(dir / "manifest.json");
    CHECK(loaded.manifest.images.size() == ds.manifest.images.size());
    CHECK(loaded.image("c00_i00") == ds.images.at("c00_i00"));

    OracleStore oracle = load_oracle(dir / "oracle.json");
    CHECK(oracle.transforms == ds.oracle.transforms);
    std::filesystem::remove_all(dir);
}
