#include <doctest.h>

#include <fstream>

#include "matchlab/corruption.hpp"
#include "matchlab/image_io.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/synthetic.hpp"

using namespace matchlab;

namespace {

ImageU8 fixture_image(int h = 32, int w = 32, std::uint64_t seed = 5) {
    Rng rng(seed);
    ImageU8 img(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::uint8_t* p = img.pixel(y, x);
            // content at several spatial scales so each larger blur kernel
            // still finds structure left to destroy
            int coarse = ((x / 16 + y / 16) % 2) * 90;
            int mid = ((x / 8 + y / 8) % 2) * 60;
            int fine = ((x / 3 + y / 3) % 2) * 40;
            int grad = (x * 120) / w;
            p[0] = static_cast<std::uint8_t>(
                std::clamp(coarse + fine + rng.uniform_int(50), 0, 255));
            p[1] = static_cast<std::uint8_t>(
                std::clamp(mid + grad + rng.uniform_int(50), 0, 255));
            p[2] = static_cast<std::uint8_t>(
                std::clamp(coarse + mid + fine - grad + rng.uniform_int(50), 0, 255));
        }
    }
    return img;
}

std::uint64_t file_hash(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a(bytes);
}

}  // namespace

TEST_CASE("corrupt is deterministic and total over the 15x5 grid") {
    ImageU8 img = fixture_image();
    for (CorruptionKind kind : all_corruption_kinds()) {
        for (int sev = 1; sev <= 5; ++sev) {
            CorruptionSpec spec{kind, sev, 42};
            ImageU8 a = corrupt(img, spec);
            ImageU8 b = corrupt(img, spec);
            CHECK(a == b);
            CHECK(a.height == img.height);
            CHECK(a.width == img.width);
            CHECK(a != img);  // every kind visibly alters the fixture
        }
    }
    CHECK(all_corruption_kinds().size() == kNumCorruptionKinds);

    CHECK_THROWS_AS(corrupt(img, {CorruptionKind::fog, 0, 1}), InvalidSeverity);
    CHECK_THROWS_AS(corrupt(img, {CorruptionKind::fog, 6, 1}), InvalidSeverity);
    CHECK_THROWS_AS(corruption_kind_from_string("motion_blur"), UnsupportedKind);
    CHECK(corruption_kind_from_string("gaussian_blur") == CorruptionKind::gaussian_blur);
}

TEST_CASE("noise and blur families degrade PSNR strictly with severity") {
    ImageU8 img = fixture_image(128, 128, 9);
    for (CorruptionKind kind :
         {CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::impulse_noise,
          CorruptionKind::speckle_noise, CorruptionKind::defocus_blur,
          CorruptionKind::gaussian_blur}) {
        double prev = 1e9;
        for (int sev = 1; sev <= 5; ++sev) {
            double v = psnr(img, corrupt(img, {kind, sev, 7}));
            CHECK(v < prev);
            prev = v;
        }
    }
}

// Oracle: independent two-pass resample (box average down, nearest up),
// different loop structure from the implementation.
TEST_CASE("pixelate equals the two-pass resample oracle") {
    ImageU8 img = fixture_image(40, 40, 11);
    for (int sev = 1; sev <= 5; ++sev) {
        const double factors[5] = {0.6, 0.5, 0.4, 0.3, 0.25};
        const double c = factors[sev - 1];
        const int dw = std::max(1, static_cast<int>(img.width * c));
        const int dh = std::max(1, static_cast<int>(img.height * c));

        // pass 1: box average over each output cell's exact footprint
        std::vector<double> down(static_cast<std::size_t>(dh) * dw * 3, 0.0);
        std::vector<double> area(static_cast<std::size_t>(dh) * dw, 0.0);
        for (int sy = 0; sy < dh; ++sy) {
            const double top = sy * img.height / static_cast<double>(dh);
            const double bottom = (sy + 1) * img.height / static_cast<double>(dh);
            for (int sx = 0; sx < dw; ++sx) {
                const double left = sx * img.width / static_cast<double>(dw);
                const double right = (sx + 1) * img.width / static_cast<double>(dw);
                std::size_t cell = static_cast<std::size_t>(sy) * dw + sx;
                for (int y = static_cast<int>(top); y < bottom; ++y) {
                    const double oy = std::min<double>(y + 1, bottom) - std::max<double>(y, top);
                    if (oy <= 0) continue;
                    for (int x = static_cast<int>(left); x < right; ++x) {
                        const double ox =
                            std::min<double>(x + 1, right) - std::max<double>(x, left);
                        if (ox <= 0) continue;
                        area[cell] += oy * ox;
                        for (int ch = 0; ch < 3; ++ch)
                            down[cell * 3 + ch] +=
                                oy * ox * (img.pixel(y, x)[ch] / 255.0f);
                    }
                }
            }
        }
        // pass 2: nearest upsample + quantize
        ImageU8 expect(img.height, img.width);
        for (int y = 0; y < img.height; ++y) {
            int sy = std::min(dh - 1, y * dh / img.height);
            for (int x = 0; x < img.width; ++x) {
                int sx = std::min(dw - 1, x * dw / img.width);
                std::size_t cell = static_cast<std::size_t>(sy) * dw + sx;
                for (int ch = 0; ch < 3; ++ch) {
                    float v = static_cast<float>(down[cell * 3 + ch] / area[cell]);
                    expect.pixel(y, x)[ch] = static_cast<std::uint8_t>(
                        std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
                }
            }
        }

        ImageU8 got = corrupt(img, {CorruptionKind::pixelate, sev, 0});
        CHECK(got == expect);
    }
}

TEST_CASE("jpeg corruption is a quality-table re-encode") {
    ImageU8 img = fixture_image(32, 32, 13);
    ImageU8 q1 = corrupt(img, {CorruptionKind::jpeg, 1, 0});
    ImageU8 q5 = corrupt(img, {CorruptionKind::jpeg, 5, 0});
    CHECK(psnr(img, q5) < psnr(img, q1));  // quality 7 hurts more than 25
}

TEST_CASE("build_corrupted_set writes 75 variants and a label-preserving manifest") {
    SynthSpec spec;
    spec.num_classes = 1;
    spec.images_per_class = 4;
    spec.image_size = 32;
    spec.val_per_class = 1;
    spec.test_per_class = 2;
    spec.seed = 77;
    GeneratedDataset gen = generate_dataset(spec);
    LoadedDataset clean;
    clean.manifest = gen.manifest;
    clean.images = gen.images;

    auto out_dir = std::filesystem::temp_directory_path() / "matchlab_corrupted";
    std::filesystem::remove_all(out_dir);
    DatasetManifest derived = build_corrupted_set(clean, out_dir, 123, 2);

    // 2 test images x 75 variants
    std::size_t files = 0;
    for (CorruptionKind kind : all_corruption_kinds()) {
        for (int sev = 1; sev <= 5; ++sev) {
            for (const auto& rec : derived.images) {
                const std::string ext = kind == CorruptionKind::jpeg ? ".jpg" : ".png";
                auto p = out_dir / to_string(kind) / std::to_string(sev) / (rec.id + ext);
                CHECK(std::filesystem::exists(p));
                ++files;
            }
        }
    }
    CHECK(files == 2 * 75);
    CHECK(derived.images.size() == 2);

    // keypoints byte-equal: doubles copied bit-exactly from the clean manifest
    std::size_t checked = 0;
    for (const auto& pair : derived.pairs) {
        for (const auto& clean_pair : clean.manifest.pairs) {
            if (clean_pair.src_id != pair.src_id || clean_pair.tgt_id != pair.tgt_id) continue;
            REQUIRE(pair.keypoints.size() == clean_pair.keypoints.size());
            for (std::size_t k = 0; k < pair.keypoints.size(); ++k) {
                CHECK(pair.keypoints[k].src.x == clean_pair.keypoints[k].src.x);
                CHECK(pair.keypoints[k].src.y == clean_pair.keypoints[k].src.y);
                CHECK(pair.keypoints[k].tgt.x == clean_pair.keypoints[k].tgt.x);
                CHECK(pair.keypoints[k].tgt.y == clean_pair.keypoints[k].tgt.y);
            }
            ++checked;
        }
    }
    CHECK(checked == derived.pairs.size());

    // regeneration with the same seed reproduces identical bytes
    auto probe = out_dir / "gaussian_noise" / "3" / (derived.images[0].id + ".png");
    std::uint64_t first = file_hash(probe);
    auto out_dir2 = std::filesystem::temp_directory_path() / "matchlab_corrupted2";
    std::filesystem::remove_all(out_dir2);
    build_corrupted_set(clean, out_dir2, 123, 1);  // different worker count on purpose
    CHECK(file_hash(out_dir2 / "gaussian_noise" / "3" / (derived.images[0].id + ".png")) == first);

    // slice loader finds every image
    auto slice = load_corrupted_slice(derived, out_dir, CorruptionKind::fog, 2);
    CHECK(slice.size() == 2);

    std::filesystem::remove_all(out_dir);
    std::filesystem::remove_all(out_dir2);
}

TEST_CASE("robustness report arithmetic is internally consistent") {
    std::map<std::string, std::array<double, kNumSeverities>> cells;
    Rng rng(3);
    for (CorruptionKind kind : all_corruption_kinds()) {
        auto& row = cells[to_string(kind)];
        for (auto& v : row) v = rng.uniform(0.2, 0.9);
    }
    RobustnessReport report = robustness_report_from_cells(cells, 0.93, {0.1, PckNorm::bbox});

    double total = 0;
    for (const auto& [kind, row] : cells) {
        double sum = 0;
        for (double v : row) sum += v;
        CHECK(std::abs(report.kind_avg.at(kind) - sum / 5.0) < 1e-9);
        total += sum;
    }
    CHECK(std::abs(report.corrupted_avg - total / 75.0) < 1e-9);
    for (int s = 0; s < kNumSeverities; ++s) {
        double col = 0;
        for (const auto& [kind, row] : cells) col += row[static_cast<std::size_t>(s)];
        CHECK(std::abs(report.severity_avg[static_cast<std::size_t>(s)] - col / 15.0) < 1e-9);
    }

    // injected perfect predictions: every cell 1.0
    for (auto& [kind, row] : cells) row.fill(1.0);
    RobustnessReport perfect = robustness_report_from_cells(cells, 1.0, {0.1, PckNorm::bbox});
    CHECK(perfect.corrupted_avg == 1.0);
    CHECK(perfect.severity_avg[0] == 1.0);

    auto tmp = std::filesystem::temp_directory_path() / "matchlab_robustness.csv";
    save_robustness_csv(report, tmp);
    std::ifstream f(tmp);
    std::string header;
    std::getline(f, header);
    CHECK(header.rfind("severity,gaussian_noise", 0) == 0);
    int rows = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6);  // severities 1..5 + avg
    std::filesystem::remove(tmp);
}
