#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "matchlab/annotator.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/manifest.hpp"

namespace matchlab {

struct SynthSpec {
    int num_classes = 5;
    int images_per_class = 12;
    int image_size = 48;
    int keypoints_per_class = 8;
    double labeled_fraction = 1.0;  // fraction of train images whose pairs get annotations
    std::uint64_t seed = 7;

    std::string warp_family = "affine";
    double rotation_max = 0.22;  // radians
    double scale_lo = 0.85;
    double scale_hi = 1.2;
    double translation_max = 4.0;

    int val_per_class = 2;
    int test_per_class = 3;

    double photo_jitter = 0.25;  // per-image photometric variation at generation
    int texture_octaves = 3;
    int texture_blobs = 6;

    void validate() const;
};

// Exact per-image generating transforms (base texture -> image pixels).
// Any within-class pair has the closed-form relating transform
// T_tgt^{-1} then T_src, making dense ground truth exact.
struct OracleStore {
    int schema_version = 1;
    int base_size = 0;
    std::map<std::string, std::array<double, 6>> transforms;

    GeometricTransform transform(const std::string& image_id) const;
    bool has(const std::string& image_id) const { return transforms.count(image_id) > 0; }
};

// Dense ground-truth field at feature-grid resolution: per target cell the
// exact source coordinate; confidence 1 and mask 1 where that coordinate is
// inside the source image, confidence 0 / mask 0 elsewhere.
PseudoLabel oracle_field(const OracleStore& store, const std::string& src_id,
                         const std::string& tgt_id, PixelGrid src_image, PixelGrid tgt_image,
                         int stride);

void save_oracle(const OracleStore& store, const std::filesystem::path& path);
OracleStore load_oracle(const std::filesystem::path& path);

struct GeneratedDataset {
    DatasetManifest manifest;  // image paths are images/<id>.png
    std::map<std::string, ImageU8> images;
    OracleStore oracle;
};

GeneratedDataset generate_dataset(const SynthSpec& spec);

// Writes images/, manifest.json and oracle.json under out_dir.
void write_dataset(const GeneratedDataset& ds, const std::filesystem::path& out_dir);

}  // namespace matchlab
