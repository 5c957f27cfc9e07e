#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchlab/image.hpp"
#include "matchlab/types.hpp"

namespace matchlab {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Axis-aligned box in pixel coordinates, inclusive corners.
struct BBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

struct ImageRecord {
    std::string id;
    std::string path;  // relative to the manifest's directory
    std::string class_id;
    Split split = Split::train;
    int width = 0;
    int height = 0;
    std::optional<BBox> bbox;
};

struct KeypointPair {
    Point2 src;
    Point2 tgt;
};

// Difficulty tags. viewpoint/scale in {easy, medi, hard};
// truncation/occlusion in {none, src, tgt, both}.
struct VariationTags {
    std::string viewpoint = "easy";
    std::string scale = "easy";
    std::string truncation = "none";
    std::string occlusion = "none";
};

struct AnnotatedPair {
    std::string src_id;
    std::string tgt_id;
    std::vector<KeypointPair> keypoints;
    VariationTags tags;
};

struct DatasetManifest {
    int schema_version = 1;
    std::vector<std::string> classes;
    std::vector<std::string> excluded_classes;
    std::vector<ImageRecord> images;
    std::vector<AnnotatedPair> pairs;

    // Set for manifests produced by build_corrupted_set: image paths become
    // <corruption_root>/<kind>/<severity>/<id>.<ext> for each variant.
    std::string corruption_root;
    std::uint64_t corruption_seed = 0;

    const ImageRecord& image(const std::string& id) const;
    bool has_image(const std::string& id) const;
    std::vector<const ImageRecord*> images_in(const std::string& class_id, Split split) const;

    // Structural checks: referenced ids exist, pair endpoints share a class
    // and split, keypoints in bounds, no duplicate ids.
    void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

// Images decoded once up front; lookups afterwards are read-only.
struct LoadedDataset {
    DatasetManifest manifest;
    std::filesystem::path root;  // directory of the manifest file
    std::map<std::string, ImageU8> images;

    const ImageU8& image(const std::string& id) const;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace matchlab
