#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matchlab/eval.hpp"
#include "matchlab/manifest.hpp"

namespace matchlab {

enum class CorruptionKind {
    gaussian_noise,
    shot_noise,
    impulse_noise,
    speckle_noise,
    defocus_blur,
    gaussian_blur,
    snow,
    frost,
    fog,
    spatter,
    brightness,
    contrast,
    saturate,
    pixelate,
    jpeg,
};

inline constexpr int kNumCorruptionKinds = 15;
inline constexpr int kNumSeverities = 5;

const std::vector<CorruptionKind>& all_corruption_kinds();
std::string to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(const std::string& name);  // throws UnsupportedKind

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 1;  // 1..5
    std::uint64_t seed = 0;
};

// Deterministic given (img, spec); output has the input's dimensions and
// keypoint geometry is unchanged by every kind.
ImageU8 corrupt(const ImageU8& img, const CorruptionSpec& spec);

// Writes all 15 x 5 variants per test image under
// out_dir/<kind>/<severity>/<image_id>.png (jpeg kind emits .jpg) and returns
// the derived manifest: test images and pairs only, keypoints/bboxes reused
// unchanged, image paths templated as {kind}/{severity}/<id>.{ext}.
DatasetManifest build_corrupted_set(const LoadedDataset& clean, const std::filesystem::path& out_dir,
                                    std::uint64_t seed, int workers = 1);

// Images of one (kind, severity) slice of a corrupted set.
std::map<std::string, ImageU8> load_corrupted_slice(const DatasetManifest& corrupted,
                                                    const std::filesystem::path& root,
                                                    CorruptionKind kind, int severity);

struct RobustnessReport {
    double alpha = 0.1;
    PckNorm norm = PckNorm::bbox;
    // pck[kind][severity-1]
    std::map<std::string, std::array<double, kNumSeverities>> cells;
    std::map<std::string, double> kind_avg;
    std::array<double, kNumSeverities> severity_avg{};
    double corrupted_avg = 0.0;
    double clean = 0.0;
};

RobustnessReport robustness_eval(const MatcherParams& params, const DatasetManifest& corrupted,
                                 const std::filesystem::path& corrupted_root,
                                 const LoadedDataset& clean, const PckSpec& spec, int workers = 1);

// Injected predictions variant (used by tests to check report arithmetic).
RobustnessReport robustness_report_from_cells(
    const std::map<std::string, std::array<double, kNumSeverities>>& cells, double clean,
    const PckSpec& spec);

// CSV mirroring the robustness table: rows severity 1..5 plus avg, columns
// the 15 kinds plus corrupted avg and clean.
void save_robustness_csv(const RobustnessReport& report, const std::filesystem::path& path);

}  // namespace matchlab
