#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matchlab/manifest.hpp"
#include "matchlab/matcher.hpp"

namespace matchlab {

enum class PckNorm { img, bbox };

struct PckSpec {
    double alpha = 0.1;
    PckNorm norm = PckNorm::bbox;
};

// Fraction of keypoints whose Euclidean error is <= alpha * max(H, W) of the
// frame (boundary inclusive). frame = image dims or object bbox dims.
double pck(const std::vector<Point2>& pred, const std::vector<Point2>& gt, const PckSpec& spec,
           double frame_h, double frame_w);

struct SliceStat {
    long correct = 0;
    long total = 0;
    double pck() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

struct EvalReport {
    double slice_alpha = 0.1;  // alpha used for the class/factor slices
    PckNorm norm = PckNorm::bbox;
    std::vector<std::pair<double, SliceStat>> per_alpha;  // overall at each alpha
    std::map<std::string, SliceStat> per_class;
    std::map<std::string, SliceStat> per_factor;  // e.g. "viewpoint:easy"
    long pairs = 0;
    long keypoints = 0;

    double overall() const;               // at slice_alpha
    double overall_at(double alpha) const;
};

struct EvalOptions {
    std::vector<double> alphas{0.05, 0.1, 0.15};
    double slice_alpha = 0.1;
    PckNorm norm = PckNorm::bbox;
    Split split = Split::test;
    int workers = 1;
};

// Predictions keyed by "src__tgt" pair id, per-keypoint transferred source
// coordinates in source-image pixels.
using PredictionTable = std::map<std::string, std::vector<Point2>>;

std::string pair_key(const std::string& src_id, const std::string& tgt_id);

// Run the matcher over the split's annotated pairs.
PredictionTable predict_with_params(const LoadedDataset& ds, const MatcherParams& params,
                                    Split split, int workers = 1);

EvalReport evaluate_report(const LoadedDataset& ds, const PredictionTable& preds,
                           const EvalOptions& opts);
EvalReport evaluate_report(const LoadedDataset& ds, const MatcherParams& params,
                           const EvalOptions& opts);

// CSV: pair_id,kp_id,pred_x,pred_y
void save_predictions(const PredictionTable& preds, const std::filesystem::path& path);
PredictionTable load_predictions(const std::filesystem::path& path);

void save_report_csv(const EvalReport& report, const std::filesystem::path& path);
void save_report_text(const EvalReport& report, const std::filesystem::path& path);

// Best-effort match overlay: source and target side by side, line segments
// green where the prediction is within the PCK margin, red otherwise.
void render_match_overlay(const ImageU8& src, const ImageU8& tgt,
                          const std::vector<KeypointPair>& keypoints,
                          const std::vector<Point2>& preds, double margin,
                          const std::filesystem::path& out_png);

}  // namespace matchlab
