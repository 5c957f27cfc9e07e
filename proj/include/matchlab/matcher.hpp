#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "matchlab/image.hpp"
#include "matchlab/manifest.hpp"
#include "matchlab/types.hpp"

namespace matchlab {

// Fixed filter-bank descriptor: 1 mean intensity + 2 mean gradients +
// 2 mean squared gradients + 8 orientation-histogram bins per cell.
struct DescriptorConfig {
    int stride = 4;
    static constexpr int kRawDim = 13;

    bool operator==(const DescriptorConfig&) const = default;
};

struct MatcherParams {
    Eigen::MatrixXd projection;  // raw_dim x proj_dim, the trainable parameters
    double temperature = 0.02;   // softmax beta
    DescriptorConfig descriptor;

    int raw_dim() const { return static_cast<int>(projection.rows()); }
    int proj_dim() const { return static_cast<int>(projection.cols()); }

    static MatcherParams identity_init(int proj_dim = DescriptorConfig::kRawDim,
                                       double temperature = 0.02, int stride = 4);
};

// Per-cell unprojected filter-bank responses. Kept around because the loss
// backward pass needs them.
struct RawFeatureGrid {
    PixelGrid grid;  // cells: h x w
    int stride = 4;
    Eigen::MatrixXd raw;  // kRawDim x (h*w), column-major cells (row-major scan)

    Point2 cell_center(int idx) const {
        int row = idx / grid.width;
        int col = idx % grid.width;
        double half = (stride - 1) / 2.0;
        return {col * stride + half, row * stride + half};
    }
};

struct FeatureMap {
    PixelGrid grid;
    int stride = 4;
    Eigen::MatrixXd descriptors;  // proj_dim x (h*w), unit columns

    Point2 cell_center(int idx) const {
        int row = idx / grid.width;
        int col = idx % grid.width;
        double half = (stride - 1) / 2.0;
        return {col * stride + half, row * stride + half};
    }
};

struct CorrelationMap {
    PixelGrid src_grid, tgt_grid;
    int src_stride = 4, tgt_stride = 4;
    Eigen::MatrixXd scores;  // (hs*ws) x (ht*wt)
};

// Per-target-cell source coordinate (source-image pixels) + confidence.
struct MatchField {
    PixelGrid tgt_grid;
    int tgt_stride = 4;
    std::vector<Point2> coords;
    std::vector<double> confidence;

    std::size_t cells() const { return coords.size(); }
};

RawFeatureGrid raw_features(const Image& img, const DescriptorConfig& cfg);
FeatureMap extract_features(const Image& img, const MatcherParams& params);
CorrelationMap correlate(const FeatureMap& fs, const FeatureMap& ft);
MatchField soft_argmax_field(const CorrelationMap& c, double temperature);

// Full forward pass: features -> correlation -> soft-argmax.
MatchField match_field(const MatcherParams& params, const Image& src, const Image& tgt);

// Bilinear interpolation of the field's source coordinates at sub-pixel
// target-image points. Throws OutOfBounds for points outside the image.
std::vector<Point2> transfer_keypoints(const MatchField& field, const std::vector<Point2>& tgt_pts,
                                       PixelGrid tgt_image);

// Sparse keypoint supervision with a binary mask gating entries.
struct SparseSupervision {
    std::vector<KeypointPair> entries;
    std::vector<std::uint8_t> mask;  // empty = all ones
};

// Dense per-target-cell supervision (pseudo-label form).
struct DenseSupervision {
    std::vector<Point2> coords;      // per target cell, source-image pixels
    std::vector<std::uint8_t> mask;  // per target cell
};

using Supervision = std::variant<SparseSupervision, DenseSupervision>;

struct LossResult {
    double loss = 0.0;
    Eigen::MatrixXd grad;  // raw_dim x proj_dim
    int used_entries = 0;
};

// Mean squared endpoint error over unmasked entries between the soft-argmax
// transfer and the supervised source coordinates, with the exact analytic
// gradient w.r.t. the projection matrix (through projection, normalization,
// correlation, softmax and soft-argmax). `weight` scales both loss and grad.
LossResult loss_and_grad(const MatcherParams& params, const Image& src, const Image& tgt,
                         const Supervision& supervision, double weight = 1.0);

// Versioned binary checkpoint (magic, version, dims, stride, temperature,
// row-major matrix) plus a human-readable sidecar `<path>.meta.txt`.
void save_params(const MatcherParams& params, const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, std::string>>& metadata = {});
MatcherParams load_params(const std::filesystem::path& path);

std::uint64_t params_fingerprint(const MatcherParams& params);

}  // namespace matchlab
