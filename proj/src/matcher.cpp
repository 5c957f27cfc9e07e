#include "matchlab/matcher.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "matchlab/rng.hpp"

namespace matchlab {

namespace {

// Channel centering/balancing: without it the intensity term dominates every
// descriptor, the unit vectors collapse onto one axis and the correlation map
// goes flat. The small bias keeps constant (textureless) cells at a nonzero,
// well-defined descriptor instead of the all-zero vector.
constexpr double kIntensityCenter = 0.5;
constexpr double kIntensityBias = 0.02;
constexpr double kIntensityScale = 2.0;
constexpr double kGradScale = 20.0;
constexpr double kSqGradScale = 100.0;
constexpr double kOrientScale = 30.0;
constexpr double kNormEps = 1e-9;  // smoothed L2 normalization denominator

struct Stencil {
    int cell[4];
    double alpha[4];
    int count = 0;
};

// Bilinear stencil over feature-grid cells for a target-image point.
Stencil grid_stencil(Point2 p, PixelGrid grid, int stride) {
    double half = (stride - 1) / 2.0;
    double u = (p.x - half) / stride;
    double v = (p.y - half) / stride;
    u = std::clamp(u, 0.0, static_cast<double>(grid.width - 1));
    v = std::clamp(v, 0.0, static_cast<double>(grid.height - 1));
    int x0 = std::min(static_cast<int>(std::floor(u)), grid.width - 1);
    int y0 = std::min(static_cast<int>(std::floor(v)), grid.height - 1);
    int x1 = std::min(x0 + 1, grid.width - 1);
    int y1 = std::min(y0 + 1, grid.height - 1);
    double fx = u - x0;
    double fy = v - y0;
    Stencil s;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x1, x0, x1};
    const int ys[4] = {y0, y0, y1, y1};
    for (int k = 0; k < 4; ++k) {
        if (w[k] == 0.0) continue;
        s.cell[s.count] = ys[k] * grid.width + xs[k];
        s.alpha[s.count] = w[k];
        ++s.count;
    }
    return s;
}

struct Forward {
    RawFeatureGrid raw_s, raw_t;
    Eigen::MatrixXd us, vs;          // projected (pre-norm) columns
    Eigen::VectorXd nu_s, nu_t;      // smoothed norms
    Eigen::MatrixXd fs, ft;          // normalized columns
    Eigen::MatrixXd weights;         // softmax weights, Ns x Nt
    Eigen::Matrix2Xd centers;        // source cell centers, 2 x Ns
    Eigen::Matrix2Xd field;          // soft-argmax coords, 2 x Nt
};

void project_normalize(const Eigen::MatrixXd& projection, const Eigen::MatrixXd& raw,
                       Eigen::MatrixXd& pre, Eigen::VectorXd& nu, Eigen::MatrixXd& out) {
    pre.noalias() = projection.transpose() * raw;
    const auto n = pre.cols();
    nu.resize(n);
    out.resize(pre.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = std::sqrt(pre.col(i).squaredNorm() + kNormEps * kNormEps);
        nu(i) = v;
        out.col(i) = pre.col(i) / v;
    }
}

Forward forward_pass(const MatcherParams& params, const Image& src, const Image& tgt) {
    Forward f;
    f.raw_s = raw_features(src, params.descriptor);
    f.raw_t = raw_features(tgt, params.descriptor);
    project_normalize(params.projection, f.raw_s.raw, f.us, f.nu_s, f.fs);
    project_normalize(params.projection, f.raw_t.raw, f.vs, f.nu_t, f.ft);

    const Eigen::Index ns = f.fs.cols();
    const Eigen::Index nt = f.ft.cols();
    Eigen::MatrixXd scores = f.fs.transpose() * f.ft;  // Ns x Nt

    f.weights.resize(ns, nt);
    for (Eigen::Index j = 0; j < nt; ++j) {
        Eigen::VectorXd col = scores.col(j) / params.temperature;
        double m = col.maxCoeff();
        Eigen::VectorXd e = (col.array() - m).exp();
        f.weights.col(j) = e / e.sum();
    }

    f.centers.resize(2, ns);
    for (Eigen::Index i = 0; i < ns; ++i) {
        Point2 c = f.raw_s.cell_center(static_cast<int>(i));
        f.centers(0, i) = c.x;
        f.centers(1, i) = c.y;
    }
    f.field.noalias() = f.centers * f.weights;  // 2 x Nt
    return f;
}

}  // namespace

MatcherParams MatcherParams::identity_init(int proj_dim, double temperature, int stride) {
    MatcherParams p;
    p.projection = Eigen::MatrixXd::Identity(DescriptorConfig::kRawDim, proj_dim);
    p.temperature = temperature;
    p.descriptor.stride = stride;
    return p;
}

RawFeatureGrid raw_features(const Image& img, const DescriptorConfig& cfg) {
    const int s = cfg.stride;
    if (img.height < s || img.width < s) {
        throw ImageTooSmall("raw_features: image smaller than descriptor stride");
    }
    const int h = img.height / s;
    const int w = img.width / s;

    std::vector<float> gray = grayscale(img);
    auto g = [&](int y, int x) { return gray[static_cast<std::size_t>(y) * img.width + x]; };

    RawFeatureGrid out;
    out.grid = {h, w};
    out.stride = s;
    out.raw = Eigen::MatrixXd::Zero(DescriptorConfig::kRawDim, static_cast<Eigen::Index>(h) * w);

    // Pool over a window of twice the stride centered on each cell; the
    // overlap makes neighboring descriptors distinct where a bare s x s cell
    // of texture would look like a dozen other cells.
    const int reach = s / 2;
    for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            double sum_i = 0, sum_gx = 0, sum_gy = 0, sum_gx2 = 0, sum_gy2 = 0;
            double bins[8] = {0};
            int count = 0;
            const int y_lo = std::max(0, cy * s - reach);
            const int y_hi = std::min(img.height, (cy + 1) * s + reach);
            const int x_lo = std::max(0, cx * s - reach);
            const int x_hi = std::min(img.width, (cx + 1) * s + reach);
            for (int py = y_lo; py < y_hi; ++py) {
                for (int px = x_lo; px < x_hi; ++px) {
                    double gx = 0.5 * (g(py, std::min(px + 1, img.width - 1)) -
                                       g(py, std::max(px - 1, 0)));
                    double gy = 0.5 * (g(std::min(py + 1, img.height - 1), px) -
                                       g(std::max(py - 1, 0), px));
                    sum_i += g(py, px);
                    sum_gx += gx;
                    sum_gy += gy;
                    sum_gx2 += gx * gx;
                    sum_gy2 += gy * gy;
                    double mag = std::hypot(gx, gy);
                    if (mag > 0) {
                        double angle = std::atan2(gy, gx);  // [-pi, pi]
                        int bin = static_cast<int>((angle + M_PI) * (8.0 / (2.0 * M_PI)));
                        bin = std::clamp(bin, 0, 7);
                        bins[bin] += mag;
                    }
                    ++count;
                }
            }
            const double inv = 1.0 / count;
            Eigen::Index idx = static_cast<Eigen::Index>(cy) * w + cx;
            out.raw(0, idx) =
                (sum_i * inv - kIntensityCenter + kIntensityBias) * kIntensityScale;
            out.raw(1, idx) = sum_gx * inv * kGradScale;
            out.raw(2, idx) = sum_gy * inv * kGradScale;
            out.raw(3, idx) = sum_gx2 * inv * kSqGradScale;
            out.raw(4, idx) = sum_gy2 * inv * kSqGradScale;
            for (int b = 0; b < 8; ++b) out.raw(5 + b, idx) = bins[b] * inv * kOrientScale;
        }
    }
    return out;
}

FeatureMap extract_features(const Image& img, const MatcherParams& params) {
    RawFeatureGrid raw = raw_features(img, params.descriptor);
    FeatureMap fm;
    fm.grid = raw.grid;
    fm.stride = raw.stride;
    Eigen::MatrixXd pre;
    Eigen::VectorXd nu;
    project_normalize(params.projection, raw.raw, pre, nu, fm.descriptors);
    return fm;
}

CorrelationMap correlate(const FeatureMap& fs, const FeatureMap& ft) {
    if (fs.descriptors.rows() != ft.descriptors.rows()) {
        throw DimensionMismatch("correlate: descriptor dimensions differ");
    }
    CorrelationMap c;
    c.src_grid = fs.grid;
    c.tgt_grid = ft.grid;
    c.src_stride = fs.stride;
    c.tgt_stride = ft.stride;
    c.scores = fs.descriptors.transpose() * ft.descriptors;
    return c;
}

MatchField soft_argmax_field(const CorrelationMap& c, double temperature) {
    if (temperature <= 0) throw InvalidSpec("soft_argmax_field: temperature must be > 0");
    const Eigen::Index ns = c.scores.rows();
    const Eigen::Index nt = c.scores.cols();
    MatchField field;
    field.tgt_grid = c.tgt_grid;
    field.tgt_stride = c.tgt_stride;
    field.coords.resize(static_cast<std::size_t>(nt));
    field.confidence.resize(static_cast<std::size_t>(nt));

    const double half = (c.src_stride - 1) / 2.0;
    for (Eigen::Index j = 0; j < nt; ++j) {
        Eigen::VectorXd col = c.scores.col(j) / temperature;
        double m = col.maxCoeff();
        Eigen::VectorXd e = (col.array() - m).exp();
        double z = e.sum();
        double cx = 0, cy = 0, best = 0;
        for (Eigen::Index i = 0; i < ns; ++i) {
            double w = e(i) / z;
            int row = static_cast<int>(i) / c.src_grid.width;
            int colx = static_cast<int>(i) % c.src_grid.width;
            cx += w * (colx * c.src_stride + half);
            cy += w * (row * c.src_stride + half);
            best = std::max(best, w);
        }
        field.coords[static_cast<std::size_t>(j)] = {cx, cy};
        field.confidence[static_cast<std::size_t>(j)] = best;
    }
    return field;
}

MatchField match_field(const MatcherParams& params, const Image& src, const Image& tgt) {
    Forward f = forward_pass(params, src, tgt);
    MatchField field;
    field.tgt_grid = f.raw_t.grid;
    field.tgt_stride = f.raw_t.stride;
    const Eigen::Index nt = f.field.cols();
    field.coords.resize(static_cast<std::size_t>(nt));
    field.confidence.resize(static_cast<std::size_t>(nt));
    for (Eigen::Index j = 0; j < nt; ++j) {
        field.coords[static_cast<std::size_t>(j)] = {f.field(0, j), f.field(1, j)};
        field.confidence[static_cast<std::size_t>(j)] = f.weights.col(j).maxCoeff();
    }
    return field;
}

std::vector<Point2> transfer_keypoints(const MatchField& field, const std::vector<Point2>& tgt_pts,
                                       PixelGrid tgt_image) {
    std::vector<Point2> out;
    out.reserve(tgt_pts.size());
    for (Point2 p : tgt_pts) {
        if (!tgt_image.contains(p)) {
            throw OutOfBounds("transfer_keypoints: target point outside image");
        }
        Stencil s = grid_stencil(p, field.tgt_grid, field.tgt_stride);
        Point2 acc{0, 0};
        for (int k = 0; k < s.count; ++k) {
            acc = acc + s.alpha[k] * field.coords[static_cast<std::size_t>(s.cell[k])];
        }
        out.push_back(acc);
    }
    return out;
}

LossResult loss_and_grad(const MatcherParams& params, const Image& src, const Image& tgt,
                         const Supervision& supervision, double weight) {
    Forward f = forward_pass(params, src, tgt);
    const Eigen::Index ns = f.fs.cols();
    const Eigen::Index nt = f.ft.cols();

    // Unify supervision into (stencil over target cells, supervised source point).
    struct Entry {
        Stencil stencil;
        Point2 q;
    };
    std::vector<Entry> entries;
    if (const auto* sparse = std::get_if<SparseSupervision>(&supervision)) {
        if (!sparse->mask.empty() && sparse->mask.size() != sparse->entries.size()) {
            throw DimensionMismatch("loss_and_grad: mask length != entries");
        }
        for (std::size_t k = 0; k < sparse->entries.size(); ++k) {
            if (!sparse->mask.empty() && !sparse->mask[k]) continue;
            Entry e;
            e.stencil = grid_stencil(sparse->entries[k].tgt, f.raw_t.grid, f.raw_t.stride);
            e.q = sparse->entries[k].src;
            entries.push_back(e);
        }
    } else {
        const auto& dense = std::get<DenseSupervision>(supervision);
        if (dense.coords.size() != static_cast<std::size_t>(nt) ||
            dense.mask.size() != static_cast<std::size_t>(nt)) {
            throw DimensionMismatch("loss_and_grad: dense supervision size != target cells");
        }
        for (std::size_t j = 0; j < dense.coords.size(); ++j) {
            if (!dense.mask[j]) continue;
            Entry e;
            e.stencil.cell[0] = static_cast<int>(j);
            e.stencil.alpha[0] = 1.0;
            e.stencil.count = 1;
            e.q = dense.coords[j];
            entries.push_back(e);
        }
    }
    if (entries.empty()) throw EmptySupervision("loss_and_grad: no unmasked supervision entries");

    const double inv_k = 1.0 / static_cast<double>(entries.size());
    double loss = 0.0;
    Eigen::Matrix2Xd r = Eigen::Matrix2Xd::Zero(2, nt);  // dL/d field column
    for (const Entry& e : entries) {
        Point2 pred{0, 0};
        for (int k = 0; k < e.stencil.count; ++k) {
            Eigen::Index j = e.stencil.cell[k];
            pred.x += e.stencil.alpha[k] * f.field(0, j);
            pred.y += e.stencil.alpha[k] * f.field(1, j);
        }
        Point2 diff = pred - e.q;
        loss += squared_norm(diff) * inv_k;
        for (int k = 0; k < e.stencil.count; ++k) {
            Eigen::Index j = e.stencil.cell[k];
            r(0, j) += 2.0 * inv_k * e.stencil.alpha[k] * diff.x;
            r(1, j) += 2.0 * inv_k * e.stencil.alpha[k] * diff.y;
        }
    }

    // Softmax + soft-argmax backward. For column j:
    //   dL/dc_ij = (w_ij / beta) * r_j . (g_i - m_j)
    Eigen::MatrixXd a = f.centers.transpose() * r;  // Ns x Nt: g_i . r_j
    Eigen::RowVectorXd d = (f.field.array() * r.array()).colwise().sum();  // m_j . r_j
    Eigen::MatrixXd s =
        (f.weights.array() * (a.rowwise() - d).array()).matrix() / params.temperature;

    // Correlation backward into normalized descriptors.
    Eigen::MatrixXd d_fs = f.ft * s.transpose();  // d' x Ns
    Eigen::MatrixXd d_ft = f.fs * s;              // d' x Nt

    // Normalization backward: dL/du = (dL/df - (f . dL/df) f) / nu.
    auto unnormalize = [](const Eigen::MatrixXd& dhat, const Eigen::MatrixXd& hat,
                          const Eigen::VectorXd& nu) {
        Eigen::MatrixXd out(dhat.rows(), dhat.cols());
        for (Eigen::Index i = 0; i < dhat.cols(); ++i) {
            double dot = hat.col(i).dot(dhat.col(i));
            out.col(i) = (dhat.col(i) - dot * hat.col(i)) / nu(i);
        }
        return out;
    };
    Eigen::MatrixXd d_us = unnormalize(d_fs, f.fs, f.nu_s);
    Eigen::MatrixXd d_vs = unnormalize(d_ft, f.ft, f.nu_t);

    LossResult result;
    result.loss = weight * loss;
    result.grad = weight * (f.raw_s.raw * d_us.transpose() + f.raw_t.raw * d_vs.transpose());
    result.used_entries = static_cast<int>(entries.size());
    return result;
}

namespace {
constexpr char kCheckpointMagic[4] = {'M', 'L', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_params(const MatcherParams& params, const std::filesystem::path& path,
                 const std::vector<std::pair<std::string, std::string>>& metadata) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot write checkpoint: " + path.string());
    f.write(kCheckpointMagic, 4);
    write_pod(f, kCheckpointVersion);
    std::int32_t d = static_cast<std::int32_t>(params.projection.rows());
    std::int32_t dp = static_cast<std::int32_t>(params.projection.cols());
    std::int32_t stride = params.descriptor.stride;
    write_pod(f, d);
    write_pod(f, dp);
    write_pod(f, stride);
    write_pod(f, params.temperature);
    for (std::int32_t i = 0; i < d; ++i) {
        for (std::int32_t j = 0; j < dp; ++j) {
            double v = params.projection(i, j);
            write_pod(f, v);
        }
    }
    if (!f) throw IoFailure("checkpoint write failed: " + path.string());

    std::ofstream meta(path.string() + ".meta.txt");
    meta << "format = matchlab-checkpoint\n";
    meta << "version = " << kCheckpointVersion << "\n";
    meta << "raw_dim = " << d << "\n";
    meta << "proj_dim = " << dp << "\n";
    meta << "stride = " << stride << "\n";
    meta << "temperature = " << params.temperature << "\n";
    for (const auto& [k, v] : metadata) meta << k << " = " << v << "\n";
}

MatcherParams load_params(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot read checkpoint: " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw IoFailure("not a checkpoint file: " + path.string());
    }
    std::uint32_t version = 0;
    read_pod(f, version);
    if (version != kCheckpointVersion) {
        throw IoFailure("unsupported checkpoint version in " + path.string());
    }
    std::int32_t d = 0, dp = 0, stride = 0;
    read_pod(f, d);
    read_pod(f, dp);
    read_pod(f, stride);
    MatcherParams params;
    read_pod(f, params.temperature);
    params.descriptor.stride = stride;
    params.projection.resize(d, dp);
    for (std::int32_t i = 0; i < d; ++i) {
        for (std::int32_t j = 0; j < dp; ++j) {
            double v;
            read_pod(f, v);
            params.projection(i, j) = v;
        }
    }
    if (!f) throw IoFailure("truncated checkpoint: " + path.string());
    return params;
}

std::uint64_t params_fingerprint(const MatcherParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_double = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h = hash_mix(h, bits);
    };
    h = hash_mix(h, static_cast<std::uint64_t>(params.projection.rows()));
    h = hash_mix(h, static_cast<std::uint64_t>(params.projection.cols()));
    h = hash_mix(h, static_cast<std::uint64_t>(params.descriptor.stride));
    mix_double(params.temperature);
    for (Eigen::Index i = 0; i < params.projection.rows(); ++i)
        for (Eigen::Index j = 0; j < params.projection.cols(); ++j)
            mix_double(params.projection(i, j));
    return h;
}

}  // namespace matchlab
