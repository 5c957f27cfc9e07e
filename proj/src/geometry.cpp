#include "matchlab/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace matchlab {

namespace {

double tps_kernel(double r2) {
    // U(r) = r^2 log(r^2), with U(0) = 0.
    return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

void solve_tps(TpsData& tps) {
    const int n = static_cast<int>(tps.controls.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double r2 = squared_norm(tps.controls[i] - tps.controls[j]);
            L(i, j) = tps_kernel(r2);
        }
        L(i, i) += tps.regularization;
        L(i, n) = 1.0;
        L(i, n + 1) = tps.controls[i].x;
        L(i, n + 2) = tps.controls[i].y;
        L(n, i) = 1.0;
        L(n + 1, i) = tps.controls[i].x;
        L(n + 2, i) = tps.controls[i].y;
        rhs(i, 0) = tps.targets[i].x - tps.controls[i].x;
        rhs(i, 1) = tps.targets[i].y - tps.controls[i].y;
    }
    Eigen::MatrixXd sol = L.fullPivLu().solve(rhs);
    tps.wx.resize(n);
    tps.wy.resize(n);
    for (int i = 0; i < n; ++i) {
        tps.wx[static_cast<std::size_t>(i)] = sol(i, 0);
        tps.wy[static_cast<std::size_t>(i)] = sol(i, 1);
    }
    tps.ax = {sol(n, 0), sol(n + 1, 0), sol(n + 2, 0)};
    tps.ay = {sol(n, 1), sol(n + 1, 1), sol(n + 2, 1)};
    tps.solved = true;
}

Point2 tps_displacement(const TpsData& tps, Point2 p) {
    double dx = tps.ax[0] + tps.ax[1] * p.x + tps.ax[2] * p.y;
    double dy = tps.ay[0] + tps.ay[1] * p.x + tps.ay[2] * p.y;
    for (std::size_t k = 0; k < tps.controls.size(); ++k) {
        double u = tps_kernel(squared_norm(p - tps.controls[k]));
        dx += tps.wx[k] * u;
        dy += tps.wy[k] * u;
    }
    return {dx, dy};
}

}  // namespace

GeometricTransform GeometricTransform::similarity(double rotation, double scale, Point2 center,
                                                  Point2 translation) {
    const double c = std::cos(rotation) * scale;
    const double s = std::sin(rotation) * scale;
    // p -> R S (p - center) + center + translation
    GeometricTransform t;
    t.affine = {c, -s, center.x + translation.x - c * center.x + s * center.y,
                s, c,  center.y + translation.y - s * center.x - c * center.y};
    return t;
}

GeometricTransform GeometricTransform::make_tps(std::vector<Point2> controls,
                                                std::vector<Point2> targets,
                                                double regularization) {
    if (controls.size() != targets.size() || controls.size() < 3) {
        throw InvalidSpec("tps: need >= 3 control points with matching targets");
    }
    for (std::size_t i = 0; i < controls.size(); ++i) {
        for (std::size_t j = i + 1; j < controls.size(); ++j) {
            if (squared_norm(controls[i] - controls[j]) == 0.0) {
                throw InvalidSpec("tps: control points must be pairwise distinct");
            }
        }
    }
    GeometricTransform t;
    t.kind = TransformKind::tps;
    t.tps.controls = std::move(controls);
    t.tps.targets = std::move(targets);
    t.tps.regularization = regularization;
    solve_tps(t.tps);
    return t;
}

Point2 apply_transform(const GeometricTransform& t, Point2 p) {
    if (t.kind == TransformKind::affine) {
        const auto& m = t.affine;
        return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
    }
    return p + tps_displacement(t.tps, p);
}

GeometricTransform compose_affine(const GeometricTransform& b, const GeometricTransform& a) {
    const auto& m1 = a.affine;
    const auto& m2 = b.affine;
    GeometricTransform out;
    out.affine = {m2[0] * m1[0] + m2[1] * m1[3],
                  m2[0] * m1[1] + m2[1] * m1[4],
                  m2[0] * m1[2] + m2[1] * m1[5] + m2[2],
                  m2[3] * m1[0] + m2[4] * m1[3],
                  m2[3] * m1[1] + m2[4] * m1[4],
                  m2[3] * m1[2] + m2[4] * m1[5] + m2[5]};
    return out;
}

GeometricTransform invert_affine(const GeometricTransform& t) {
    const auto& m = t.affine;
    const double det = m[0] * m[4] - m[1] * m[3];
    if (std::abs(det) < 1e-12) {
        throw SingularTransform("invert_affine: |det| < 1e-12");
    }
    const double ia = m[4] / det;
    const double ib = -m[1] / det;
    const double ic = -m[3] / det;
    const double id = m[0] / det;
    GeometricTransform inv;
    inv.affine = {ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])};
    return inv;
}

Point2 invert_point(const GeometricTransform& t, Point2 y) {
    if (t.kind == TransformKind::affine) {
        return apply_transform(invert_affine(t), y);
    }
    Point2 x = y;
    for (int it = 0; it < 50; ++it) {
        Point2 d = tps_displacement(t.tps, x);
        Point2 next{y.x - d.x, y.y - d.y};
        if (squared_norm(next - x) < 1e-20) return next;
        x = next;
    }
    return x;
}

Image warp_image(const Image& img, const GeometricTransform& t, PixelGrid grid) {
    if (img.empty()) throw ImageTooSmall("warp_image: empty input");
    GeometricTransform inv;
    bool affine = t.kind == TransformKind::affine;
    if (affine) inv = invert_affine(t);
    Image out(grid.height, grid.width);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            Point2 src = affine
                             ? apply_transform(inv, {static_cast<double>(x), static_cast<double>(y)})
                             : invert_point(t, {static_cast<double>(x), static_cast<double>(y)});
            bilinear_sample(img, src.x, src.y, out.pixel(y, x));
        }
    }
    return out;
}

std::vector<std::pair<Point2, bool>> warp_points_batch(const GeometricTransform& t,
                                                       const std::vector<Point2>& pts,
                                                       PixelGrid grid) {
    std::vector<std::pair<Point2, bool>> out;
    out.reserve(pts.size());
    for (Point2 p : pts) {
        Point2 q = apply_transform(t, p);
        out.emplace_back(q, grid.contains(q));
    }
    return out;
}

}  // namespace matchlab
