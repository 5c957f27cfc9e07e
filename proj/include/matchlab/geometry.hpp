#pragma once

#include <array>
#include <utility>
#include <vector>

#include "matchlab/image.hpp"
#include "matchlab/types.hpp"

namespace matchlab {

enum class TransformKind { affine, tps };

// Thin-plate-spline displacement field: f(p) = p + d(p) where d interpolates
// the control displacements (targets[k] - controls[k]) with kernel
// U(r) = r^2 log(r^2) plus an affine term, solved with a small regularizer on
// the radial block.
struct TpsData {
    std::vector<Point2> controls;
    std::vector<Point2> targets;
    double regularization = 1e-6;

    // Solved coefficients (per output dim: radial weights + affine a0+a1*x+a2*y).
    std::vector<double> wx, wy;
    std::array<double, 3> ax{0, 0, 0}, ay{0, 0, 0};
    bool solved = false;
};

struct GeometricTransform {
    TransformKind kind = TransformKind::affine;
    // Row-major 2x3: [a b tx; c d ty]; maps (x, y) -> (a x + b y + tx, c x + d y + ty).
    std::array<double, 6> affine{1, 0, 0, 0, 1, 0};
    TpsData tps;

    static GeometricTransform identity() { return GeometricTransform{}; }
    static GeometricTransform translation(double dx, double dy) {
        GeometricTransform t;
        t.affine = {1, 0, dx, 0, 1, dy};
        return t;
    }
    static GeometricTransform from_affine(const std::array<double, 6>& m) {
        GeometricTransform t;
        t.affine = m;
        return t;
    }
    // Rotation by radians about a center, then isotropic scale about the same
    // center, then translation.
    static GeometricTransform similarity(double rotation, double scale, Point2 center,
                                         Point2 translation);
    static GeometricTransform make_tps(std::vector<Point2> controls, std::vector<Point2> targets,
                                       double regularization = 1e-6);
};

Point2 apply_transform(const GeometricTransform& t, Point2 p);

// Composition c = b after a, affine only: apply(c, p) == apply(b, apply(a, p)).
GeometricTransform compose_affine(const GeometricTransform& b, const GeometricTransform& a);

// Throws SingularTransform when |det| < 1e-12.
GeometricTransform invert_affine(const GeometricTransform& t);

// Inverse image of y under t. Closed form for affine; TPS is inverted by
// fixed-point iteration x <- y - d(x), which converges for the small, smooth
// displacement fields used in augmentation.
Point2 invert_point(const GeometricTransform& t, Point2 y);

// Output pixel (x, y) samples the input at t^{-1}(x, y) with bilinear
// interpolation; out-of-bounds samples contribute zeros.
Image warp_image(const Image& img, const GeometricTransform& t, PixelGrid grid);

std::vector<std::pair<Point2, bool>> warp_points_batch(const GeometricTransform& t,
                                                       const std::vector<Point2>& pts,
                                                       PixelGrid grid);

}  // namespace matchlab
