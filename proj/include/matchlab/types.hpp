#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace matchlab {

// Continuous 2-D point in pixel coordinates. Origin at the top-left pixel
// center, x grows rightward (columns), y grows downward (rows).
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double squared_norm(Point2 p) { return p.x * p.x + p.y * p.y; }

struct PixelGrid {
    int height = 0;
    int width = 0;

    bool valid() const { return height >= 1 && width >= 1; }
    long cells() const { return static_cast<long>(height) * width; }
    // A point is inside the grid iff it lies in [0, W-1] x [0, H-1].
    bool contains(Point2 p) const {
        return p.x >= 0.0 && p.x <= width - 1.0 && p.y >= 0.0 && p.y <= height - 1.0;
    }
    bool operator==(const PixelGrid&) const = default;
};

struct SingularTransform : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ImageTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OutOfBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptySupervision : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyPairSet : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownClass : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownPair : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidSpec : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidSeverity : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedKind : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ManifestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingGroundTruth : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyKeypoints : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace matchlab
