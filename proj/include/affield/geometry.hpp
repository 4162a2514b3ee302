#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace affield {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
    Point2 to_point() const { return {static_cast<double>(x), static_cast<double>(y)}; }
};

/// A 2x3 affine map acting on homogeneous pixel coordinates [x, y, 1]^T.
/// Row-major: first row (a11, a12, tx), second row (a21, a22, ty).
struct Affine2D {
    double a11 = 1.0, a12 = 0.0, tx = 0.0;
    double a21 = 0.0, a22 = 1.0, ty = 0.0;

    static constexpr Affine2D identity() { return {}; }
    static constexpr Affine2D translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }
    static constexpr Affine2D scaling(double s) { return {s, 0, 0, 0, s, 0}; }
    /// Builds from the parameter order a11, a12, tx, a21, a22, ty.
    static constexpr Affine2D from_params(const std::array<double, 6>& p) {
        return {p[0], p[1], p[2], p[3], p[4], p[5]};
    }

    constexpr std::array<double, 6> params() const { return {a11, a12, tx, a21, a22, ty}; }
    double determinant() const { return a11 * a22 - a12 * a21; }
    bool is_finite() const;

    friend bool operator==(const Affine2D&, const Affine2D&) = default;
};

inline Point2 apply_affine(const Affine2D& t, Point2 p) {
    return {t.a11 * p.x + t.a12 * p.y + t.tx, t.a21 * p.x + t.a22 * p.y + t.ty};
}

/// Product of the 3x3 augmentations, M(outer) * M(inner): applying the result
/// equals applying `inner` first and then `outer`.
Affine2D compose(const Affine2D& outer, const Affine2D& inner);

/// Inverse map. Throws DegenerateError when |det| <= 1e-12.
Affine2D invert(const Affine2D& t);

/// Largest absolute difference over the six parameters.
double max_abs_diff(const Affine2D& a, const Affine2D& b);

}  // namespace affield
