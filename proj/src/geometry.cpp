#include "affield/geometry.hpp"

#include <algorithm>

#include "affield/error.hpp"

namespace affield {

bool Affine2D::is_finite() const {
    const auto p = params();
    return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

Affine2D compose(const Affine2D& o, const Affine2D& i) {
    // Top two rows of [o; 0 0 1] * [i; 0 0 1].
    return {o.a11 * i.a11 + o.a12 * i.a21,
            o.a11 * i.a12 + o.a12 * i.a22,
            o.a11 * i.tx + o.a12 * i.ty + o.tx,
            o.a21 * i.a11 + o.a22 * i.a21,
            o.a21 * i.a12 + o.a22 * i.a22,
            o.a21 * i.tx + o.a22 * i.ty + o.ty};
}

Affine2D invert(const Affine2D& t) {
    const double det = t.determinant();
    if (!(std::abs(det) > 1e-12)) throw DegenerateError("affine map is singular");
    const double b11 = t.a22 / det;
    const double b12 = -t.a12 / det;
    const double b21 = -t.a21 / det;
    const double b22 = t.a11 / det;
    return {b11, b12, -(b11 * t.tx + b12 * t.ty), b21, b22, -(b21 * t.tx + b22 * t.ty)};
}

double max_abs_diff(const Affine2D& a, const Affine2D& b) {
    const auto pa = a.params();
    const auto pb = b.params();
    double m = 0.0;
    for (std::size_t k = 0; k < 6; ++k) m = std::max(m, std::abs(pa[k] - pb[k]));
    return m;
}

}  // namespace affield
