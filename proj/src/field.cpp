#include "affield/field.hpp"

#include <algorithm>
#include <cmath>

#include "affield/error.hpp"
#include "affield/parallel.hpp"

namespace affield {

AffineField::AffineField(int height, int width, const Affine2D& fill)
    : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("field dimensions must be positive");
    cells_.assign(static_cast<std::size_t>(height) * width, fill);
}

bool AffineField::is_identity() const {
    return std::all_of(cells_.begin(), cells_.end(),
                       [](const Affine2D& t) { return t == Affine2D::identity(); });
}

GridAffineField::GridAffineField(int level, int image_height, int image_width, const Affine2D& fill)
    : level_(level), image_height_(image_height), image_width_(image_width) {
    if (level < 1 || level > 16) throw InvalidArgument("grid level must be in [1, 16]");
    if (image_height <= 0 || image_width <= 0) throw InvalidArgument("image dimensions must be positive");
    cells_.assign(static_cast<std::size_t>(side()) * side(), fill);
}

Point2 GridAffineField::cell_center(int row, int col) const {
    return grid_cell_center(side(), side(), image_height_, image_width_, row, col);
}

Point2 grid_cell_center(int rows, int cols, int image_h, int image_w, int row, int col) {
    return {(col + 0.5) * image_w / cols - 0.5, (row + 0.5) * image_h / rows - 0.5};
}

namespace {

// Continuous cell coordinate along one axis, clamped to the center hull.
void axis_stencil(double p, int n, int extent, int& i0, int& i1, double& frac) {
    if (n == 1) {
        i0 = i1 = 0;
        frac = 0.0;
        return;
    }
    double u = (p + 0.5) * n / extent - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
    i1 = i0 + 1;
    frac = u - i0;
}

}  // namespace

CellWeights cell_weights(int rows, int cols, int image_h, int image_w, Point2 p) {
    int c0, c1, r0, r1;
    CellWeights w;
    axis_stencil(p.x, cols, image_w, c0, c1, w.fx);
    axis_stencil(p.y, rows, image_h, r0, r1, w.fy);
    w.index = {r0 * cols + c0, r0 * cols + c1, r1 * cols + c0, r1 * cols + c1};
    return w;
}

Affine2D interpolate_cells(std::span<const Affine2D> cells, int rows, int cols, int image_h,
                           int image_w, Point2 p) {
    if (cells.size() != static_cast<std::size_t>(rows) * cols) throw ShapeError("cell count mismatch");
    const CellWeights w = cell_weights(rows, cols, image_h, image_w, p);
    const auto p00 = cells[w.index[0]].params();
    const auto p01 = cells[w.index[1]].params();
    const auto p10 = cells[w.index[2]].params();
    const auto p11 = cells[w.index[3]].params();
    std::array<double, 6> out{};
    for (std::size_t k = 0; k < 6; ++k) {
        // Nested lerps keep a constant grid exactly constant.
        const double top = p00[k] + w.fx * (p01[k] - p00[k]);
        const double bottom = p10[k] + w.fx * (p11[k] - p10[k]);
        out[k] = top + w.fy * (bottom - top);
    }
    return Affine2D::from_params(out);
}

AffineField upsample_cells(std::span<const Affine2D> cells, int rows, int cols, int image_h,
                           int image_w) {
    AffineField out(image_h, image_w);
    parallel_for(static_cast<std::size_t>(image_h), [&](std::size_t b, std::size_t e) {
        for (auto y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
            for (int x = 0; x < image_w; ++x) {
                out.at(y, x) = interpolate_cells(cells, rows, cols, image_h, image_w,
                                                 {static_cast<double>(x), static_cast<double>(y)});
            }
        }
    });
    return out;
}

AffineField grid_to_dense(const GridAffineField& g) {
    return upsample_cells(g.cells(), g.side(), g.side(), g.image_height(), g.image_width());
}

AffineField compose_fields(std::span<const AffineField> levels) {
    if (levels.empty()) throw ShapeError("compose_fields needs at least one field");
    for (const auto& f : levels) {
        if (!f.same_shape(levels.front())) throw ShapeError("compose_fields: dimension mismatch");
    }
    AffineField out = levels.front();
    for (std::size_t n = 1; n < levels.size(); ++n) {
        const auto src = levels[n].cells();
        auto dst = out.cells();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = compose(dst[i], src[i]);
    }
    return out;
}

FlowField::FlowField(int height, int width) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("flow dimensions must be positive");
    data_.assign(2 * static_cast<std::size_t>(height) * width, 0.0);
}

FlowField flow_from_field(const AffineField& field) {
    FlowField flow(field.height(), field.width());
    for (int y = 0; y < field.height(); ++y) {
        for (int x = 0; x < field.width(); ++x) {
            const Point2 i{static_cast<double>(x), static_cast<double>(y)};
            const Point2 j = apply_affine(field.at(y, x), i);
            flow.set(y, x, {j.x - i.x, j.y - i.y});
        }
    }
    return flow;
}

Image warp_image(const Image& img, const AffineField& field) {
    if (img.height() != field.height() || img.width() != field.width()) {
        throw ShapeError("warp_image: field and image dimensions differ");
    }
    Image out(img.height(), img.width(), img.channels());
    parallel_for(static_cast<std::size_t>(img.height()), [&](std::size_t b, std::size_t e) {
        for (auto y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                const Point2 p = apply_affine(field.at(y, x), {static_cast<double>(x), static_cast<double>(y)});
                for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_bilinear(img, p.x, p.y, c);
            }
        }
    });
    return out;
}

WarpGradient warp_image_vjp(const Image& img, const AffineField& field, const Image& grad_output) {
    if (img.height() != field.height() || img.width() != field.width() || !img.same_shape(grad_output)) {
        throw ShapeError("warp_image_vjp: dimension mismatch");
    }
    const int h = img.height();
    const int w = img.width();
    WarpGradient g{std::vector<std::array<double, 6>>(static_cast<std::size_t>(h) * w),
                   Image(h, w, img.channels())};
    auto pix = [&](int yy, int xx, int c) {
        return (xx >= 0 && xx < w && yy >= 0 && yy < h) ? img.at(yy, xx, c) : 0.0;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Point2 p = apply_affine(field.at(y, x), {static_cast<double>(x), static_cast<double>(y)});
            if (!(p.x > -1.0 && p.x < w && p.y > -1.0 && p.y < h)) continue;
            const int x0 = static_cast<int>(std::floor(p.x));
            const int y0 = static_cast<int>(std::floor(p.y));
            const double ax = p.x - x0;
            const double ay = p.y - y0;
            double dpx = 0.0, dpy = 0.0;
            for (int c = 0; c < img.channels(); ++c) {
                const double go = grad_output.at(y, x, c);
                const double v00 = pix(y0, x0, c), v01 = pix(y0, x0 + 1, c);
                const double v10 = pix(y0 + 1, x0, c), v11 = pix(y0 + 1, x0 + 1, c);
                dpx += go * ((1 - ay) * (v01 - v00) + ay * (v11 - v10));
                dpy += go * ((1 - ax) * (v10 - v00) + ax * (v11 - v01));
                const std::array<std::pair<int, int>, 4> nb{{{y0, x0}, {y0, x0 + 1}, {y0 + 1, x0}, {y0 + 1, x0 + 1}}};
                const std::array<double, 4> wt{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
                for (std::size_t k = 0; k < 4; ++k) {
                    const auto [yy, xx] = nb[k];
                    if (xx >= 0 && xx < w && yy >= 0 && yy < h) g.image.at(yy, xx, c) += wt[k] * go;
                }
            }
            auto& gf = g.field[static_cast<std::size_t>(y) * w + x];
            gf = {dpx * x, dpx * y, dpx, dpy * x, dpy * y, dpy};
        }
    }
    return g;
}

}  // namespace affield
