#include "affield/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "affield/error.hpp"

namespace affield {

namespace {

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Linear map with rotation, shear and isotropic scale applied about center c.
Affine2D about_center(double angle, double scale, double shear, Point2 t, Point2 c) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    // R * [[1, shear], [0, 1]] * s
    const double a11 = scale * ca, a12 = scale * (ca * shear - sa);
    const double a21 = scale * sa, a22 = scale * (sa * shear + ca);
    return {a11, a12, c.x + t.x - a11 * c.x - a12 * c.y, a21, a22, c.y + t.y - a21 * c.x - a22 * c.y};
}

}  // namespace

SynthMode parse_synth_mode(std::string_view name) {
    if (name == "global") return SynthMode::Global;
    if (name == "quadsplit") return SynthMode::Quadsplit;
    if (name == "flip") return SynthMode::Flip;
    throw InvalidArgument("unknown synthetic mode: " + std::string(name));
}

const char* synth_mode_name(SynthMode mode) {
    switch (mode) {
        case SynthMode::Global: return "global";
        case SynthMode::Quadsplit: return "quadsplit";
        case SynthMode::Flip: return "flip";
    }
    return "global";
}

Affine2D random_global_affine(std::mt19937_64& rng, int height, int width, const SynthOptions& opts) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ls(std::log(opts.min_scale), std::log(opts.max_scale));
    // All five draws are taken unconditionally so forced modes keep the stream aligned.
    const double angle = deg(opts.max_rotation_deg) * u(rng);
    const double scale = std::exp(ls(rng));
    const double shear = opts.max_shear * u(rng);
    const Point2 t{opts.max_translation * width * u(rng), opts.max_translation * height * u(rng)};
    if (opts.identity) return Affine2D::identity();
    const Point2 c{(width - 1) / 2.0, (height - 1) / 2.0};
    if (opts.translation_only) return Affine2D::translation(t.x, t.y);
    return about_center(angle, scale, shear, t, c);
}

ObjectMask mapped_inside(const AffineField& field, int source_h, int source_w) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(field.height()) * field.width(), 0);
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x) {
            const Point2 q = apply_affine(field.at(y, x), {static_cast<double>(x), static_cast<double>(y)});
            m[static_cast<std::size_t>(y) * field.width() + x] =
                q.x >= 0.0 && q.y >= 0.0 && q.x <= source_w - 1.0 && q.y <= source_h - 1.0;
        }
    return ObjectMask(field.height(), field.width(), std::move(m));
}

SyntheticPair synth_pair(const Image& source, std::mt19937_64& rng, SynthMode mode, const SynthOptions& opts) {
    const int h = source.height(), w = source.width();
    if (std::min(h, w) < 64) throw InvalidArgument("synthetic pairs need a minimum side of 64 pixels");
    AffineField gt;
    switch (mode) {
        case SynthMode::Global:
            gt = AffineField(h, w, random_global_affine(rng, h, w, opts));
            break;
        case SynthMode::Flip: {
            SynthOptions mild = opts;
            mild.max_rotation_deg *= 0.5;
            mild.max_shear *= 0.5;
            mild.min_scale = std::sqrt(opts.min_scale);
            mild.max_scale = std::sqrt(opts.max_scale);
            const Affine2D a = random_global_affine(rng, h, w, mild);
            const Affine2D mirror{-1.0, 0.0, w - 1.0, 0.0, 1.0, 0.0};
            gt = AffineField(h, w, opts.identity ? Affine2D::identity() : compose(a, mirror));
            break;
        }
        case SynthMode::Quadsplit: {
            const Affine2D base = random_global_affine(rng, h, w, opts);
            GridAffineField grid(2, h, w);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    const double angle = deg(opts.quad_rotation_deg) * u(rng);
                    const double scale = 1.0 + opts.quad_scale * u(rng);
                    const Point2 t{opts.quad_translation * w * u(rng), opts.quad_translation * h * u(rng)};
                    const Affine2D local = about_center(angle, scale, 0.0, t, grid.cell_center(r, c));
                    grid.cell(r, c) = opts.identity ? Affine2D::identity()
                                      : opts.translation_only ? compose(base, Affine2D::translation(t.x, t.y))
                                                              : compose(base, local);
                }
            gt = grid_to_dense(grid);
            break;
        }
    }
    Image target = warp_image(source, gt);
    ObjectMask mask = mapped_inside(gt, h, w);
    return {source, std::move(target), std::move(gt), std::move(mask)};
}

Image procedural_texture(std::mt19937_64& rng, int height, int width) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(height, width, 1);
    const double gx = u(rng) - 0.5, gy = u(rng) - 0.5, g0 = u(rng);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at(y, x) = std::clamp(g0 + 0.3 * (gx * x / width + gy * y / height), 0.0, 1.0);
    const int shapes = std::max(40, height * width / 100);
    const double side = std::max(height, width);
    for (int s = 0; s < shapes; ++s) {
        // Sizes follow a power law so every pooling scale sees structure.
        const double size = side * 0.02 * std::pow(12.0, u(rng));
        const double cx = u(rng) * width, cy = u(rng) * height;
        const double value = u(rng);
        const bool disc = u(rng) < 0.5;
        const double aspect = 0.5 + u(rng);
        const double angle = u(rng) * std::numbers::pi;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const int x0 = std::max(0, static_cast<int>(cx - 1.5 * size)), x1 = std::min(width - 1, static_cast<int>(cx + 1.5 * size));
        const int y0 = std::max(0, static_cast<int>(cy - 1.5 * size)), y1 = std::min(height - 1, static_cast<int>(cy + 1.5 * size));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double a = (ca * dx + sa * dy) / size, b = (-sa * dx + ca * dy) / (size * aspect);
                const bool inside = disc ? a * a + b * b <= 1.0 : std::abs(a) <= 1.0 && std::abs(b) <= 1.0;
                if (inside) img.at(y, x) = value;
            }
    }
    return img;
}

}  // namespace affield
