#include "affield/supervision.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "affield/error.hpp"
#include "affield/features.hpp"

namespace affield {

ObjectMask::ObjectMask(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (height <= 0 || width <= 0) throw InvalidArgument("mask dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(height) * width) throw ShapeError("mask size mismatch");
    if (count() == 0) throw InvalidArgument("object mask has no foreground pixel");
}

ObjectMask ObjectMask::from_box(int height, int width, int x0, int y0, int x1, int y1) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(height) * width, 0);
    for (int y = std::max(0, y0); y < std::min(height, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(width, x1); ++x) v[static_cast<std::size_t>(y) * width + x] = 1;
    return {height, width, std::move(v)};
}

ObjectMask ObjectMask::full(int height, int width) {
    return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1)};
}

std::size_t ObjectMask::count() const {
    return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), [](auto v) { return v != 0; }));
}

ObjectMask ObjectMask::subsample(int stride) const {
    const int gh = sampled_extent(height_, stride);
    const int gw = sampled_extent(width_, stride);
    std::vector<std::uint8_t> v(static_cast<std::size_t>(gh) * gw);
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx)
            v[static_cast<std::size_t>(gy) * gw + gx] = at(sample_coordinate(gy, stride), sample_coordinate(gx, stride));
    return {gh, gw, std::move(v)};
}

std::vector<FlowTarget> to_flow_targets(const SampleSet& s) {
    std::vector<FlowTarget> out;
    out.reserve(s.size());
    for (const auto& m : s.samples) {
        const Point2 i = s.image_point(m.pixel);
        const Point2 f = s.image_point(m.match);
        out.push_back({i, {f.x - i.x, f.y - i.y}});
    }
    return out;
}

SampleSet generate_samples(const CostVolume& c, const std::optional<ObjectMask>& mask, int level, int stride) {
    if (mask && (mask->height() != c.height() || mask->width() != c.width())) {
        throw ShapeError("generate_samples: mask dimensions differ from the cost volume");
    }
    SampleSet out{level, c.height(), c.width(), stride, {}};
    for (int y = 0; y < c.height(); ++y) {
        for (int x = 0; x < c.width(); ++x) {
            if (mask && !mask->at(y, x)) continue;
            const Pixel i{x, y};
            const Pixel f = best_forward(c, i);
            if (best_backward(c, f) == i) out.samples.push_back({i, f});
        }
    }
    return out;
}

namespace {

bool spans_plane(std::span<const Point2> pts) {
    if (pts.size() < 3) return false;
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    return tr > 0.0 && det > 1e-10 * tr * tr;
}

// Exact affine through three correspondences; nullopt when collinear.
std::optional<Affine2D> solve_three(const std::array<Point2, 3>& a, const std::array<Point2, 3>& b) {
    const double d = (a[1].x - a[0].x) * (a[2].y - a[0].y) - (a[2].x - a[0].x) * (a[1].y - a[0].y);
    const double scale = std::abs(a[1].x - a[0].x) + std::abs(a[1].y - a[0].y) + std::abs(a[2].x - a[0].x) +
                         std::abs(a[2].y - a[0].y);
    if (!(std::abs(d) > 1e-9 * scale * scale)) return std::nullopt;
    Eigen::Matrix3d m;
    for (int k = 0; k < 3; ++k) m.row(k) << a[k].x, a[k].y, 1.0;
    const Eigen::Vector3d bx(b[0].x, b[1].x, b[2].x);
    const Eigen::Vector3d by(b[0].y, b[1].y, b[2].y);
    const auto lu = m.partialPivLu();
    const Eigen::Vector3d rx = lu.solve(bx);
    const Eigen::Vector3d ry = lu.solve(by);
    return Affine2D{rx(0), rx(1), rx(2), ry(0), ry(1), ry(2)};
}

double residual_sq(const Affine2D& t, Point2 a, Point2 b) {
    const Point2 p = apply_affine(t, a);
    return (p.x - b.x) * (p.x - b.x) + (p.y - b.y) * (p.y - b.y);
}

}  // namespace

Affine2D fit_affine_least_squares(std::span<const Point2> from, std::span<const Point2> to) {
    if (from.size() != to.size()) throw ShapeError("fit_affine_least_squares: size mismatch");
    if (!spans_plane(from)) throw DegenerateError("affine fit needs at least 3 non-collinear points");
    // Centre for conditioning, then solve the 3x3 normal equations per row.
    double mx = 0, my = 0;
    for (const auto& p : from) {
        mx += p.x;
        my += p.y;
    }
    mx /= from.size();
    my /= from.size();
    Eigen::MatrixXd a(from.size(), 3);
    Eigen::VectorXd bx(from.size()), by(from.size());
    for (std::size_t k = 0; k < from.size(); ++k) {
        a.row(static_cast<Eigen::Index>(k)) << from[k].x - mx, from[k].y - my, 1.0;
        bx(static_cast<Eigen::Index>(k)) = to[k].x;
        by(static_cast<Eigen::Index>(k)) = to[k].y;
    }
    const auto qr = a.colPivHouseholderQr();
    const Eigen::Vector3d rx = qr.solve(bx);
    const Eigen::Vector3d ry = qr.solve(by);
    return {rx(0), rx(1), rx(2) - rx(0) * mx - rx(1) * my, ry(0), ry(1), ry(2) - ry(0) * mx - ry(1) * my};
}

MsacResult msac_affine(const SampleSet& samples, const MsacOptions& opts) {
    const std::size_t n = samples.size();
    std::vector<Point2> from(n), to(n);
    for (std::size_t k = 0; k < n; ++k) {
        from[k] = samples.image_point(samples.samples[k].pixel);
        to[k] = samples.image_point(samples.samples[k].match);
    }
    if (n < 3 || !spans_plane(from)) throw DegenerateError("MSAC needs at least 3 non-collinear samples");
    if (opts.iterations < 1 || !(opts.inlier_threshold_px > 0.0)) throw InvalidArgument("invalid MSAC options");

    const double th2 = opts.inlier_threshold_px * opts.inlier_threshold_px;
    auto cost_of = [&](const Affine2D& t) {
        double c = 0.0;
        for (std::size_t k = 0; k < n; ++k) c += std::min(residual_sq(t, from[k], to[k]), th2);
        return c;
    };

    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::optional<Affine2D> best;
    double best_cost = 0.0;
    for (int it = 0; it < opts.iterations; ++it) {
        std::size_t i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
        if (i0 == i1 || i0 == i2 || i1 == i2) continue;
        const auto h = solve_three({from[i0], from[i1], from[i2]}, {to[i0], to[i1], to[i2]});
        if (!h) continue;
        const double c = cost_of(*h);
        if (!best || c < best_cost) {
            best = h;
            best_cost = c;
        }
    }
    if (!best) throw DegenerateError("MSAC found no non-degenerate minimal sample");

    auto inliers_of = [&](const Affine2D& t) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < n; ++k)
            if (residual_sq(t, from[k], to[k]) <= th2) idx.push_back(k);
        return idx;
    };

    Affine2D model = *best;
    std::vector<std::size_t> inl = inliers_of(model);
    for (int round = 0; round < 10; ++round) {
        std::vector<Point2> a, b;
        for (auto k : inl) {
            a.push_back(from[k]);
            b.push_back(to[k]);
        }
        if (!spans_plane(a)) break;
        const Affine2D refit = fit_affine_least_squares(a, b);
        auto next = inliers_of(refit);
        // Accept the refit only if it does not lose support.
        if (next.size() < inl.size()) break;
        model = refit;
        if (next == inl) break;
        inl = std::move(next);
    }

    MsacResult res{model, SampleSet{samples.level, samples.height, samples.width, samples.stride, {}}, cost_of(model)};
    for (auto k : inliers_of(model)) res.inliers.samples.push_back(samples.samples[k]);
    return res;
}

SampleSet filter_samples_by_field(const SampleSet& samples, const AffineField& field, double radius_px) {
    SampleSet out{samples.level, samples.height, samples.width, samples.stride, {}};
    for (const auto& m : samples.samples) {
        const Point2 i = samples.image_point(m.pixel);
        const Point2 f = samples.image_point(m.match);
        const int ix = static_cast<int>(i.x), iy = static_cast<int>(i.y);
        if (ix < 0 || iy < 0 || ix >= field.width() || iy >= field.height()) {
            throw ShapeError("filter_samples_by_field: sample outside the field");
        }
        const Point2 p = apply_affine(field.at(iy, ix), i);
        if (std::hypot(p.x - f.x, p.y - f.y) <= radius_px) out.samples.push_back(m);
    }
    return out;
}

void write_sample_dump(std::ostream& out, const SampleSet& s) {
    out << "# level " << s.level << " count " << s.size() << '\n';
    for (const auto& m : s.samples) {
        const Point2 i = s.image_point(m.pixel);
        const Point2 f = s.image_point(m.match);
        out << i.x << ' ' << i.y << ' ' << f.x << ' ' << f.y << '\n';
    }
}

}  // namespace affield
