#include "affield/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "affield/error.hpp"

namespace affield {

namespace {

void stencil(int o, int out, int in, int& i0, int& i1, double& f) {
    const double u = std::clamp((o + 0.5) * in / out - 0.5, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<int>(std::floor(u));
    i1 = std::min(i0 + 1, in - 1);
    f = u - i0;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::pair<int, int> evaluation_size(int h, int w, int longest) {
    const double s = static_cast<double>(longest) / std::max(h, w);
    return {std::max(1, static_cast<int>(std::lround(h * s))), std::max(1, static_cast<int>(std::lround(w * s)))};
}

FlowField resize_flow(const FlowField& flow, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw InvalidArgument("resize target must be positive");
    const double sx = static_cast<double>(out_w) / flow.width(), sy = static_cast<double>(out_h) / flow.height();
    FlowField out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        int y0, y1;
        double fy;
        stencil(y, out_h, flow.height(), y0, y1, fy);
        for (int x = 0; x < out_w; ++x) {
            int x0, x1;
            double fx;
            stencil(x, out_w, flow.width(), x0, x1, fx);
            const Point2 a = flow.at(y0, x0), b = flow.at(y0, x1), c = flow.at(y1, x0), d = flow.at(y1, x1);
            const double dx = (1 - fy) * ((1 - fx) * a.x + fx * b.x) + fy * ((1 - fx) * c.x + fx * d.x);
            const double dy = (1 - fy) * ((1 - fx) * a.y + fx * b.y) + fy * ((1 - fx) * c.y + fx * d.y);
            out.set(y, x, {dx * sx, dy * sy});
        }
    }
    return out;
}

ObjectMask resize_mask(const ObjectMask& mask, int out_h, int out_w) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / out_h));
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / out_w));
            v[static_cast<std::size_t>(y) * out_w + x] = mask.at(sy, sx);
        }
    }
    return ObjectMask(out_h, out_w, std::move(v));
}

FlowAccuracyReport endpoint_accuracy(const FlowField& flow, const FlowField& gt, const ObjectMask& fg,
                                     double threshold) {
    if (flow.height() != gt.height() || flow.width() != gt.width() || fg.height() != gt.height() ||
        fg.width() != gt.width())
        throw ShapeError("flow, ground truth and mask must share dimensions");
    if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
    const auto [h, w] = evaluation_size(gt.height(), gt.width());
    const bool same = h == gt.height() && w == gt.width();
    const FlowField f = same ? flow : resize_flow(flow, h, w);
    const FlowField g = same ? gt : resize_flow(gt, h, w);
    const ObjectMask m = same ? fg : resize_mask(fg, h, w);
    std::size_t hit = 0, n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.at(y, x)) continue;
            const Point2 a = f.at(y, x), b = g.at(y, x);
            ++n;
            hit += std::hypot(a.x - b.x, a.y - b.y) < threshold;
        }
    return {threshold, static_cast<double>(hit) / static_cast<double>(n), n};
}

std::vector<FlowAccuracyReport> accuracy_sweep(const FlowField& flow, const FlowField& gt, const ObjectMask& fg) {
    std::vector<FlowAccuracyReport> out;
    for (int t = 1; t <= 15; ++t) out.push_back(endpoint_accuracy(flow, gt, fg, t));
    return out;
}

double mean_endpoint_error(const FlowField& flow, const FlowField& gt, const ObjectMask& fg) {
    if (flow.height() != gt.height() || flow.width() != gt.width() || fg.height() != gt.height() ||
        fg.width() != gt.width())
        throw ShapeError("flow, ground truth and mask must share dimensions");
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (!fg.at(y, x)) continue;
            const Point2 a = flow.at(y, x), b = gt.at(y, x);
            sum += std::hypot(a.x - b.x, a.y - b.y);
            ++n;
        }
    return sum / static_cast<double>(n);
}

double pck(std::span<const Point2> predicted, std::span<const Point2> truth, double box_h, double box_w,
           double alpha) {
    if (predicted.size() != truth.size()) throw ShapeError("keypoint lists differ in length");
    if (predicted.empty()) throw InvalidArgument("pck needs at least one keypoint");
    if (!(alpha > 0.0) || !(box_h > 0.0) || !(box_w > 0.0)) throw InvalidArgument("pck needs positive alpha and box");
    const double radius = alpha * std::max(box_h, box_w);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        hit += std::hypot(predicted[i].x - truth[i].x, predicted[i].y - truth[i].y) <= radius;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw ShapeError("masks differ in size");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] && b[i];
        uni += a[i] || b[i];
    }
    if (uni == 0) throw InvalidArgument("IoU of two empty masks is undefined");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Point2> transfer_points(const AffineField& field, std::span<const Point2> points) {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const Point2& p : points) {
        // Pixel centers are cells of a height x width grid.
        const CellWeights cw = cell_weights(field.height(), field.width(), field.height(), field.width(), p);
        const auto wts = cw.weights();
        std::array<double, 6> acc{};
        for (int q = 0; q < 4; ++q) {
            const auto c = field.cells()[static_cast<std::size_t>(cw.index[q])].params();
            for (int k = 0; k < 6; ++k) acc[k] += wts[q] * c[k];
        }
        out.push_back(apply_affine(Affine2D::from_params(acc), p));
    }
    return out;
}

std::vector<std::uint8_t> warp_mask(std::span<const std::uint8_t> mask, int mask_h, int mask_w,
                                    const AffineField& field) {
    if (mask.size() != static_cast<std::size_t>(mask_h) * mask_w) throw ShapeError("mask size mismatch");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(field.height()) * field.width(), 0);
    for (int y = 0; y < field.height(); ++y)
        for (int x = 0; x < field.width(); ++x) {
            const Point2 q = apply_affine(field.at(y, x), {static_cast<double>(x), static_cast<double>(y)});
            const long qx = std::lround(q.x), qy = std::lround(q.y);
            if (qx >= 0 && qy >= 0 && qx < mask_w && qy < mask_h)
                out[static_cast<std::size_t>(y) * field.width() + x] = mask[static_cast<std::size_t>(qy) * mask_w + qx] != 0;
        }
    return out;
}

void write_metric_csv(std::ostream& out, std::span<const MetricRow> rows) {
    out << "metric,param,value,count\n";
    for (const auto& r : rows) out << r.metric << ',' << r.param << ',' << fmt(r.value) << ',' << r.count << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const FlowAccuracyReport> sweep) {
    out << "threshold,accuracy,count\n";
    for (const auto& r : sweep) out << fmt(r.threshold) << ',' << fmt(r.fraction) << ',' << r.count << '\n';
}

}  // namespace affield
