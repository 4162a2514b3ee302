#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "affield/field.hpp"
#include "affield/supervision.hpp"

namespace affield {

struct FlowAccuracyReport {
    double threshold = 5.0;
    double fraction = 0.0;
    std::size_t count = 0;
};

/// Bilinear resize of a flow field; vectors are multiplied by the per-axis
/// size ratio.
FlowField resize_flow(const FlowField& flow, int out_h, int out_w);
/// Nearest-sample resize; throws InvalidArgument if nothing survives.
ObjectMask resize_mask(const ObjectMask& mask, int out_h, int out_w);
/// Output size with the larger side equal to `longest`.
std::pair<int, int> evaluation_size(int h, int w, int longest = 100);

/// Fraction of foreground pixels whose endpoint error is strictly below
/// threshold, after resizing flows and mask so the larger side is 100.
FlowAccuracyReport endpoint_accuracy(const FlowField& flow, const FlowField& gt, const ObjectMask& fg,
                                     double threshold = 5.0);
/// endpoint_accuracy for thresholds 1..15.
std::vector<FlowAccuracyReport> accuracy_sweep(const FlowField& flow, const FlowField& gt, const ObjectMask& fg);

/// Mean endpoint error over the foreground at the flows' own resolution.
double mean_endpoint_error(const FlowField& flow, const FlowField& gt, const ObjectMask& fg);

/// Fraction of keypoints within alpha * max(box_h, box_w) of the truth.
double pck(std::span<const Point2> predicted, std::span<const Point2> truth, double box_h, double box_w,
           double alpha);
inline constexpr double kPckAlphas[] = {0.05, 0.1, 0.15};

/// |a & b| / |a | b| of two equally sized binary masks; both empty is an error.
double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Maps points of the field's domain through the field, interpolating the six
/// parameters bilinearly between pixels (clamped at the borders).
std::vector<Point2> transfer_points(const AffineField& field, std::span<const Point2> points);

/// Warps a mask defined on the field's codomain into the field's domain with
/// nearest sampling: out(i) = mask(round(T_i * i)), outside reads as empty.
std::vector<std::uint8_t> warp_mask(std::span<const std::uint8_t> mask, int mask_h, int mask_w,
                                    const AffineField& field);

struct MetricRow {
    std::string metric;
    std::string param;
    double value = 0.0;
    std::size_t count = 0;
};

/// CSV with header metric,param,value,count.
void write_metric_csv(std::ostream& out, std::span<const MetricRow> rows);
/// CSV with header threshold,accuracy,count.
void write_sweep_csv(std::ostream& out, std::span<const FlowAccuracyReport> sweep);

}  // namespace affield
