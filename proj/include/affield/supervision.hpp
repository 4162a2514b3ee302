#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "affield/cost_volume.hpp"
#include "affield/field.hpp"
#include "affield/geometry.hpp"

namespace affield {

/// H x W foreground prior. Always holds at least one true pixel.
class ObjectMask {
public:
    ObjectMask(int height, int width, std::vector<std::uint8_t> values);
    /// Rectangle [x0, x1) x [y0, y1) clipped to the image.
    static ObjectMask from_box(int height, int width, int x0, int y0, int x1, int y1);
    static ObjectMask full(int height, int width);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    std::size_t count() const;
    const std::vector<std::uint8_t>& values() const noexcept { return values_; }

    /// Mask sampled at the descriptor grid of the given stride. Throws if no
    /// sampled pixel is set.
    ObjectMask subsample(int stride) const;

private:
    int height_;
    int width_;
    std::vector<std::uint8_t> values_;
};

struct Match {
    Pixel pixel;  // anchor pixel i
    Pixel match;  // forward best match f_i

    friend bool operator==(const Match&, const Match&) = default;
};

/// Consistency-verified matches for one level. Coordinates are on the
/// descriptor grid; image_point() maps them back to image pixels.
struct SampleSet {
    int level = 1;
    int height = 0;
    int width = 0;
    int stride = 1;
    std::vector<Match> samples;

    Point2 image_point(Pixel p) const {
        return {static_cast<double>(p.x * stride + stride / 2), static_cast<double>(p.y * stride + stride / 2)};
    }
    bool empty() const noexcept { return samples.empty(); }
    std::size_t size() const noexcept { return samples.size(); }
};

/// A supervision target in image coordinates: at pixel `at`, the field
/// should displace by `displacement` (T_i * i - i).
struct FlowTarget {
    Point2 at;
    Point2 displacement;
};

std::vector<FlowTarget> to_flow_targets(const SampleSet& samples);

/// S = { i in mask : best_backward(c, best_forward(c, i)) == i }, scanned in
/// row-major order.
SampleSet generate_samples(const CostVolume& c, const std::optional<ObjectMask>& mask = std::nullopt,
                           int level = 1, int stride = 1);

struct MsacOptions {
    int iterations = 500;
    double inlier_threshold_px = 2.0;
    std::uint64_t seed = 0;
};

struct MsacResult {
    Affine2D model;
    SampleSet inliers;
    double cost = 0.0;
};

/// Robust affine fit i -> f_i (image coordinates) with truncated squared
/// residual scoring, followed by a least-squares refit on the inliers.
/// Throws DegenerateError with fewer than 3 samples or collinear anchors.
MsacResult msac_affine(const SampleSet& samples, const MsacOptions& opts = {});

/// Least-squares affine through point pairs. Throws DegenerateError when
/// the source points do not span the plane.
Affine2D fit_affine_least_squares(std::span<const Point2> from, std::span<const Point2> to);

/// Keeps samples whose match lies within radius_px of apply(field(i), i).
/// The field is indexed at image resolution.
SampleSet filter_samples_by_field(const SampleSet& samples, const AffineField& field, double radius_px);

/// Diagnostic dump: header "# level k count N", then "i_x i_y f_x f_y" per
/// sample in image coordinates.
void write_sample_dump(std::ostream& out, const SampleSet& samples);

}  // namespace affield
