#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "affield/features.hpp"
#include "affield/geometry.hpp"

namespace affield {

/// Rectified cosine scores between every anchor pixel i and the counterpart
/// pixels j = i + (dx, dy) with |dx|, |dy| <= radius. Offsets are stored
/// row-major in (dy, dx), so channel order is lexicographic in (dy, dx).
/// Offsets landing outside the counterpart map hold 0.
class CostVolume {
public:
    CostVolume(int height, int width, int radius);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int radius() const noexcept { return radius_; }
    int window() const noexcept { return 2 * radius_ + 1; }
    int channels() const noexcept { return window() * window(); }

    int channel(int dx, int dy) const { return (dy + radius_) * window() + (dx + radius_); }
    Pixel offset_of(int channel) const { return {channel % window() - radius_, channel / window() - radius_}; }

    double score(Pixel i, int dx, int dy) const { return scores_[index(i.y, i.x, channel(dx, dy))]; }
    double& score(Pixel i, int dx, int dy) { return scores_[index(i.y, i.x, channel(dx, dy))]; }

    /// All window scores of anchor pixel i.
    std::span<const double> window_scores(Pixel i) const {
        return {scores_.data() + index(i.y, i.x, 0), static_cast<std::size_t>(channels())};
    }
    std::span<double> window_scores(Pixel i) {
        return {scores_.data() + index(i.y, i.x, 0), static_cast<std::size_t>(channels())};
    }

    const std::vector<double>& scores() const noexcept { return scores_; }
    bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }

    /// Bytes needed to store a volume of this shape.
    static std::size_t storage_bytes(int height, int width, int radius);

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels() + c;
    }

    int height_;
    int width_;
    int radius_;
    std::vector<double> scores_;
};

/// round-half-up(window_ratio * max(height, width)), at least 1.
int window_radius(double window_ratio, int height, int width);

inline constexpr std::size_t kDefaultVolumeBudget = std::size_t{1} << 30;

/// scores(i, j - i) = max(0, anchor(i) . counterpart(j)) for j in the window
/// around i. Both maps must be normalized and share H, W, D.
CostVolume build_constrained(const DescriptorMap& anchor, const DescriptorMap& counterpart,
                             double window_ratio, std::size_t byte_budget = kDefaultVolumeBudget);
CostVolume build_constrained_radius(const DescriptorMap& anchor, const DescriptorMap& counterpart,
                                    int radius, std::size_t byte_budget = kDefaultVolumeBudget);

/// In-image pixel j maximizing C(i, j). Ties go to the smallest (dy, dx).
Pixel best_forward(const CostVolume& c, Pixel i);

/// Anchor pixel m maximizing C(m, j) over all m whose window contains j. Ties
/// go to the smallest offset (dy, dx) = j - m.
Pixel best_backward(const CostVolume& c, Pixel j);

}  // namespace affield
