#include "affield/cost_volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "affield/error.hpp"
#include "affield/parallel.hpp"

namespace affield {

CostVolume::CostVolume(int height, int width, int radius)
    : height_(height), width_(width), radius_(radius) {
    if (height <= 0 || width <= 0 || radius < 0) throw InvalidArgument("invalid cost volume shape");
    scores_.assign(static_cast<std::size_t>(height) * width * channels(), 0.0);
}

std::size_t CostVolume::storage_bytes(int height, int width, int radius) {
    const auto win = static_cast<std::size_t>(2 * radius + 1);
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * win * win * sizeof(double);
}

int window_radius(double window_ratio, int height, int width) {
    if (!(window_ratio > 0.0 && window_ratio <= 1.0)) throw InvalidArgument("window_ratio must be in (0, 1]");
    const double r = std::floor(window_ratio * std::max(height, width) + 0.5);
    return std::max(1, static_cast<int>(r));
}

CostVolume build_constrained(const DescriptorMap& anchor, const DescriptorMap& counterpart,
                             double window_ratio, std::size_t byte_budget) {
    return build_constrained_radius(anchor, counterpart,
                                    window_radius(window_ratio, anchor.height(), anchor.width()),
                                    byte_budget);
}

CostVolume build_constrained_radius(const DescriptorMap& anchor, const DescriptorMap& counterpart,
                                    int radius, std::size_t byte_budget) {
    if (anchor.height() != counterpart.height() || anchor.width() != counterpart.width() ||
        anchor.depth() != counterpart.depth()) {
        throw ShapeError("build_constrained: descriptor maps differ in shape");
    }
    if (!anchor.normalized() || !counterpart.normalized() || !anchor.check_unit_norms() ||
        !counterpart.check_unit_norms()) {
        throw InvalidArgument("build_constrained: descriptor maps must be L2-normalized");
    }
    if (radius < 1) throw InvalidArgument("build_constrained: radius must be >= 1");
    const int h = anchor.height();
    const int w = anchor.width();
    if (CostVolume::storage_bytes(h, w, radius) > byte_budget) {
        throw BudgetError("cost volume of " + std::to_string(CostVolume::storage_bytes(h, w, radius)) +
                          " bytes exceeds budget of " + std::to_string(byte_budget));
    }
    CostVolume vol(h, w, radius);
    const int depth = anchor.depth();
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
        for (auto y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
            for (int x = 0; x < w; ++x) {
                const auto a = anchor.at(y, x);
                auto out = vol.window_scores({x, y});
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int ty = y + dy;
                    if (ty < 0 || ty >= h) continue;
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int tx = x + dx;
                        if (tx < 0 || tx >= w) continue;
                        const auto t = counterpart.at(ty, tx);
                        double dot = 0.0;
                        for (int d = 0; d < depth; ++d) dot += a[d] * t[d];
                        out[vol.channel(dx, dy)] = std::max(0.0, dot);
                    }
                }
            }
        }
    });
    return vol;
}

Pixel best_forward(const CostVolume& c, Pixel i) {
    if (!c.contains(i)) throw InvalidArgument("best_forward: pixel out of bounds");
    const int r = c.radius();
    Pixel best = i;
    double best_score = -std::numeric_limits<double>::infinity();
    const auto s = c.window_scores(i);
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const Pixel j{i.x + dx, i.y + dy};
            if (!c.contains(j)) continue;
            const double v = s[c.channel(dx, dy)];
            if (v > best_score) {
                best_score = v;
                best = j;
            }
        }
    }
    return best;
}

Pixel best_backward(const CostVolume& c, Pixel j) {
    if (!c.contains(j)) throw InvalidArgument("best_backward: pixel out of bounds");
    const int r = c.radius();
    Pixel best = j;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const Pixel m{j.x - dx, j.y - dy};
            if (!c.contains(m)) continue;
            const double v = c.score(m, dx, dy);
            if (v > best_score) {
                best_score = v;
                best = m;
            }
        }
    }
    return best;
}

}  // namespace affield
