#include <doctest.h>

#include <random>

#include "affield/cost_volume.hpp"
#include "affield/error.hpp"
#include "test_support.hpp"

using namespace affield;

namespace {

DescriptorMap one_hot_map(int h, int w) {
    DescriptorMap m(h, w, h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at(y, x)[y * w + x] = 1.0;
    m.set_normalized(true);
    return m;
}

// Exhaustive argmax over in-image targets, scanning offsets in (dy, dx) order.
Pixel scan_forward(const CostVolume& c, Pixel i) {
    Pixel best{-1, -1};
    double s = -1.0;
    for (int dy = -c.radius(); dy <= c.radius(); ++dy)
        for (int dx = -c.radius(); dx <= c.radius(); ++dx) {
            const Pixel j{i.x + dx, i.y + dy};
            if (j.x < 0 || j.y < 0 || j.x >= c.width() || j.y >= c.height()) continue;
            if (c.score(i, dx, dy) > s) {
                s = c.score(i, dx, dy);
                best = j;
            }
        }
    return best;
}

// Transpose scan: every anchor m in the image whose window reaches j, ordered
// by the offset j - m.
Pixel scan_backward(const CostVolume& c, Pixel j) {
    Pixel best{-1, -1};
    double s = -1.0;
    const int r = c.radius();
    std::vector<std::pair<Pixel, Pixel>> cands;  // (offset, m)
    for (int my = 0; my < c.height(); ++my)
        for (int mx = 0; mx < c.width(); ++mx) {
            const int dx = j.x - mx, dy = j.y - my;
            if (std::abs(dx) > r || std::abs(dy) > r) continue;
            cands.push_back({{dx, dy}, {mx, my}});
        }
    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
        return a.first.y != b.first.y ? a.first.y < b.first.y : a.first.x < b.first.x;
    });
    for (const auto& [o, m] : cands) {
        if (c.score(m, o.x, o.y) > s) {
            s = c.score(m, o.x, o.y);
            best = m;
        }
    }
    return best;
}

CostVolume random_volume(std::mt19937_64& rng, int h, int w, int r) {
    CostVolume c(h, w, r);
    std::uniform_int_distribution<int> q(0, 6);  // coarse values produce ties
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const Pixel j{x + dx, y + dy};
                    if (c.contains(j)) c.score({x, y}, dx, dy) = q(rng) / 6.0;
                }
    return c;
}

}  // namespace

TEST_CASE("window radius rounding and schedule") {
    CHECK(window_radius(0.1, 128, 128) == 13);
    CHECK(window_radius(0.1, 15, 10) == 2);  // 1.5 rounds up
    CHECK(window_radius(0.01, 8, 8) == 1);
    int prev = 1 << 30;
    for (double ratio : {1.0 / 10, 1.0 / 10, 1.0 / 15, 1.0 / 15}) {
        const int r = window_radius(ratio, 128, 96);
        CHECK(r <= prev);
        prev = r;
    }
    CHECK_THROWS_AS(window_radius(0.0, 8, 8), InvalidArgument);
}

TEST_CASE("self-matching one-hot volume") {
    const auto m = one_hot_map(4, 4);
    const auto c = build_constrained_radius(m, m, 2);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) CHECK(c.score({x, y}, dx, dy) == ((dx == 0 && dy == 0) ? 1.0 : 0.0));
            CHECK(best_forward(c, {x, y}) == Pixel{x, y});
            CHECK(best_backward(c, {x, y}) == Pixel{x, y});
        }
}

TEST_CASE("negative correlation is rectified to zero") {
    DescriptorMap a(1, 2, 2), b(1, 2, 2);
    a.at(0, 0)[0] = 1;
    a.at(0, 1)[0] = 1;
    b.at(0, 0)[0] = 1;
    b.at(0, 1)[0] = -1;
    a.set_normalized(true);
    b.set_normalized(true);
    const auto c = build_constrained_radius(a, b, 1);
    CHECK(c.score({0, 0}, 0, 0) == 1.0);
    CHECK(c.score({0, 0}, 1, 0) == 0.0);
    CHECK(c.score({0, 0}, -1, 0) == 0.0);  // out of image
}

TEST_CASE("build_constrained equals the dot-product oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = testing::random_unit_map(rng, 4, 4, 3);
        const auto b = testing::random_unit_map(rng, 4, 4, 3);
        const auto c = build_constrained_radius(a, b, 2);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        double expected = 0.0;
                        if (x + dx >= 0 && x + dx < 4 && y + dy >= 0 && y + dy < 4) {
                            double dot = 0.0;
                            for (int d = 0; d < 3; ++d) dot += a.at(y, x)[d] * b.at(y + dy, x + dx)[d];
                            expected = dot > 0.0 ? dot : 0.0;
                        }
                        CHECK(c.score({x, y}, dx, dy) == expected);
                        CHECK(c.score({x, y}, dx, dy) <= 1.0 + 1e-6);
                    }
        // Swapping operands transposes the volume.
        const auto t = build_constrained_radius(b, a, 2);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const Pixel j{x + dx, y + dy};
                        if (!c.contains(j)) continue;
                        CHECK(c.score({x, y}, dx, dy) == t.score(j, -dx, -dy));
                    }
    }
}

TEST_CASE("argmax examples and exhaustive-scan oracles") {
    CostVolume c(5, 5, 2);
    c.score({2, 2}, 1, 0) = 0.9;
    CHECK(best_forward(c, {2, 2}) == Pixel{3, 2});
    CHECK(best_backward(c, {3, 2}) == Pixel{2, 2});

    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const auto v = random_volume(rng, 6, 5, 2);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 5; ++x) {
                CHECK(best_forward(v, {x, y}) == scan_forward(v, {x, y}));
                CHECK(best_backward(v, {x, y}) == scan_backward(v, {x, y}));
            }
    }
}

TEST_CASE("near-orthogonal descriptors self-match in the interior") {
    std::mt19937_64 rng(29);
    const auto m = testing::random_unit_map(rng, 8, 8, 64);
    const auto c = build_constrained(m, m, 0.25);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) CHECK(best_forward(c, {x, y}) == Pixel{x, y});
}

TEST_CASE("preconditions") {
    std::mt19937_64 rng(31);
    const auto a = testing::random_unit_map(rng, 4, 4, 3);
    DescriptorMap raw(4, 4, 3);
    for (auto& v : raw.data()) v = 2.0;
    CHECK_THROWS_AS(build_constrained(a, raw, 0.5), InvalidArgument);
    raw.set_normalized(true);
    CHECK_THROWS_AS(build_constrained(a, raw, 0.5), InvalidArgument);
    CHECK_THROWS_AS(build_constrained(a, testing::random_unit_map(rng, 4, 5, 3), 0.5), ShapeError);
    CHECK_THROWS_AS(build_constrained(a, testing::random_unit_map(rng, 4, 4, 2), 0.5), ShapeError);
    CHECK(CostVolume::storage_bytes(4, 4, 1) == 4 * 4 * 9 * 8);
    CHECK_THROWS_AS(build_constrained_radius(a, a, 1, 4 * 4 * 9 * 8 - 1), BudgetError);
    CHECK_NOTHROW(build_constrained_radius(a, a, 1, 4 * 4 * 9 * 8));
}
