#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "affield/error.hpp"
#include "affield/eval.hpp"

using namespace affield;

namespace {

FlowField constant_flow(int h, int w, Point2 d) {
    FlowField f(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) f.set(y, x, d);
    return f;
}

FlowField random_flow(std::mt19937_64& rng, int h, int w, double spread) {
    std::uniform_real_distribution<double> u(-spread, spread);
    FlowField f(h, w);
    for (auto& v : f.data()) v = u(rng);
    return f;
}

}  // namespace

TEST_CASE("endpoint accuracy examples") {
    std::mt19937_64 rng(1);
    const FlowField gt = random_flow(rng, 100, 80, 10.0);
    const ObjectMask all = ObjectMask::full(100, 80);
    for (double t : {0.5, 1.0, 5.0}) CHECK(endpoint_accuracy(gt, gt, all, t).fraction == 1.0);

    FlowField off = gt;
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 80; ++x) off.set(y, x, {gt.at(y, x).x + 10.0, gt.at(y, x).y});
    CHECK(endpoint_accuracy(off, gt, all, 5.0).fraction == 0.0);

    // Left half exact, right half displaced by 6 px.
    FlowField half = gt;
    for (int y = 0; y < 100; ++y)
        for (int x = 40; x < 80; ++x) half.set(y, x, {gt.at(y, x).x, gt.at(y, x).y + 6.0});
    const auto r = endpoint_accuracy(half, gt, all, 5.0);
    CHECK(r.fraction == 0.5);
    CHECK(r.count == 8000);
}

TEST_CASE("endpoint accuracy uses a strict threshold") {
    const FlowField gt = constant_flow(50, 100, {0, 0});
    const FlowField f = constant_flow(50, 100, {3, 4});
    const ObjectMask all = ObjectMask::full(50, 100);
    CHECK(endpoint_accuracy(f, gt, all, 5.0).fraction == 0.0);
    CHECK(endpoint_accuracy(f, gt, all, 5.0 + 1e-9).fraction == 1.0);
}

TEST_CASE("evaluation resizes to a 100-pixel larger side and rescales flow") {
    CHECK(evaluation_size(200, 400) == std::pair<int, int>{50, 100});
    CHECK(evaluation_size(128, 128) == std::pair<int, int>{100, 100});
    const FlowField f = constant_flow(200, 400, {8.0, -4.0});
    const FlowField r = resize_flow(f, 50, 100);
    CHECK(r.at(10, 10).x == doctest::Approx(2.0));
    CHECK(r.at(10, 10).y == doctest::Approx(-1.0));
    // 8 px at full size is 2 px after resizing: below 5, above 1.
    const FlowField zero = constant_flow(200, 400, {0, 0});
    const ObjectMask all = ObjectMask::full(200, 400);
    CHECK(endpoint_accuracy(f, zero, all, 5.0).fraction == 1.0);
    CHECK(endpoint_accuracy(f, zero, all, 2.0).fraction == 0.0);
    CHECK(endpoint_accuracy(f, zero, all, 2.5).fraction == 1.0);
}

TEST_CASE("endpoint accuracy sweep is monotone and matches a direct count") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const FlowField gt = random_flow(rng, 100, 100, 20.0);
        const FlowField f = random_flow(rng, 100, 100, 20.0);
        std::vector<std::uint8_t> m(100 * 100);
        std::bernoulli_distribution b(0.6);
        for (auto& v : m) v = b(rng);
        const ObjectMask mask(100, 100, m);
        const auto sweep = accuracy_sweep(f, gt, mask);
        REQUIRE(sweep.size() == 15);
        for (std::size_t i = 0; i < sweep.size(); ++i) {
            std::size_t hit = 0, n = 0;
            for (int y = 0; y < 100; ++y)
                for (int x = 0; x < 100; ++x) {
                    if (!mask.at(y, x)) continue;
                    ++n;
                    const double dx = f.at(y, x).x - gt.at(y, x).x, dy = f.at(y, x).y - gt.at(y, x).y;
                    hit += std::sqrt(dx * dx + dy * dy) < static_cast<double>(i + 1);
                }
            CHECK(sweep[i].threshold == static_cast<double>(i + 1));
            CHECK(sweep[i].fraction == static_cast<double>(hit) / n);
            if (i > 0) CHECK(sweep[i].fraction >= sweep[i - 1].fraction);
        }
    }
}

TEST_CASE("endpoint accuracy errors") {
    const FlowField a = constant_flow(10, 10, {0, 0});
    const FlowField b = constant_flow(10, 12, {0, 0});
    CHECK_THROWS_AS(endpoint_accuracy(a, b, ObjectMask::full(10, 10)), ShapeError);
    CHECK_THROWS_AS(ObjectMask(10, 10, std::vector<std::uint8_t>(100, 0)), InvalidArgument);
}

TEST_CASE("pck examples, monotonicity and oracle") {
    const std::vector<Point2> truth{{10, 10}, {20, 30}, {50, 5}};
    CHECK(pck(truth, truth, 100, 80, 0.05) == 1.0);
    std::vector<Point2> moved = truth;
    for (auto& p : moved) p.x += 0.1 * 100 + 1.0;
    CHECK(pck(moved, truth, 100, 80, 0.1) == 0.0);
    std::vector<Point2> edge = truth;
    for (auto& p : edge) p.y += 5.0;
    CHECK(pck(edge, truth, 100, 80, 0.05) == 1.0);  // distance equal to the radius counts

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 12.0);
    std::uniform_real_distribution<double> u(0.0, 200.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Point2> t, p;
        for (int i = 0; i < 30; ++i) {
            t.push_back({u(rng), u(rng)});
            p.push_back({t.back().x + n(rng), t.back().y + n(rng)});
        }
        double prev = 0.0;
        for (double alpha : {0.01, 0.05, 0.1, 0.15, 0.2, 0.3}) {
            int hit = 0;
            for (int i = 0; i < 30; ++i) hit += std::hypot(p[i].x - t[i].x, p[i].y - t[i].y) <= alpha * 150.0;
            const double v = pck(p, t, 150.0, 120.0, alpha);
            CHECK(v == hit / 30.0);
            CHECK(v >= prev);
            prev = v;
        }
        // Invariant to a shared permutation.
        std::vector<std::size_t> idx(30);
        for (std::size_t i = 0; i < 30; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<Point2> ps, ts;
        for (auto i : idx) {
            ps.push_back(p[i]);
            ts.push_back(t[i]);
        }
        CHECK(pck(ps, ts, 150, 120, 0.1) == pck(p, t, 150, 120, 0.1));
    }
    CHECK_THROWS_AS(pck(std::vector<Point2>{}, std::vector<Point2>{}, 10, 10, 0.1), InvalidArgument);
    CHECK_THROWS_AS(pck(truth, std::vector<Point2>{{0, 0}}, 10, 10, 0.1), ShapeError);
}

TEST_CASE("mask IoU examples") {
    const int h = 10, w = 12;
    auto rect = [&](int x0, int y0, int x1, int y1) {
        std::vector<std::uint8_t> m(h * w, 0);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) m[y * w + x] = 1;
        return m;
    };
    const auto a = rect(0, 0, 6, 10);
    CHECK(mask_iou(a, a) == 1.0);
    CHECK(mask_iou(a, rect(6, 0, 12, 10)) == 0.0);
    // Two 6x10 rectangles overlapping in a 3x10 strip: 30 / 90.
    CHECK(mask_iou(a, rect(3, 0, 9, 10)) == doctest::Approx(1.0 / 3.0));
    const std::vector<std::uint8_t> empty(h * w, 0);
    CHECK_THROWS_AS(mask_iou(empty, empty), InvalidArgument);
    CHECK_THROWS_AS(mask_iou(a, std::vector<std::uint8_t>(5, 0)), ShapeError);
}

TEST_CASE("point transfer and mask warping") {
    AffineField f(20, 20, Affine2D::translation(2.0, -1.0));
    const std::vector<Point2> pts{{3.0, 4.0}, {7.5, 9.25}};
    const auto out = transfer_points(f, pts);
    CHECK(out[0] == Point2{5.0, 3.0});
    CHECK(out[1].x == doctest::Approx(9.5));
    // Interpolation between two columns with different translations.
    for (int y = 0; y < 20; ++y) f.at(y, 4) = Affine2D::translation(4.0, -1.0);
    const auto mid = transfer_points(f, std::vector<Point2>{{3.5, 2.0}});
    CHECK(mid[0].x == doctest::Approx(3.5 + 3.0));

    std::vector<std::uint8_t> m(20 * 20, 0);
    m[5 * 20 + 7] = 1;
    const auto w = warp_mask(m, 20, 20, AffineField(20, 20, Affine2D::translation(2.0, 1.0)));
    CHECK(w[4 * 20 + 5] == 1);
    CHECK(std::count(w.begin(), w.end(), 1) == 1);
}

TEST_CASE("report CSV formats") {
    std::ostringstream a;
    const std::vector<MetricRow> rows{{"endpoint_accuracy", "T=5", 0.75, 100}, {"pck", "alpha=0.1", 1.0, 3}};
    write_metric_csv(a, rows);
    CHECK(a.str() == "metric,param,value,count\nendpoint_accuracy,T=5,0.75,100\npck,alpha=0.1,1,3\n");
    std::ostringstream b;
    const std::vector<FlowAccuracyReport> sweep{{1, 0.25, 4}, {2, 0.5, 4}};
    write_sweep_csv(b, sweep);
    CHECK(b.str() == "threshold,accuracy,count\n1,0.25,4\n2,0.5,4\n");
}
