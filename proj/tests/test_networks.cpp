#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "affield/error.hpp"
#include "affield/networks.hpp"
#include "test_support.hpp"

using namespace affield;

namespace {

CostVolume random_volume(std::mt19937_64& rng, int h, int w, int r) {
    CostVolume c(h, w, r);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (double& s : c.window_scores({x, y})) s = u(rng);
    return c;
}

// Straight-line reference layers on single-item C x H x W arrays.
struct Map3 {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;
    double& at(int k, int y, int x) { return v[(static_cast<std::size_t>(k) * h + y) * w + x]; }
    double at(int k, int y, int x) const { return v[(static_cast<std::size_t>(k) * h + y) * w + x]; }
};

Map3 ref_conv(const Map3& in, const ParamBlock& wt, const ParamBlock& b, int stride, bool relu) {
    const int co = wt.dims[0], k = wt.dims[2], pad = k / 2;
    Map3 out{co, (in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1, {}};
    out.v.assign(static_cast<std::size_t>(out.c) * out.h * out.w, 0.0);
    for (int o = 0; o < co; ++o)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                double s = b.values[o];
                for (int i = 0; i < in.c; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int iy = y * stride - pad + ky, ix = x * stride - pad + kx;
                            if (iy < 0 || ix < 0 || iy >= in.h || ix >= in.w) continue;
                            s += wt.values[((static_cast<std::size_t>(o) * in.c + i) * k + ky) * k + kx] *
                                 in.at(i, iy, ix);
                        }
                out.at(o, y, x) = relu ? std::max(0.0, s) : s;
            }
    return out;
}

Map3 ref_maxpool(const Map3& in) {
    Map3 out{in.c, in.h / 2, in.w / 2, {}};
    out.v.resize(static_cast<std::size_t>(out.c) * out.h * out.w);
    for (int k = 0; k < in.c; ++k)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                out.at(k, y, x) = std::max({in.at(k, 2 * y, 2 * x), in.at(k, 2 * y, 2 * x + 1),
                                            in.at(k, 2 * y + 1, 2 * x), in.at(k, 2 * y + 1, 2 * x + 1)});
    return out;
}

Map3 ref_cell_mean(const Map3& in, int side) {
    Map3 out{in.c, side, side, std::vector<double>(static_cast<std::size_t>(in.c) * side * side, 0.0)};
    const int ch = in.h / side, cw = in.w / side;
    for (int k = 0; k < in.c; ++k)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) out.at(k, y / ch, x / cw) += in.at(k, y, x) / (ch * cw);
    return out;
}

Map3 ref_resize(const Map3& in, int oh, int ow) {
    Map3 out{in.c, oh, ow, std::vector<double>(static_cast<std::size_t>(in.c) * oh * ow)};
    for (int k = 0; k < in.c; ++k)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double sy = std::clamp((y + 0.5) * in.h / oh - 0.5, 0.0, in.h - 1.0);
                const double sx = std::clamp((x + 0.5) * in.w / ow - 0.5, 0.0, in.w - 1.0);
                const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
                const int y1 = std::min(y0 + 1, in.h - 1), x1 = std::min(x0 + 1, in.w - 1);
                const double fy = sy - y0, fx = sx - x0;
                out.at(k, y, x) = (1 - fy) * (1 - fx) * in.at(k, y0, x0) + (1 - fy) * fx * in.at(k, y0, x1) +
                                  fy * (1 - fx) * in.at(k, y1, x0) + fy * fx * in.at(k, y1, x1);
            }
    return out;
}

Map3 ref_concat(const Map3& a, const Map3& b) {
    Map3 out{a.c + b.c, a.h, a.w, a.v};
    out.v.insert(out.v.end(), b.v.begin(), b.v.end());
    return out;
}

Map3 volume_map(const CostVolume& c) {
    Map3 m{c.channels(), c.height(), c.width(), {}};
    m.v.resize(static_cast<std::size_t>(m.c) * m.h * m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x)
            for (int k = 0; k < m.c; ++k) m.at(k, y, x) = c.window_scores({x, y})[k];
    return m;
}

// Offset of each position from its cell center in half-cell units, for maps
// whose sides divide evenly into cells.
Map3 ref_cell_coords(int h, int w, int side) {
    Map3 m{2, h, w, std::vector<double>(static_cast<std::size_t>(2) * h * w)};
    const double cw = double(w) / side, ch = double(h) / side;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            m.at(0, y, x) = (x - (std::floor(x / cw) * cw + (cw - 1) / 2)) / (cw / 2);
            m.at(1, y, x) = (y - (std::floor(y / ch) * ch + (ch - 1) / 2)) / (ch / 2);
        }
    return m;
}

Affine2D ref_decode(const Map3& head, int r, int c, Point2 anchor, double w, double h) {
    const double q0 = head.at(0, r, c), q1 = head.at(1, r, c), q2 = head.at(2, r, c);
    const double q3 = head.at(3, r, c), q4 = head.at(4, r, c), q5 = head.at(5, r, c);
    return {1 + q0, q1, q2 * w - q0 * anchor.x - q1 * anchor.y, q3, 1 + q4, q5 * h - q3 * anchor.x - q4 * anchor.y};
}

void check_close(const Affine2D& a, const Affine2D& b, double tol) {
    const auto pa = a.params(), pb = b.params();
    for (int k = 0; k < 6; ++k) CHECK(pa[k] == doctest::Approx(pb[k]).epsilon(tol).scale(1.0));
}

std::vector<FlowTarget> random_targets(std::mt19937_64& rng, int n, int h, int w, double spread) {
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
    std::uniform_real_distribution<double> d(-spread, spread);
    std::vector<FlowTarget> t;
    for (int i = 0; i < n; ++i)
        t.push_back({{static_cast<double>(px(rng)), static_cast<double>(py(rng))}, {d(rng), d(rng)}});
    return t;
}

}  // namespace

TEST_CASE("zero head gives the identity grid at every level") {
    std::mt19937_64 rng(1);
    for (int level = 1; level <= 4; ++level) {
        const CostVolume c = random_volume(rng, 16, 16, 1);
        const NetParams p = init_grid_regressor({level, 9, {32, 32, 64, 64}}, 7);
        const GridAffineField g = forward_grid(p, c, level, 64, 64);
        CHECK(g.cells().size() == static_cast<std::size_t>(1) << (2 * (level - 1)));
        for (const auto& cell : g.cells()) CHECK(cell == Affine2D::identity());
    }
}

TEST_CASE("zero head gives the identity pixel field") {
    std::mt19937_64 rng(2);
    const CostVolume c = random_volume(rng, 12, 10, 1);
    const AffineField f = forward_pixel(init_pixel_regressor({9}, 3), c, 24, 20);
    CHECK(f.height() == 24);
    CHECK(f.width() == 20);
    CHECK(f.is_identity());
}

TEST_CASE("head bias becomes a translation in pixels") {
    std::mt19937_64 rng(3);
    const CostVolume c = random_volume(rng, 16, 16, 1);
    NetParams p = init_grid_regressor({2, 9, {8, 8, 8}}, 1);
    p.find("head.bias")->values = {0, 0, 2.0 / 128.0, 0, 0, 0};
    const GridAffineField g = forward_grid(p, c, 2, 128, 128);
    for (const auto& cell : g.cells()) CHECK(cell == Affine2D::translation(2.0, 0.0));

    NetParams q = init_pixel_regressor({9, {4, 4, 4}}, 1);
    q.find("head.bias")->values = {0.1, -0.05, 0.25, 0.02, 0.0, -0.125};
    const AffineField f = forward_pixel(q, c, 32, 32);
    const Affine2D first = f.at(0, 0);
    for (const auto& cell : f.cells()) CHECK(cell == first);
}

TEST_CASE("grid regressor matches a layer-by-layer reference") {
    std::mt19937_64 rng(4);
    for (int level : {1, 2, 3}) {
        const CostVolume c = random_volume(rng, 16, 16, 1);
        const NetParams p = init_grid_regressor({level, 9, {6, 5, 7, 4}}, 11 + level, 0.3);
        Map3 x = ref_concat(volume_map(c), ref_cell_coords(16, 16, 1 << (level - 1)));
        for (int i = 1; i <= 4; ++i) {
            const std::string n = "conv" + std::to_string(i);
            x = ref_conv(x, p.get(n + ".weight"), p.get(n + ".bias"), 1, true);
            if (i == 2 && 16 >= 4 * (1 << (level - 1))) x = ref_maxpool(x);
        }
        const int side = 1 << (level - 1);
        const Map3 head = ref_conv(ref_cell_mean(x, side), p.get("head.weight"), p.get("head.bias"), 1, false);
        const GridAffineField g = forward_grid(p, c, level, 80, 96);
        for (int r = 0; r < side; ++r)
            for (int q = 0; q < side; ++q)
                check_close(g.cell(r, q), ref_decode(head, r, q, g.cell_center(r, q), 96, 80), 1e-12);
    }
}

TEST_CASE("pixel regressor matches a layer-by-layer reference") {
    std::mt19937_64 rng(5);
    const CostVolume c = random_volume(rng, 10, 9, 1);
    const NetParams p = init_pixel_regressor({9, {4, 5, 6}}, 21, 0.3);
    const Map3 in = volume_map(c);
    const Map3 stem = ref_conv(in, p.get("stem.weight"), p.get("stem.bias"), 1, true);
    const Map3 e1 = ref_conv(stem, p.get("enc1.weight"), p.get("enc1.bias"), 2, true);
    const Map3 e2 = ref_conv(e1, p.get("enc2.weight"), p.get("enc2.bias"), 2, true);
    const Map3 d1 = ref_conv(ref_concat(ref_resize(e2, e1.h, e1.w), e1), p.get("dec1.weight"), p.get("dec1.bias"), 1, true);
    const Map3 d2 =
        ref_conv(ref_concat(ref_resize(d1, stem.h, stem.w), stem), p.get("dec2.weight"), p.get("dec2.bias"), 1, true);
    const Map3 head = ref_conv(d2, p.get("head.weight"), p.get("head.bias"), 1, false);
    // Image grid equal to the volume grid: cells land exactly on pixels.
    const AffineField f = forward_pixel(p, c, 10, 9);
    const Point2 center{4.0, 4.5};
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 9; ++x) check_close(f.at(y, x), ref_decode(head, y, x, center, 9, 10), 1e-12);
}

TEST_CASE("regressor input validation") {
    std::mt19937_64 rng(6);
    const CostVolume c = random_volume(rng, 16, 16, 2);
    const NetParams p = init_grid_regressor({1, 9}, 1);
    CHECK_THROWS_AS(forward_grid(p, c, 1, 64, 64), ShapeError);
    const CostVolume ok = random_volume(rng, 16, 16, 1);
    CHECK_THROWS_AS(forward_grid(p, ok, 2, 64, 64), ShapeError);
    CHECK_THROWS_AS(forward_pixel(p, ok, 64, 64), ShapeError);
    CHECK_THROWS_AS(forward_grid(init_pixel_regressor({9}, 1), ok, 1, 64, 64), ShapeError);
    CHECK_THROWS_AS(init_grid_regressor({1, 9, {8, 8}}, 1), InvalidArgument);
    CHECK_THROWS_AS(init_grid_regressor({1, 9, {8, 8, 8, 8, 8, 8, 8}}, 1), InvalidArgument);
    CHECK(grid_arch_of(p).widths == std::vector<int>{32, 32, 64, 64});
    CHECK(pixel_arch_of(init_pixel_regressor({25, {3, 4, 5}}, 1)).in_channels == 25);
}

TEST_CASE("gradient check: level-1 grid regressor on a 16x16 volume") {
    std::mt19937_64 rng(7);
    const CostVolume c = random_volume(rng, 16, 16, 1);
    const NetParams p = init_grid_regressor({1, 9, {32, 32, 64, 64}}, 5, 0.05);
    const auto layout = grid_layout(1, 64, 64);
    const auto targets = random_targets(rng, 40, 64, 64, 4.0);
    const Tensor4 input = volume_to_tensor(c);
    const LossBuilder build = [&](Graph& g, const std::vector<Var>& l) {
        return g.affine_flow_loss({{grid_network(g, p, l, g.constant(input)), &layout}}, targets);
    };
    const auto r = grad_check(p, build, 1e-4, 1e-3, 12, 3);
    for (const auto& b : r.blocks) {
        INFO(b.name, " ", b.max_rel_error);
        CHECK(b.max_rel_error < 1e-3);
    }
    CHECK(r.passed);

    const auto bad = grad_check(p, build, 1e-4, 1e-3, 12, 3, LayerKind::AvgPool);
    CHECK_FALSE(bad.passed);
    CHECK(bad.worst_block.rfind("conv", 0) == 0);
    for (const auto& b : bad.blocks)
        if (b.name.rfind("head", 0) == 0) CHECK(b.max_rel_error < 1e-3);
}

TEST_CASE("gradient check: level-2 grid under a fixed level-1 term") {
    std::mt19937_64 rng(8);
    const CostVolume c = random_volume(rng, 12, 12, 1);
    const NetParams p = init_grid_regressor({2, 9, {6, 6, 8}}, 9, 0.05);
    const auto l1 = grid_layout(1, 48, 48), l2 = grid_layout(2, 48, 48);
    const Tensor4 fixed({1, 6, 1, 1}, std::vector<double>{0.05, -0.02, 0.03, 0.01, -0.04, -0.02});
    const auto targets = random_targets(rng, 30, 48, 48, 3.0);
    const Tensor4 input = volume_to_tensor(c);
    const auto r = grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
        return g.affine_flow_loss({{g.constant(fixed), &l1}, {grid_network(g, p, l, g.constant(input)), &l2}},
                                  targets);
    });
    CHECK(r.passed);
}

TEST_CASE("gradient check: pixel regressor") {
    std::mt19937_64 rng(9);
    const CostVolume c = random_volume(rng, 8, 8, 1);
    const NetParams p = init_pixel_regressor({9, {4, 6, 8}}, 13, 0.05);
    const auto layout = pixel_layout(8, 8, 16, 16);
    const auto targets = random_targets(rng, 30, 16, 16, 2.0);
    const Tensor4 input = volume_to_tensor(c);
    const LossBuilder build = [&](Graph& g, const std::vector<Var>& l) {
        return g.affine_flow_loss({{pixel_network(g, p, l, g.constant(input)), &layout}}, targets);
    };
    const auto r = grad_check(p, build, 1e-4, 1e-3, 20, 4);
    for (const auto& b : r.blocks) {
        INFO(b.name, " ", b.max_rel_error);
        CHECK(b.max_rel_error < 1e-3);
    }
    CHECK_FALSE(grad_check(p, build, 1e-4, 1e-3, 20, 4, LayerKind::Upsample).passed);
    CHECK_FALSE(grad_check(p, build, 1e-4, 1e-3, 20, 4, LayerKind::Concat).passed);
}

TEST_CASE("gradient check in a zero-loss region") {
    std::mt19937_64 rng(10);
    const CostVolume c = random_volume(rng, 8, 8, 1);
    const NetParams p = init_grid_regressor({1, 9, {4, 4, 4}}, 2);
    const auto layout = grid_layout(1, 32, 32);
    const std::vector<FlowTarget> targets{{{3, 4}, {0, 0}}, {{10, 20}, {0, 0}}};
    const Tensor4 input = volume_to_tensor(c);
    const auto r = grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
        return g.affine_flow_loss({{grid_network(g, p, l, g.constant(input)), &layout}}, targets);
    });
    CHECK(r.passed);
}

TEST_CASE("loss_flow examples") {
    const AffineField id(8, 8);
    const std::vector<FlowTarget> one{{{0, 0}, {3, 4}}};
    CHECK(loss_flow(id, one) == 25.0);
    CHECK(loss_flow(AffineField(8, 8, Affine2D::translation(3, 4)), one) == 0.0);

    std::mt19937_64 rng(11);
    const auto targets = random_targets(rng, 20, 8, 8, 5.0);
    const Affine2D t{1.1, 0.05, 1.0, -0.02, 0.95, -0.5};
    const AffineField f(8, 8, t);
    // Doubling every residual: targets moved so each residual doubles.
    std::vector<FlowTarget> doubled = targets;
    for (auto& d : doubled) {
        const Point2 q = apply_affine(t, d.at);
        d.displacement = {2 * d.displacement.x - (q.x - d.at.x), 2 * d.displacement.y - (q.y - d.at.y)};
    }
    CHECK(loss_flow(f, doubled) == doctest::Approx(4.0 * loss_flow(f, targets)).epsilon(1e-12));
    CHECK_THROWS_AS(loss_flow(id, std::vector<FlowTarget>{}), InvalidArgument);
}

TEST_CASE("forward and update are deterministic") {
    std::mt19937_64 rng(12);
    const CostVolume c = random_volume(rng, 16, 16, 1);
    const auto targets = random_targets(rng, 20, 64, 64, 3.0);
    const auto layout = grid_layout(1, 64, 64);
    auto run = [&] {
        NetParams p = init_grid_regressor({1, 9, {8, 8, 8, 8}}, 77, 0.01);
        MomentumSgd opt;
        for (int it = 0; it < 3; ++it) {
            Graph g;
            const auto l = param_leaves(g, p);
            g.backward(g.affine_flow_loss({{grid_network(g, p, l, g.constant(volume_to_tensor(c))), &layout}}, targets));
            opt.step(p, collect_gradients(g, p, l));
        }
        return p;
    };
    const NetParams a = run();
    CHECK(a == run());
    CHECK_FALSE(a == init_grid_regressor({1, 9, {8, 8, 8, 8}}, 77, 0.01));
}

TEST_CASE("momentum update arithmetic") {
    NetParams p;
    p.blocks = {ParamBlock{"w", {2}, {1.0, -1.0}}};
    MomentumSgd opt(0.5, 0.9);
    opt.step(p, {{1.0, 2.0}});
    CHECK(p.blocks[0].values == std::vector<double>{0.5, -2.0});
    opt.step(p, {{1.0, 0.0}});
    // v = 0.9 * (1, 2) + (1, 0) = (1.9, 1.8)
    CHECK(p.blocks[0].values[0] == doctest::Approx(0.5 - 0.95));
    CHECK(p.blocks[0].values[1] == doctest::Approx(-2.0 - 0.9));
    CHECK_THROWS_AS(opt.step(p, {}), ShapeError);
}

TEST_CASE("PNP1 round trip and parse errors") {
    const NetParams p = init_grid_regressor({3, 25, {8, 8, 16}}, 0xDEADBEEFCAFEull, 0.1);
    const auto bytes = encode_params(p);
    CHECK(decode_params(bytes) == p);
    CHECK(decode_params(bytes).seed == 0xDEADBEEFCAFEull);
    CHECK(encode_params(decode_params(bytes)) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    try {
        decode_params(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseErrorKind::BadMagic);
    }
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 5);
    try {
        decode_params(cut);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ParseErrorKind::Truncated);
    }
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(decode_params(extra), ParseError);

    const auto path = std::filesystem::temp_directory_path() / "affield_pnp1_test.pnp";
    save_params(p, path);
    CHECK(load_params(path) == p);
    std::filesystem::remove(path);
}
