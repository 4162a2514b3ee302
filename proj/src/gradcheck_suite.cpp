#include "affield/gradcheck_suite.hpp"

#include <random>

namespace affield {

namespace {

Tensor4 random_tensor(std::mt19937_64& rng, Shape4 s, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor4 t(s);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// Values bounded away from zero so a perturbation never crosses a kink.
Tensor4 kink_free(std::mt19937_64& rng, Shape4 s) {
    Tensor4 t = random_tensor(rng, s, 0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.values())
        if (sign(rng)) v = -v;
    return t;
}

ParamBlock block_of(const std::string& name, const Tensor4& t) {
    const Shape4 s = t.shape();
    return {name,
            {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
             static_cast<std::uint32_t>(s.w)},
            t.values()};
}

CostVolume random_volume(std::mt19937_64& rng, int h, int w, int r) {
    CostVolume c(h, w, r);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (double& s : c.window_scores({x, y})) s = u(rng);
    return c;
}

std::vector<FlowTarget> random_targets(std::mt19937_64& rng, int n, int h, int w, double spread) {
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
    std::uniform_real_distribution<double> d(-spread, spread);
    std::vector<FlowTarget> t;
    for (int i = 0; i < n; ++i)
        t.push_back({{static_cast<double>(px(rng)), static_cast<double>(py(rng))}, {d(rng), d(rng)}});
    return t;
}

using Build = std::function<Var(Graph&, const std::vector<Var>&)>;

// Checks sum(layer(params) * probe) for a fixed random probe.
GradCheckReport probed(std::mt19937_64& rng, const NetParams& p, const Build& layer, std::optional<LayerKind> fault) {
    Tensor4 probe;
    {
        Graph g;
        probe = random_tensor(rng, g.value(layer(g, param_leaves(g, p))).shape());
    }
    return grad_check(
        p, [&](Graph& g, const std::vector<Var>& l) { return g.weighted_sum(layer(g, l), probe); }, 1e-4, 1e-3, 0, 0,
        fault);
}

}  // namespace

std::vector<NamedGradCheck> run_gradcheck_suite(std::optional<LayerKind> fault) {
    std::vector<NamedGradCheck> out;
    std::mt19937_64 rng(3);

    NetParams conv;
    conv.blocks = {block_of("x", random_tensor(rng, {2, 3, 6, 5})), block_of("w", random_tensor(rng, {4, 3, 3, 3})),
                   block_of("b", random_tensor(rng, {1, 1, 1, 4}))};
    for (int stride : {1, 2})
        out.push_back({"conv_stride" + std::to_string(stride),
                       probed(rng, conv, [stride](Graph& g, const std::vector<Var>& l) {
                           return g.conv2d(l[0], l[1], l[2], stride, 1);
                       }, fault)});

    NetParams xy;
    xy.blocks = {block_of("x", kink_free(rng, {1, 2, 6, 8})), block_of("y", random_tensor(rng, {1, 3, 6, 8}))};
    out.push_back({"relu", probed(rng, xy, [](Graph& g, const std::vector<Var>& l) { return g.relu(l[0]); }, fault)});
    out.push_back({"avg_pool", probed(rng, xy, [](Graph& g, const std::vector<Var>& l) {
                       return g.avg_pool_cells(l[0], 4, 3);
                   }, fault)});
    out.push_back({"max_pool",
                   probed(rng, xy, [](Graph& g, const std::vector<Var>& l) { return g.max_pool2(l[0]); }, fault)});
    out.push_back({"upsample", probed(rng, xy, [](Graph& g, const std::vector<Var>& l) {
                       return g.upsample_bilinear(l[0], 11, 13);
                   }, fault)});
    out.push_back({"concat", probed(rng, xy, [](Graph& g, const std::vector<Var>& l) {
                       return g.concat_channels(l[0], l[1]);
                   }, fault)});
    out.push_back({"add", probed(rng, xy, [](Graph& g, const std::vector<Var>& l) {
                       return g.add(l[0], g.upsample_bilinear(g.avg_pool_cells(l[0], 3, 4), 6, 8));
                   }, fault)});

    NetParams dense;
    dense.blocks = {block_of("x", random_tensor(rng, {3, 2, 2, 2})), block_of("w", random_tensor(rng, {1, 1, 4, 8})),
                    block_of("b", random_tensor(rng, {1, 1, 1, 4}))};
    out.push_back({"dense", probed(rng, dense, [](Graph& g, const std::vector<Var>& l) {
                       return g.dense(l[0], l[1], l[2]);
                   }, fault)});

    {
        const int h = 16, w = 16;
        const CellLayout l1 = CellLayout::centered(1, 1, h, w);
        const CellLayout l2 = CellLayout::centered(2, 2, h, w);
        const CellLayout l3 = CellLayout::image_anchored(4, 4, h, w);
        NetParams p;
        p.blocks = {block_of("level1", random_tensor(rng, {1, 6, 1, 1}, -0.1, 0.1)),
                    block_of("level2", random_tensor(rng, {1, 6, 2, 2}, -0.1, 0.1)),
                    block_of("level3", random_tensor(rng, {1, 6, 4, 4}, -0.1, 0.1))};
        const auto targets = random_targets(rng, 25, h, w, 3.0);
        out.push_back({"affine_flow_loss", grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
                           return g.affine_flow_loss({{l[0], &l1}, {l[1], &l2}, {l[2], &l3}}, targets);
                       }, 1e-4, 1e-3, 0, 0, fault)});
    }

    {
        std::mt19937_64 r(7);
        const CostVolume c = random_volume(r, 16, 16, 1);
        const NetParams p = init_grid_regressor({1, 9, {32, 32, 64, 64}}, 5, 0.05);
        const auto layout = grid_layout(1, 64, 64);
        const auto targets = random_targets(r, 40, 64, 64, 4.0);
        const Tensor4 input = volume_to_tensor(c);
        out.push_back({"grid_regressor_level1", grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
                           return g.affine_flow_loss({{grid_network(g, p, l, g.constant(input)), &layout}}, targets);
                       }, 1e-4, 1e-3, 12, 3, fault)});
    }
    {
        std::mt19937_64 r(8);
        const CostVolume c = random_volume(r, 12, 12, 1);
        const NetParams p = init_grid_regressor({2, 9, {6, 6, 8}}, 9, 0.05);
        const auto l1 = grid_layout(1, 48, 48), l2 = grid_layout(2, 48, 48);
        const Tensor4 fixed({1, 6, 1, 1}, std::vector<double>{0.05, -0.02, 0.03, 0.01, -0.04, -0.02});
        const auto targets = random_targets(r, 30, 48, 48, 3.0);
        const Tensor4 input = volume_to_tensor(c);
        out.push_back({"grid_regressor_level2", grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
                           return g.affine_flow_loss(
                               {{g.constant(fixed), &l1}, {grid_network(g, p, l, g.constant(input)), &l2}}, targets);
                       }, 1e-4, 1e-3, 0, 0, fault)});
    }
    {
        std::mt19937_64 r(9);
        const CostVolume c = random_volume(r, 8, 8, 1);
        const NetParams p = init_pixel_regressor({9, {4, 6, 8}}, 13, 0.05);
        const auto layout = pixel_layout(8, 8, 16, 16);
        const auto targets = random_targets(r, 30, 16, 16, 2.0);
        const Tensor4 input = volume_to_tensor(c);
        out.push_back({"pixel_regressor", grad_check(p, [&](Graph& g, const std::vector<Var>& l) {
                           return g.affine_flow_loss({{pixel_network(g, p, l, g.constant(input)), &layout}}, targets);
                       }, 1e-4, 1e-3, 20, 4, fault)});
    }
    return out;
}

}  // namespace affield
