#include "affield/networks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "affield/error.hpp"

namespace affield {

namespace {

constexpr const char* kLevelBlock = "meta.level";
constexpr int kCoordChannels = 2;
constexpr const char* kPixelStages[] = {"stem", "enc1", "enc2", "dec1", "dec2"};

void add_conv(NetParams& p, const std::string& name, int co, int ci, int k, std::mt19937_64& rng, double std) {
    ParamBlock w{name + ".weight", {static_cast<std::uint32_t>(co), static_cast<std::uint32_t>(ci),
                                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k)}, {}};
    w.values.resize(w.count());
    if (std > 0.0) {
        std::normal_distribution<double> nd(0.0, std);
        for (auto& v : w.values) v = nd(rng);
    }
    p.blocks.push_back(std::move(w));
    p.blocks.push_back(ParamBlock{name + ".bias", {static_cast<std::uint32_t>(co)},
                                  std::vector<double>(static_cast<std::size_t>(co), 0.0)});
}

double he_std(int ci, int k) { return std::sqrt(2.0 / (ci * k * k)); }

std::size_t block_index(const NetParams& p, const std::string& name) {
    for (std::size_t i = 0; i < p.blocks.size(); ++i)
        if (p.blocks[i].name == name) return i;
    throw ShapeError("parameter block missing: " + name);
}

Var conv_block(Graph& g, const NetParams& p, const std::vector<Var>& leaves, const std::string& name, Var x,
               int stride, bool relu) {
    const auto& w = p.blocks[block_index(p, name + ".weight")];
    const int k = static_cast<int>(w.dims.at(2));
    Var y = g.conv2d(x, leaves[block_index(p, name + ".weight")], leaves[block_index(p, name + ".bias")], stride,
                     k / 2);
    return relu ? g.relu(y) : y;
}

int level_of(const NetParams& p) {
    const ParamBlock* b = p.find(kLevelBlock);
    if (!b || b->values.size() != 1) throw ShapeError("parameters carry no level tag");
    return static_cast<int>(b->values[0]);
}

bool pools_after_second(int h, int w, int side) { return std::min(h, w) >= 4 * side; }

// Two channels holding each position's offset from the center of its output
// cell, in units of the half cell size. Cells follow avg_pool_cells bounds.
Tensor4 cell_coordinates(int h, int w, int side) {
    Tensor4 t({1, kCoordChannels, h, w});
    auto fill = [&](int n, int axis) {
        for (int c = 0; c < side; ++c) {
            const int b = c * n / side, e = (c + 1) * n / side;
            const double center = 0.5 * (b + e - 1), half = 0.5 * (e - b);
            for (int i = b; i < e; ++i) {
                const double v = (i - center) / half;
                if (axis == 0)
                    for (int y = 0; y < h; ++y) t.at(0, 0, y, i) = v;
                else
                    for (int x = 0; x < w; ++x) t.at(0, 1, i, x) = v;
            }
        }
    };
    fill(w, 0);
    fill(h, 1);
    return t;
}

}  // namespace

NetParams init_grid_regressor(const GridArch& arch, std::uint64_t seed, double head_scale) {
    if (arch.level < 1 || arch.level > 16) throw InvalidArgument("grid level must be in 1..16");
    if (arch.widths.size() < 3 || arch.widths.size() > 6) throw InvalidArgument("grid regressor needs 3-6 conv layers");
    if (arch.in_channels < 1) throw InvalidArgument("input channel count must be positive");
    NetParams p;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    int ci = arch.in_channels + kCoordChannels;
    for (std::size_t i = 0; i < arch.widths.size(); ++i) {
        add_conv(p, "conv" + std::to_string(i + 1), arch.widths[i], ci, 3, rng, he_std(ci, 3));
        ci = arch.widths[i];
    }
    add_conv(p, "head", 6, ci, 1, rng, head_scale);
    p.blocks.push_back(ParamBlock{kLevelBlock, {1}, {static_cast<double>(arch.level)}});
    return p;
}

NetParams init_pixel_regressor(const PixelArch& arch, std::uint64_t seed, double head_scale) {
    if (arch.widths.size() != 3) throw InvalidArgument("pixel regressor needs three stage widths");
    if (arch.in_channels < 1) throw InvalidArgument("input channel count must be positive");
    const int w0 = arch.widths[0], w1 = arch.widths[1], w2 = arch.widths[2];
    NetParams p;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    add_conv(p, "stem", w0, arch.in_channels, 3, rng, he_std(arch.in_channels, 3));
    add_conv(p, "enc1", w1, w0, 3, rng, he_std(w0, 3));
    add_conv(p, "enc2", w2, w1, 3, rng, he_std(w1, 3));
    add_conv(p, "dec1", w1, w2 + w1, 3, rng, he_std(w2 + w1, 3));
    add_conv(p, "dec2", w0, w1 + w0, 3, rng, he_std(w1 + w0, 3));
    add_conv(p, "head", 6, w0, 1, rng, head_scale);
    p.blocks.push_back(ParamBlock{kLevelBlock, {1}, {0.0}});
    return p;
}

bool is_pixel_regressor(const NetParams& params) { return level_of(params) == 0; }

GridArch grid_arch_of(const NetParams& params) {
    GridArch a;
    a.level = level_of(params);
    if (a.level < 1) throw ShapeError("parameters are not a grid regressor");
    a.widths.clear();
    for (int i = 1;; ++i) {
        const ParamBlock* w = params.find("conv" + std::to_string(i) + ".weight");
        if (!w) break;
        if (w->dims.size() != 4) throw ShapeError("conv kernel must have rank 4");
        if (i == 1) a.in_channels = static_cast<int>(w->dims[1]) - kCoordChannels;
        a.widths.push_back(static_cast<int>(w->dims[0]));
    }
    if (a.widths.empty()) throw ShapeError("grid regressor has no conv layers");
    if (a.in_channels < 1) throw ShapeError("grid regressor input layer is too narrow");
    return a;
}

PixelArch pixel_arch_of(const NetParams& params) {
    if (level_of(params) != 0) throw ShapeError("parameters are not a pixel regressor");
    PixelArch a;
    const auto& stem = params.get("stem.weight");
    a.in_channels = static_cast<int>(stem.dims.at(1));
    a.widths = {static_cast<int>(stem.dims[0]), static_cast<int>(params.get("enc1.weight").dims.at(0)),
                static_cast<int>(params.get("enc2.weight").dims.at(0))};
    return a;
}

Tensor4 volume_to_tensor(const CostVolume& c) {
    const int h = c.height(), w = c.width(), ch = c.channels();
    Tensor4 t({1, ch, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto s = c.window_scores({x, y});
            for (int k = 0; k < ch; ++k) t.at(0, k, y, x) = s[k];
        }
    return t;
}

std::vector<Var> param_leaves(Graph& g, const NetParams& params, bool track) {
    std::vector<Var> out;
    out.reserve(params.blocks.size());
    for (const auto& b : params.blocks) {
        Tensor4 t(b.shape4(), b.values);
        const bool meta = b.name.rfind("meta.", 0) == 0;
        out.push_back(track && !meta ? g.leaf(std::move(t)) : g.constant(std::move(t)));
    }
    return out;
}

Gradients collect_gradients(const Graph& g, const NetParams& params, const std::vector<Var>& leaves) {
    Gradients out = zero_gradients(params);
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        const Tensor4& gr = g.grad(leaves[i]);
        if (gr.size() == out[i].size()) std::copy(gr.values().begin(), gr.values().end(), out[i].begin());
    }
    return out;
}

Var grid_network(Graph& g, const NetParams& params, const std::vector<Var>& leaves, Var input) {
    const GridArch a = grid_arch_of(params);
    const Shape4 s = g.value(input).shape();
    if (s.c != a.in_channels) throw ShapeError("cost volume channels do not match the grid regressor");
    const int side = 1 << (a.level - 1);
    if (s.h < side || s.w < side) throw ShapeError("cost volume smaller than the output grid");
    Var x = g.concat_channels(input, g.constant(cell_coordinates(s.h, s.w, side)));
    for (std::size_t i = 0; i < a.widths.size(); ++i) {
        x = conv_block(g, params, leaves, "conv" + std::to_string(i + 1), x, 1, true);
        if (i == 1 && pools_after_second(s.h, s.w, side)) x = g.max_pool2(x);
    }
    x = g.avg_pool_cells(x, side, side);
    return conv_block(g, params, leaves, "head", x, 1, false);
}

Var pixel_network(Graph& g, const NetParams& params, const std::vector<Var>& leaves, Var input) {
    const PixelArch a = pixel_arch_of(params);
    const Shape4 s = g.value(input).shape();
    if (s.c != a.in_channels) throw ShapeError("cost volume channels do not match the pixel regressor");
    if (s.h < 4 || s.w < 4) throw ShapeError("pixel regressor input must be at least 4x4");
    const Var stem = conv_block(g, params, leaves, kPixelStages[0], input, 1, true);
    const Var e1 = conv_block(g, params, leaves, kPixelStages[1], stem, 2, true);
    const Var e2 = conv_block(g, params, leaves, kPixelStages[2], e1, 2, true);
    const Shape4 s1 = g.value(e1).shape();
    Var d = g.upsample_bilinear(e2, s1.h, s1.w);
    d = conv_block(g, params, leaves, kPixelStages[3], g.concat_channels(d, e1), 1, true);
    d = g.upsample_bilinear(d, s.h, s.w);
    d = conv_block(g, params, leaves, kPixelStages[4], g.concat_channels(d, stem), 1, true);
    return conv_block(g, params, leaves, "head", d, 1, false);
}

CellLayout grid_layout(int level, int image_h, int image_w) {
    const int side = 1 << (level - 1);
    return CellLayout::centered(side, side, image_h, image_w);
}

CellLayout pixel_layout(int rows, int cols, int image_h, int image_w) {
    return CellLayout::image_anchored(rows, cols, image_h, image_w);
}

GridAffineField forward_grid(const NetParams& params, const CostVolume& c, int level, int image_h, int image_w) {
    if (grid_arch_of(params).level != level) throw ShapeError("parameters were built for a different level");
    Graph g;
    const auto leaves = param_leaves(g, params, false);
    const Var raw = grid_network(g, params, leaves, g.constant(volume_to_tensor(c)));
    const auto cells = cells_from_raw(g.value(raw), grid_layout(level, image_h, image_w));
    GridAffineField out(level, image_h, image_w);
    std::copy(cells.begin(), cells.end(), out.cells().begin());
    return out;
}

AffineField forward_pixel(const NetParams& params, const CostVolume& c, int image_h, int image_w) {
    Graph g;
    const auto leaves = param_leaves(g, params, false);
    const Var raw = pixel_network(g, params, leaves, g.constant(volume_to_tensor(c)));
    const auto cells = cells_from_raw(g.value(raw), pixel_layout(c.height(), c.width(), image_h, image_w));
    return upsample_cells(cells, c.height(), c.width(), image_h, image_w);
}

double loss_flow(const AffineField& field, std::span<const FlowTarget> targets) {
    if (targets.empty()) throw InvalidArgument("loss_flow: empty sample set");
    double sum = 0.0;
    for (const auto& t : targets) {
        const int x = static_cast<int>(std::lround(t.at.x));
        const int y = static_cast<int>(std::lround(t.at.y));
        if (x < 0 || y < 0 || x >= field.width() || y >= field.height())
            throw InvalidArgument("loss_flow: sample outside the field");
        const Point2 q = apply_affine(field.at(y, x), t.at);
        const double rx = q.x - t.at.x - t.displacement.x;
        const double ry = q.y - t.at.y - t.displacement.y;
        sum += rx * rx + ry * ry;
    }
    return sum / static_cast<double>(targets.size());
}

GradCheckReport grad_check(const NetParams& params, const LossBuilder& loss, double eps, double tol,
                           std::size_t per_block, std::uint64_t seed, std::optional<LayerKind> fault) {
    Graph g;
    g.inject_fault(fault);
    auto leaves = param_leaves(g, params);
    g.backward(loss(g, leaves));
    const Gradients analytic = collect_gradients(g, params, leaves);

    auto eval = [&](const NetParams& p) {
        Graph h;
        const auto lv = param_leaves(h, p, false);
        return h.value(loss(h, lv))[0];
    };

    GradCheckReport report;
    std::mt19937_64 rng(seed);
    NetParams work = params;
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        const auto& block = params.blocks[b];
        if (block.name.rfind("meta.", 0) == 0) continue;
        std::vector<std::size_t> idx(block.values.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (per_block > 0 && idx.size() > per_block) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(per_block);
            std::sort(idx.begin(), idx.end());
        }
        GradCheckBlock entry{block.name, idx.size(), 0.0};
        for (std::size_t i : idx) {
            const double orig = work.blocks[b].values[i];
            work.blocks[b].values[i] = orig + eps;
            const double up = eval(work);
            work.blocks[b].values[i] = orig - eps;
            const double down = eval(work);
            work.blocks[b].values[i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[b][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        if (report.worst_block.empty() || entry.max_rel_error > report.max_rel_error) {
            report.max_rel_error = entry.max_rel_error;
            report.worst_block = entry.name;
        }
        report.blocks.push_back(std::move(entry));
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

}  // namespace affield
