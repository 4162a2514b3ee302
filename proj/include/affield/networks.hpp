#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "affield/autodiff.hpp"
#include "affield/cost_volume.hpp"
#include "affield/field.hpp"
#include "affield/net_params.hpp"

namespace affield {

struct GridArch {
    int level = 1;
    int in_channels = 1;
    std::vector<int> widths{32, 32, 64, 64};
};

struct PixelArch {
    int in_channels = 1;
    // stem, encoder stage 1, encoder stage 2
    std::vector<int> widths{16, 32, 64};
};

/// He-normal convolution kernels, zero biases. The 6-channel head is zero
/// unless head_scale > 0, in which case it is drawn with that std.
NetParams init_grid_regressor(const GridArch& arch, std::uint64_t seed, double head_scale = 0.0);
NetParams init_pixel_regressor(const PixelArch& arch, std::uint64_t seed, double head_scale = 0.0);

/// Reads the architecture back from a parameter set; throws ShapeError when
/// the blocks are not a grid (resp. pixel) regressor.
GridArch grid_arch_of(const NetParams& params);
PixelArch pixel_arch_of(const NetParams& params);
bool is_pixel_regressor(const NetParams& params);

/// (1, channels, H, W) network input from a cost volume.
Tensor4 volume_to_tensor(const CostVolume& c);

/// Graph leaves of a parameter set, one per block in block order.
std::vector<Var> param_leaves(Graph& g, const NetParams& params, bool track = true);
Gradients collect_gradients(const Graph& g, const NetParams& params, const std::vector<Var>& leaves);

/// Raw (1, 6, side, side) output of a grid regressor.
Var grid_network(Graph& g, const NetParams& params, const std::vector<Var>& leaves, Var input);
/// Raw (1, 6, H, W) output of a pixel regressor; H, W are the input dims.
Var pixel_network(Graph& g, const NetParams& params, const std::vector<Var>& leaves, Var input);

/// Cell layouts used to decode the raw outputs over an image.
CellLayout grid_layout(int level, int image_h, int image_w);
CellLayout pixel_layout(int rows, int cols, int image_h, int image_w);

GridAffineField forward_grid(const NetParams& params, const CostVolume& c, int level, int image_h, int image_w);
/// Per-pixel field at image resolution; the network runs at the volume's
/// resolution and its cells are interpolated onto the image grid.
AffineField forward_pixel(const NetParams& params, const CostVolume& c, int image_h, int image_w);

/// Mean squared flow error (1/N) sum ||T(p) - p - d||^2 of a dense field.
double loss_flow(const AffineField& field, std::span<const FlowTarget> targets);

struct GradCheckBlock {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_error = 0.0;
    std::string worst_block;
    bool passed = false;
};

/// Builds a scalar loss from parameter leaves.
using LossBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients with central differences. At most
/// per_block entries of each block are perturbed (0 = all), chosen with seed.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6). Blocks named meta.* are
/// skipped. fault corrupts one backward rule for mutation testing.
GradCheckReport grad_check(const NetParams& params, const LossBuilder& loss, double eps = 1e-4, double tol = 1e-3,
                           std::size_t per_block = 0, std::uint64_t seed = 0,
                           std::optional<LayerKind> fault = std::nullopt);

}  // namespace affield
