#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affield/geometry.hpp"
#include "affield/supervision.hpp"
#include "affield/tensor.hpp"

namespace affield {

/// Handle to a node in a Graph.
struct Var {
    int id = -1;
};

enum class LayerKind { Conv, Relu, AvgPool, MaxPool, Upsample, Dense, Concat, Add, AffineLoss, Reduce };

const char* layer_name(LayerKind kind);

/// How raw 6-channel regressor outputs become affine maps for one output grid.
/// Raw values (r0..r5) at a cell with anchor c give
///   T(x) = x + [[r0, r1], [r3, r4]] (x - c) + (r2 * scale_x, r5 * scale_y),
/// so all-zero outputs are the identity and translations are predicted as a
/// fraction of the image size.
struct CellLayout {
    int rows = 1;
    int cols = 1;
    int image_h = 1;
    int image_w = 1;
    std::vector<Point2> anchors;  // rows * cols, row-major
    double scale_x = 1.0;
    double scale_y = 1.0;

    /// Anchors at the cell centers, translation scaled by the image size.
    static CellLayout centered(int rows, int cols, int image_h, int image_w);
    /// Every cell anchored at the image center.
    static CellLayout image_anchored(int rows, int cols, int image_h, int image_w);
};

Affine2D affine_from_raw(const std::array<double, 6>& raw, Point2 anchor, double scale_x, double scale_y);

/// Absolute affine per cell from a (1, 6, rows, cols) raw tensor.
std::vector<Affine2D> cells_from_raw(const Tensor4& raw, const CellLayout& layout);

/// Tape-based reverse-mode differentiation over NCHW tensors. Each graph
/// instance is single-threaded; independent graphs may run concurrently.
class Graph {
public:
    /// Leaf without gradient.
    Var constant(Tensor4 value);
    /// Leaf whose gradient is collected by backward().
    Var leaf(Tensor4 value);

    Var conv2d(Var x, Var weight, Var bias, int stride, int pad);
    Var relu(Var x);
    /// Average over each of out_h x out_w rectangular cells tiling the input.
    Var avg_pool_cells(Var x, int out_h, int out_w);
    /// 2x2 max pooling with stride 2 (odd trailing rows/columns dropped).
    Var max_pool2(Var x);
    /// Bilinear resize with pixel centers aligned to cell centers.
    Var upsample_bilinear(Var x, int out_h, int out_w);
    /// Fully connected: (N, C, H, W) flattened per batch item -> (N, out, 1, 1).
    Var dense(Var x, Var weight, Var bias);
    Var concat_channels(Var a, Var b);
    Var add(Var a, Var b);
    /// Scalar sum(x * weights); weights must match x's shape.
    Var weighted_sum(Var x, const Tensor4& weights);
    /// Scalar sum((x - target)^2).
    Var squared_error(Var x, const Tensor4& target);

    /// Scalar (1/N) sum_i || M(T^1_i) ... M(T^L_i) [i;1] - i - d_i ||^2 where
    /// each level's field is the bilinear interpolation of the cells decoded
    /// from terms[l].raw with terms[l].layout. Throws on an empty target list.
    struct AffineTerm {
        Var raw;
        const CellLayout* layout;
    };
    Var affine_flow_loss(std::vector<AffineTerm> terms, std::span<const FlowTarget> targets);

    const Tensor4& value(Var v) const;
    /// Gradient of the last backward() target with respect to v.
    const Tensor4& grad(Var v) const;

    /// Propagates d(loss)/d(node) from a scalar node. Throws if the node is
    /// not a scalar produced by this graph or backward already ran.
    void backward(Var loss);

    /// Corrupts the backward rule of one layer kind by scaling its input
    /// gradients; used to verify that gradient checks catch bad rules.
    void inject_fault(std::optional<LayerKind> kind) { fault_ = kind; }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor4 value;
        Tensor4 grad;
        bool needs_grad = false;
        LayerKind kind = LayerKind::Add;
        std::function<void(Graph&, int self)> backward;
    };

    Var push(Tensor4 value, bool needs_grad, LayerKind kind, std::function<void(Graph&, int)> bw);
    Node& node(Var v);
    const Node& node(Var v) const;
    Tensor4& grad_of(int id);
    double fault_scale(LayerKind kind) const { return fault_ && *fault_ == kind ? 1.5 : 1.0; }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
    std::optional<LayerKind> fault_;
};

}  // namespace affield
