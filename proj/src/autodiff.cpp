#include "affield/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "affield/error.hpp"
#include "affield/field.hpp"

namespace affield {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using Mat3 = Eigen::Matrix3d;

void require(bool ok, const char* what) {
    if (!ok) throw ShapeError(what);
}

// Source coordinate stencil for resizing `in` samples to `out` samples.
void resize_stencil(int o, int out, int in, int& i0, int& i1, double& f) {
    double u = (o + 0.5) * in / out - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<int>(std::floor(u));
    i1 = std::min(i0 + 1, in - 1);
    f = u - i0;
}

Mat3 augment(const std::array<double, 6>& p) {
    Mat3 m;
    m << p[0], p[1], p[2], p[3], p[4], p[5], 0.0, 0.0, 1.0;
    return m;
}

}  // namespace

const char* layer_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::AvgPool: return "avg_pool";
        case LayerKind::MaxPool: return "max_pool";
        case LayerKind::Upsample: return "upsample";
        case LayerKind::Dense: return "dense";
        case LayerKind::Concat: return "concat";
        case LayerKind::Add: return "add";
        case LayerKind::AffineLoss: return "affine_loss";
        case LayerKind::Reduce: return "reduce";
    }
    return "unknown";
}

CellLayout CellLayout::centered(int rows, int cols, int image_h, int image_w) {
    CellLayout l{rows, cols, image_h, image_w, {}, static_cast<double>(image_w), static_cast<double>(image_h)};
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) l.anchors.push_back(grid_cell_center(rows, cols, image_h, image_w, r, c));
    return l;
}

CellLayout CellLayout::image_anchored(int rows, int cols, int image_h, int image_w) {
    CellLayout l{rows, cols, image_h, image_w, {}, static_cast<double>(image_w), static_cast<double>(image_h)};
    l.anchors.assign(static_cast<std::size_t>(rows) * cols, Point2{(image_w - 1) / 2.0, (image_h - 1) / 2.0});
    return l;
}

Affine2D affine_from_raw(const std::array<double, 6>& r, Point2 a, double sx, double sy) {
    return {1.0 + r[0], r[1], r[2] * sx - r[0] * a.x - r[1] * a.y,
            r[3], 1.0 + r[4], r[5] * sy - r[3] * a.x - r[4] * a.y};
}

std::vector<Affine2D> cells_from_raw(const Tensor4& raw, const CellLayout& layout) {
    const Shape4 s = raw.shape();
    require(s.n == 1 && s.c == 6 && s.h == layout.rows && s.w == layout.cols, "raw affine tensor does not match layout");
    require(layout.anchors.size() == static_cast<std::size_t>(layout.rows) * layout.cols, "layout anchor count");
    std::vector<Affine2D> out;
    out.reserve(layout.anchors.size());
    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.cols; ++c) {
            std::array<double, 6> p{};
            for (int k = 0; k < 6; ++k) p[k] = raw.at(0, k, r, c);
            out.push_back(affine_from_raw(p, layout.anchors[static_cast<std::size_t>(r) * layout.cols + c],
                                          layout.scale_x, layout.scale_y));
        }
    }
    return out;
}

Var Graph::push(Tensor4 value, bool needs_grad, LayerKind kind, std::function<void(Graph&, int)> bw) {
    if (backward_done_) throw InvalidArgument("graph already differentiated; build a new graph");
    nodes_.push_back(Node{std::move(value), Tensor4{}, needs_grad, kind, std::move(bw)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw InvalidArgument("invalid graph variable");
    return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw InvalidArgument("invalid graph variable");
    return nodes_[v.id];
}

Tensor4& Graph::grad_of(int id) {
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor4(n.value.shape());
    return n.grad;
}

const Tensor4& Graph::value(Var v) const { return node(v).value; }

const Tensor4& Graph::grad(Var v) const {
    const auto& n = node(v);
    if (!backward_done_) throw InvalidArgument("grad requested before backward");
    static const Tensor4 empty;
    return n.grad.size() == n.value.size() ? n.grad : empty;
}

Var Graph::constant(Tensor4 value) { return push(std::move(value), false, LayerKind::Add, nullptr); }
Var Graph::leaf(Tensor4 value) { return push(std::move(value), true, LayerKind::Add, nullptr); }

Var Graph::conv2d(Var xv, Var wv, Var bv, int stride, int pad) {
    const Shape4 xs = value(xv).shape();
    const Shape4 ws = value(wv).shape();
    const int co = ws.n, ci = ws.c, k = ws.h;
    require(ws.h == ws.w && ci == xs.c, "conv2d: weight shape does not match input channels");
    require(value(bv).size() == static_cast<std::size_t>(co), "conv2d: bias size mismatch");
    require(stride >= 1 && pad >= 0, "conv2d: invalid stride/pad");
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    require(ho > 0 && wo > 0, "conv2d: input smaller than kernel");
    const int rows = ci * k * k;
    const int hw = ho * wo;

    auto cols = std::make_shared<std::vector<RowMat>>(xs.n, RowMat(rows, hw));
    Tensor4 out({xs.n, co, ho, wo});
    const Tensor4& x = value(xv);
    const ConstMapMat w(value(wv).data(), co, rows);
    const double* bias = value(bv).data();
    for (int n = 0; n < xs.n; ++n) {
        RowMat& col = (*cols)[n];
        for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    double* dst = col.data() + static_cast<std::ptrdiff_t>((c * k + ky) * k + kx) * hw;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            dst[oy * wo + ox] = (iy >= 0 && iy < xs.h && ix >= 0 && ix < xs.w) ? x.at(n, c, iy, ix) : 0.0;
                        }
                    }
                }
        MapMat o(out.data() + static_cast<std::ptrdiff_t>(n) * co * hw, co, hw);
        o.noalias() = w * col;
        for (int c = 0; c < co; ++c) o.row(c).array() += bias[c];
    }

    const bool ng = node(xv).needs_grad || node(wv).needs_grad || node(bv).needs_grad;
    return push(std::move(out), ng, LayerKind::Conv, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        const double fs = g.fault_scale(LayerKind::Conv);
        const ConstMapMat wm(g.nodes_[wv.id].value.data(), co, rows);
        for (int n = 0; n < xs.n; ++n) {
            const ConstMapMat gon(go.data() + static_cast<std::ptrdiff_t>(n) * co * hw, co, hw);
            const RowMat& col = (*cols)[n];
            if (g.nodes_[wv.id].needs_grad) {
                MapMat gw(g.grad_of(wv.id).data(), co, rows);
                gw.noalias() += fs * (gon * col.transpose());
            }
            if (g.nodes_[bv.id].needs_grad) {
                double* gb = g.grad_of(bv.id).data();
                for (int c = 0; c < co; ++c) gb[c] += fs * gon.row(c).sum();
            }
            if (g.nodes_[xv.id].needs_grad) {
                const RowMat dcol = wm.transpose() * gon;
                Tensor4& gx = g.grad_of(xv.id);
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const double* src = dcol.data() + static_cast<std::ptrdiff_t>((c * k + ky) * k + kx) * hw;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= xs.h) continue;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix >= 0 && ix < xs.w) gx.at(n, c, iy, ix) += fs * src[oy * wo + ox];
                                }
                            }
                        }
            }
        }
    });
}

Var Graph::relu(Var xv) {
    const Tensor4& x = value(xv);
    Tensor4 out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return push(std::move(out), node(xv).needs_grad, LayerKind::Relu, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        const Tensor4& xin = g.nodes_[xv.id].value;
        Tensor4& gx = g.grad_of(xv.id);
        const double fs = g.fault_scale(LayerKind::Relu);
        for (std::size_t i = 0; i < go.size(); ++i)
            if (xin[i] > 0.0) gx[i] += fs * go[i];
    });
}

Var Graph::avg_pool_cells(Var xv, int oh, int ow) {
    const Shape4 s = value(xv).shape();
    require(oh >= 1 && ow >= 1 && s.h >= oh && s.w >= ow, "avg_pool_cells: more cells than input pixels");
    auto bound = [](int i, int out, int in) { return static_cast<int>(static_cast<long long>(i) * in / out); };
    Tensor4 out({s.n, s.c, oh, ow});
    const Tensor4& x = value(xv);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int r = 0; r < oh; ++r)
                for (int q = 0; q < ow; ++q) {
                    const int y0 = bound(r, oh, s.h), y1 = bound(r + 1, oh, s.h);
                    const int x0 = bound(q, ow, s.w), x1 = bound(q + 1, ow, s.w);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y)
                        for (int xx = x0; xx < x1; ++xx) acc += x.at(n, c, y, xx);
                    out.at(n, c, r, q) = acc / ((y1 - y0) * (x1 - x0));
                }
    return push(std::move(out), node(xv).needs_grad, LayerKind::AvgPool, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        Tensor4& gx = g.grad_of(xv.id);
        const double fs = g.fault_scale(LayerKind::AvgPool);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        const int y0 = bound(r, oh, s.h), y1 = bound(r + 1, oh, s.h);
                        const int x0 = bound(q, ow, s.w), x1 = bound(q + 1, ow, s.w);
                        const double v = fs * go.at(n, c, r, q) / ((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y)
                            for (int xx = x0; xx < x1; ++xx) gx.at(n, c, y, xx) += v;
                    }
    });
}

Var Graph::max_pool2(Var xv) {
    const Shape4 s = value(xv).shape();
    const int oh = s.h / 2, ow = s.w / 2;
    require(oh >= 1 && ow >= 1, "max_pool2: input smaller than 2x2");
    Tensor4 out({s.n, s.c, oh, ow});
    auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
    const Tensor4& x = value(xv);
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int r = 0; r < oh; ++r)
                for (int q = 0; q < ow; ++q, ++o) {
                    int by = 2 * r, bx = 2 * q;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            if (x.at(n, c, 2 * r + dy, 2 * q + dx) > x.at(n, c, by, bx)) by = 2 * r + dy, bx = 2 * q + dx;
                    out[o] = x.at(n, c, by, bx);
                    (*arg)[o] = ((static_cast<std::size_t>(n) * s.c + c) * s.h + by) * s.w + bx;
                }
    return push(std::move(out), node(xv).needs_grad, LayerKind::MaxPool, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        Tensor4& gx = g.grad_of(xv.id);
        const double fs = g.fault_scale(LayerKind::MaxPool);
        for (std::size_t i = 0; i < go.size(); ++i) gx[(*arg)[i]] += fs * go[i];
    });
}

Var Graph::upsample_bilinear(Var xv, int oh, int ow) {
    const Shape4 s = value(xv).shape();
    require(oh >= 1 && ow >= 1, "upsample_bilinear: invalid output size");
    Tensor4 out({s.n, s.c, oh, ow});
    const Tensor4& x = value(xv);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < oh; ++y) {
                int y0, y1;
                double fy;
                resize_stencil(y, oh, s.h, y0, y1, fy);
                for (int q = 0; q < ow; ++q) {
                    int x0, x1;
                    double fx;
                    resize_stencil(q, ow, s.w, x0, x1, fx);
                    out.at(n, c, y, q) = (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) + fx * x.at(n, c, y0, x1)) +
                                         fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1));
                }
            }
    return push(std::move(out), node(xv).needs_grad, LayerKind::Upsample, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        Tensor4& gx = g.grad_of(xv.id);
        const double fs = g.fault_scale(LayerKind::Upsample);
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < oh; ++y) {
                    int y0, y1;
                    double fy;
                    resize_stencil(y, oh, s.h, y0, y1, fy);
                    for (int q = 0; q < ow; ++q) {
                        int x0, x1;
                        double fx;
                        resize_stencil(q, ow, s.w, x0, x1, fx);
                        const double v = fs * go.at(n, c, y, q);
                        gx.at(n, c, y0, x0) += v * (1 - fy) * (1 - fx);
                        gx.at(n, c, y0, x1) += v * (1 - fy) * fx;
                        gx.at(n, c, y1, x0) += v * fy * (1 - fx);
                        gx.at(n, c, y1, x1) += v * fy * fx;
                    }
                }
    });
}

Var Graph::dense(Var xv, Var wv, Var bv) {
    const Shape4 s = value(xv).shape();
    const int in = s.c * s.h * s.w;
    const auto wcount = value(wv).size();
    const int out_n = static_cast<int>(value(bv).size());
    require(out_n > 0 && wcount == static_cast<std::size_t>(out_n) * in, "dense: weight shape mismatch");
    Tensor4 out({s.n, out_n, 1, 1});
    const ConstMapMat w(value(wv).data(), out_n, in);
    const ConstMapMat x(value(xv).data(), s.n, in);
    MapMat o(out.data(), s.n, out_n);
    o.noalias() = x * w.transpose();
    for (int n = 0; n < s.n; ++n)
        for (int j = 0; j < out_n; ++j) o(n, j) += value(bv)[j];
    const bool ng = node(xv).needs_grad || node(wv).needs_grad || node(bv).needs_grad;
    return push(std::move(out), ng, LayerKind::Dense, [=](Graph& g, int self) {
        const ConstMapMat go(g.nodes_[self].grad.data(), s.n, out_n);
        const double fs = g.fault_scale(LayerKind::Dense);
        if (g.nodes_[wv.id].needs_grad) {
            MapMat gw(g.grad_of(wv.id).data(), out_n, in);
            gw.noalias() += fs * (go.transpose() * ConstMapMat(g.nodes_[xv.id].value.data(), s.n, in));
        }
        if (g.nodes_[bv.id].needs_grad) {
            Tensor4& gb = g.grad_of(bv.id);
            for (int j = 0; j < out_n; ++j) gb[j] += fs * go.col(j).sum();
        }
        if (g.nodes_[xv.id].needs_grad) {
            MapMat gx(g.grad_of(xv.id).data(), s.n, in);
            gx.noalias() += fs * (go * ConstMapMat(g.nodes_[wv.id].value.data(), out_n, in));
        }
    });
}

Var Graph::concat_channels(Var av, Var bv) {
    const Shape4 a = value(av).shape();
    const Shape4 b = value(bv).shape();
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: spatial mismatch");
    Tensor4 out({a.n, a.c + b.c, a.h, a.w});
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        std::copy_n(value(av).data() + n * a.c * plane, a.c * plane, out.data() + n * (a.c + b.c) * plane);
        std::copy_n(value(bv).data() + n * b.c * plane, b.c * plane, out.data() + (n * (a.c + b.c) + a.c) * plane);
    }
    const bool ng = node(av).needs_grad || node(bv).needs_grad;
    return push(std::move(out), ng, LayerKind::Concat, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        const double fs = g.fault_scale(LayerKind::Concat);
        for (int n = 0; n < a.n; ++n) {
            if (g.nodes_[av.id].needs_grad) {
                Tensor4& ga = g.grad_of(av.id);
                for (std::size_t i = 0; i < a.c * plane; ++i) ga[n * a.c * plane + i] += fs * go[n * (a.c + b.c) * plane + i];
            }
            if (g.nodes_[bv.id].needs_grad) {
                Tensor4& gb = g.grad_of(bv.id);
                for (std::size_t i = 0; i < b.c * plane; ++i)
                    gb[n * b.c * plane + i] += fs * go[(n * (a.c + b.c) + a.c) * plane + i];
            }
        }
    });
}

Var Graph::add(Var av, Var bv) {
    require(value(av).shape() == value(bv).shape(), "add: shape mismatch");
    Tensor4 out = value(av);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += value(bv)[i];
    const bool ng = node(av).needs_grad || node(bv).needs_grad;
    return push(std::move(out), ng, LayerKind::Add, [=](Graph& g, int self) {
        const Tensor4& go = g.nodes_[self].grad;
        const double fs = g.fault_scale(LayerKind::Add);
        for (Var v : {av, bv}) {
            if (!g.nodes_[v.id].needs_grad) continue;
            Tensor4& gv = g.grad_of(v.id);
            for (std::size_t i = 0; i < go.size(); ++i) gv[i] += fs * go[i];
        }
    });
}

Var Graph::weighted_sum(Var xv, const Tensor4& weights) {
    require(value(xv).shape() == weights.shape(), "weighted_sum: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += value(xv)[i] * weights[i];
    return push(Tensor4({1, 1, 1, 1}, s), node(xv).needs_grad, LayerKind::Reduce, [=](Graph& g, int self) {
        const double go = g.nodes_[self].grad[0] * g.fault_scale(LayerKind::Reduce);
        Tensor4& gx = g.grad_of(xv.id);
        for (std::size_t i = 0; i < weights.size(); ++i) gx[i] += go * weights[i];
    });
}

Var Graph::squared_error(Var xv, const Tensor4& target) {
    require(value(xv).shape() == target.shape(), "squared_error: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = value(xv)[i] - target[i];
        s += d * d;
    }
    return push(Tensor4({1, 1, 1, 1}, s), node(xv).needs_grad, LayerKind::Reduce, [=](Graph& g, int self) {
        const double go = g.nodes_[self].grad[0] * g.fault_scale(LayerKind::Reduce);
        const Tensor4& x = g.nodes_[xv.id].value;
        Tensor4& gx = g.grad_of(xv.id);
        for (std::size_t i = 0; i < target.size(); ++i) gx[i] += go * 2.0 * (x[i] - target[i]);
    });
}

Var Graph::affine_flow_loss(std::vector<AffineTerm> terms, std::span<const FlowTarget> target_span) {
    if (target_span.empty()) throw InvalidArgument("affine_flow_loss: empty sample set");
    if (terms.empty()) throw InvalidArgument("affine_flow_loss: no affine terms");
    for (const auto& t : terms) {
        const Shape4 s = value(t.raw).shape();
        require(t.layout != nullptr && s.n == 1 && s.c == 6 && s.h == t.layout->rows && s.w == t.layout->cols,
                "affine_flow_loss: raw tensor does not match its layout");
    }
    auto targets = std::make_shared<std::vector<FlowTarget>>(target_span.begin(), target_span.end());

    // Interpolated augmented matrix of one level at a point.
    auto level_matrix = [](const Tensor4& raw, const CellLayout& l, Point2 p, CellWeights& cw) {
        cw = cell_weights(l.rows, l.cols, l.image_h, l.image_w, p);
        const auto w = cw.weights();
        std::array<double, 6> acc{};
        for (int q = 0; q < 4; ++q) {
            const int idx = cw.index[q];
            std::array<double, 6> r{};
            for (int k = 0; k < 6; ++k) r[k] = raw.at(0, k, idx / l.cols, idx % l.cols);
            const auto a = affine_from_raw(r, l.anchors[idx], l.scale_x, l.scale_y).params();
            for (int k = 0; k < 6; ++k) acc[k] += w[q] * a[k];
        }
        return augment(acc);
    };

    const std::size_t levels = terms.size();
    double loss = 0.0;
    for (const auto& t : *targets) {
        Mat3 m = Mat3::Identity();
        for (const auto& term : terms) {
            CellWeights cw;
            m = m * level_matrix(value(term.raw), *term.layout, t.at, cw);
        }
        const double rx = m(0, 0) * t.at.x + m(0, 1) * t.at.y + m(0, 2) - t.at.x - t.displacement.x;
        const double ry = m(1, 0) * t.at.x + m(1, 1) * t.at.y + m(1, 2) - t.at.y - t.displacement.y;
        loss += rx * rx + ry * ry;
    }
    loss /= static_cast<double>(targets->size());

    bool ng = false;
    for (const auto& t : terms) ng = ng || node(t.raw).needs_grad;
    return push(Tensor4({1, 1, 1, 1}, loss), ng, LayerKind::AffineLoss, [=](Graph& g, int self) {
        const double go = g.nodes_[self].grad[0] * g.fault_scale(LayerKind::AffineLoss);
        const double inv_n = 1.0 / static_cast<double>(targets->size());
        std::vector<Mat3> mats(levels);
        std::vector<CellWeights> stencils(levels);
        for (const auto& t : *targets) {
            for (std::size_t l = 0; l < levels; ++l)
                mats[l] = level_matrix(g.nodes_[terms[l].raw.id].value, *terms[l].layout, t.at, stencils[l]);
            std::vector<Mat3> prefix(levels + 1, Mat3::Identity()), suffix(levels + 1, Mat3::Identity());
            for (std::size_t l = 0; l < levels; ++l) prefix[l + 1] = prefix[l] * mats[l];
            for (std::size_t l = levels; l-- > 0;) suffix[l] = mats[l] * suffix[l + 1];
            const Mat3& m = prefix[levels];
            const double rx = m(0, 0) * t.at.x + m(0, 1) * t.at.y + m(0, 2) - t.at.x - t.displacement.x;
            const double ry = m(1, 0) * t.at.x + m(1, 1) * t.at.y + m(1, 2) - t.at.y - t.displacement.y;
            Mat3 gm = Mat3::Zero();
            const Eigen::Vector3d hom(t.at.x, t.at.y, 1.0);
            gm.row(0) = 2.0 * rx * go * inv_n * hom.transpose();
            gm.row(1) = 2.0 * ry * go * inv_n * hom.transpose();
            for (std::size_t l = 0; l < levels; ++l) {
                const Var raw = terms[l].raw;
                if (!g.nodes_[raw.id].needs_grad) continue;
                const Mat3 dm = prefix[l].transpose() * gm * suffix[l + 1].transpose();
                const CellLayout& lay = *terms[l].layout;
                const auto w = stencils[l].weights();
                Tensor4& graw = g.grad_of(raw.id);
                for (int q = 0; q < 4; ++q) {
                    const int idx = stencils[l].index[q];
                    const int r = idx / lay.cols, c = idx % lay.cols;
                    const Point2 a = lay.anchors[idx];
                    const double d11 = w[q] * dm(0, 0), d12 = w[q] * dm(0, 1), dtx = w[q] * dm(0, 2);
                    const double d21 = w[q] * dm(1, 0), d22 = w[q] * dm(1, 1), dty = w[q] * dm(1, 2);
                    graw.at(0, 0, r, c) += d11 - a.x * dtx;
                    graw.at(0, 1, r, c) += d12 - a.y * dtx;
                    graw.at(0, 2, r, c) += lay.scale_x * dtx;
                    graw.at(0, 3, r, c) += d21 - a.x * dty;
                    graw.at(0, 4, r, c) += d22 - a.y * dty;
                    graw.at(0, 5, r, c) += lay.scale_y * dty;
                }
            }
        }
    });
}

void Graph::backward(Var loss) {
    if (nodes_.empty()) throw InvalidArgument("backward called before any forward computation");
    if (backward_done_) throw InvalidArgument("backward already ran on this graph");
    Node& root = node(loss);
    if (root.value.size() != 1) throw InvalidArgument("backward target must be a scalar");
    backward_done_ = true;
    grad_of(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || !n.backward || n.grad.size() != n.value.size()) continue;
        n.backward(*this, id);
    }
}

}  // namespace affield
