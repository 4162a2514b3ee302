#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "affield/geometry.hpp"
#include "affield/image.hpp"

namespace affield {

/// Dense per-pixel affine field: pixel (x, y) maps to cell(y, x) * [x, y, 1].
class AffineField {
public:
    AffineField() = default;
    AffineField(int height, int width, const Affine2D& fill = Affine2D::identity());

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }

    Affine2D& at(int y, int x) { return cells_[static_cast<std::size_t>(y) * width_ + x]; }
    const Affine2D& at(int y, int x) const { return cells_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<Affine2D> cells() noexcept { return cells_; }
    std::span<const Affine2D> cells() const noexcept { return cells_; }

    bool same_shape(const AffineField& o) const { return height_ == o.height_ && width_ == o.width_; }
    bool is_identity() const;

    friend bool operator==(const AffineField&, const AffineField&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<Affine2D> cells_;
};

/// Quad-tree level field: 2^(level-1) x 2^(level-1) cells tiling the image.
class GridAffineField {
public:
    GridAffineField(int level, int image_height, int image_width,
                    const Affine2D& fill = Affine2D::identity());

    int level() const noexcept { return level_; }
    /// Cells per side, 2^(level-1).
    int side() const noexcept { return 1 << (level_ - 1); }
    int image_height() const noexcept { return image_height_; }
    int image_width() const noexcept { return image_width_; }

    Affine2D& cell(int row, int col) { return cells_[static_cast<std::size_t>(row) * side() + col]; }
    const Affine2D& cell(int row, int col) const {
        return cells_[static_cast<std::size_t>(row) * side() + col];
    }
    std::span<Affine2D> cells() noexcept { return cells_; }
    std::span<const Affine2D> cells() const noexcept { return cells_; }

    /// Geometric center of a cell in pixel coordinates.
    Point2 cell_center(int row, int col) const;

private:
    int level_;
    int image_height_;
    int image_width_;
    std::vector<Affine2D> cells_;
};

/// Bilinear stencil of a point with respect to the centers of a rows x cols
/// grid tiling an image_h x image_w image. Coordinates are clamped to the
/// hull of the cell centers. index holds cells (r0,c0), (r0,c1), (r1,c0),
/// (r1,c1); fx, fy are the fractional offsets along columns and rows.
struct CellWeights {
    std::array<int, 4> index{};
    double fx = 0.0;
    double fy = 0.0;

    std::array<double, 4> weights() const {
        return {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
    }
};
CellWeights cell_weights(int rows, int cols, int image_h, int image_w, Point2 p);

/// Center of cell (row, col) of a rows x cols grid over an image_h x image_w image.
Point2 grid_cell_center(int rows, int cols, int image_h, int image_w, int row, int col);

/// Parameter-space bilinear interpolation of a cell grid at a point.
Affine2D interpolate_cells(std::span<const Affine2D> cells, int rows, int cols, int image_h,
                           int image_w, Point2 p);

/// Dense field obtained by interpolating a rows x cols cell grid at every pixel.
AffineField upsample_cells(std::span<const Affine2D> cells, int rows, int cols, int image_h,
                           int image_w);

AffineField grid_to_dense(const GridAffineField& g);

/// Per-pixel product M(levels[0]) * M(levels[1]) * ... Throws ShapeError on
/// mismatched dimensions or an empty list.
AffineField compose_fields(std::span<const AffineField> levels);

/// Per-pixel displacement u(i) = T_i * i - i, stored as interleaved (dx, dy).
class FlowField {
public:
    FlowField() = default;
    FlowField(int height, int width);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    Point2 at(int y, int x) const {
        const auto k = 2 * (static_cast<std::size_t>(y) * width_ + x);
        return {data_[k], data_[k + 1]};
    }
    void set(int y, int x, Point2 d) {
        const auto k = 2 * (static_cast<std::size_t>(y) * width_ + x);
        data_[k] = d.x;
        data_[k + 1] = d.y;
    }
    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

FlowField flow_from_field(const AffineField& field);

/// output(i) = bilinear sample of img at T_i * i; samples outside the image
/// read as zero.
Image warp_image(const Image& img, const AffineField& field);

/// Vector-Jacobian product of warp_image: given dL/d(output), returns dL/d(field
/// parameters) per pixel (in a11, a12, tx, a21, a22, ty order) and dL/d(img).
struct WarpGradient {
    std::vector<std::array<double, 6>> field;
    Image image;
};
WarpGradient warp_image_vjp(const Image& img, const AffineField& field, const Image& grad_output);

// PFF1 flow files and PAF1 affine field files (float32 payload).
void save_flow(const FlowField& flow, const std::filesystem::path& path);
FlowField load_flow(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(std::span<const std::uint8_t> bytes);

void save_affine_field(const AffineField& field, const std::filesystem::path& path);
AffineField load_affine_field(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_affine_field(const AffineField& field);
AffineField decode_affine_field(std::span<const std::uint8_t> bytes);

}  // namespace affield
