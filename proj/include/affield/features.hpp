#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "affield/image.hpp"

namespace affield {

/// Dense H x W x D descriptor array, row-major, channels fastest.
class DescriptorMap {
public:
    DescriptorMap() = default;
    DescriptorMap(int height, int width, int depth);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int depth() const noexcept { return depth_; }
    bool normalized() const noexcept { return normalized_; }
    void set_normalized(bool v) noexcept { normalized_ = v; }

    std::span<double> at(int y, int x) {
        return {data_.data() + (static_cast<std::size_t>(y) * width_ + x) * depth_,
                static_cast<std::size_t>(depth_)};
    }
    std::span<const double> at(int y, int x) const {
        return {data_.data() + (static_cast<std::size_t>(y) * width_ + x) * depth_,
                static_cast<std::size_t>(depth_)};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    /// True when every pixel vector is zero or has unit norm within tol.
    bool check_unit_norms(double tol = 1e-6) const;

    friend bool operator==(const DescriptorMap&, const DescriptorMap&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int depth_ = 0;
    bool normalized_ = false;
    std::vector<double> data_;
};

/// Descriptor configuration for one pyramid level.
struct LevelSpec {
    int level = 1;
    /// Pooling scales, concatenated in this order. Index s pools with a
    /// Gaussian of sigma 2^s pixels.
    std::vector<int> scale_indices{2};
    /// Search radius as a fraction of the larger map side, in (0, 1].
    double window_ratio = 0.1;
    /// Descriptors are sampled every `stride` pixels starting at stride / 2.
    int stride = 1;

    void validate() const;
};

inline constexpr int kOrientationBins = 8;
inline constexpr int kMinExtractSide = 16;

double pooling_sigma(int scale_index);

/// Number of descriptor samples along an image side of `extent` pixels.
int sampled_extent(int extent, int stride);
/// Image coordinate of descriptor sample `g` along one axis.
inline int sample_coordinate(int g, int stride) { return g * stride + stride / 2; }

/// Oriented-gradient histograms (8 signed orientations, linear bin
/// interpolation) pooled at each scale, block-normalized, concatenated and
/// L2-normalized. Output is (H/stride) x (W/stride) x 8|scales|.
DescriptorMap extract_handcrafted(const Image& img, const LevelSpec& spec);

/// Channel-wise concatenation in list order. The normalized flag is cleared.
DescriptorMap concat_levels(std::span<const DescriptorMap> maps);

/// Scales each pixel vector to unit norm; zero vectors stay zero.
DescriptorMap l2_normalize(const DescriptorMap& map);

// PFM1 feature files (float32 payload).
std::vector<std::uint8_t> encode_feature_map(const DescriptorMap& map);
DescriptorMap decode_feature_map(std::span<const std::uint8_t> bytes);
void save_feature_map(const DescriptorMap& map, const std::filesystem::path& path);
DescriptorMap load_feature_map(const std::filesystem::path& path);

}  // namespace affield
