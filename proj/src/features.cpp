#include "affield/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "affield/binary_io.hpp"
#include "affield/error.hpp"
#include "affield/parallel.hpp"

namespace affield {

DescriptorMap::DescriptorMap(int height, int width, int depth)
    : height_(height), width_(width), depth_(depth) {
    if (height <= 0 || width <= 0 || depth <= 0) throw InvalidArgument("descriptor map dimensions must be positive");
    data_.assign(static_cast<std::size_t>(height) * width * depth, 0.0);
}

bool DescriptorMap::check_unit_norms(double tol) const {
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            double sq = 0.0;
            for (double v : at(y, x)) sq += v * v;
            if (sq == 0.0) continue;
            const double n = std::sqrt(sq);
            if (std::abs(n - 1.0) > tol) return false;
        }
    }
    return true;
}

void LevelSpec::validate() const {
    if (!(window_ratio > 0.0 && window_ratio <= 1.0)) throw InvalidArgument("window_ratio must be in (0, 1]");
    if (scale_indices.empty()) throw InvalidArgument("scale_indices must be non-empty");
    for (int s : scale_indices) {
        if (s < 0 || s > 6) throw InvalidArgument("scale index out of range [0, 6]");
    }
    if (stride < 1) throw InvalidArgument("stride must be >= 1");
    if (level < 1) throw InvalidArgument("level must be >= 1");
}

double pooling_sigma(int scale_index) { return std::ldexp(1.0, scale_index); }

int sampled_extent(int extent, int stride) {
    const int first = stride / 2;
    if (extent <= first) return 0;
    return (extent - first - 1) / stride + 1;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Per-pixel orientation histograms (magnitude-weighted, linear interpolation
// between the two nearest of 8 bins centered at multiples of 45 degrees).
std::vector<double> orientation_channels(const Image& luma) {
    const int h = luma.height();
    const int w = luma.width();
    std::vector<double> hist(static_cast<std::size_t>(h) * w * kOrientationBins, 0.0);
    const double bin_width = 2.0 * std::numbers::pi / kOrientationBins;
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
        for (auto y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
            const int yu = std::max(y - 1, 0);
            const int yd = std::min(y + 1, h - 1);
            for (int x = 0; x < w; ++x) {
                const int xl = std::max(x - 1, 0);
                const int xr = std::min(x + 1, w - 1);
                const double gx = 0.5 * (luma.at(y, xr) - luma.at(y, xl));
                const double gy = 0.5 * (luma.at(yd, x) - luma.at(yu, x));
                const double mag = std::sqrt(gx * gx + gy * gy);
                if (mag == 0.0) continue;
                double pos = std::atan2(gy, gx) / bin_width;
                if (pos < 0.0) pos += kOrientationBins;
                const double fl = std::floor(pos);
                const double frac = pos - fl;
                const int b0 = static_cast<int>(fl) % kOrientationBins;
                const int b1 = (b0 + 1) % kOrientationBins;
                double* px = &hist[(static_cast<std::size_t>(y) * w + x) * kOrientationBins];
                px[b0] += mag * (1.0 - frac);
                px[b1] += mag * frac;
            }
        }
    });
    return hist;
}

}  // namespace

DescriptorMap extract_handcrafted(const Image& img, const LevelSpec& spec) {
    spec.validate();
    if (std::min(img.height(), img.width()) < kMinExtractSide) {
        throw InvalidArgument("image too small for descriptor extraction (min side 16)");
    }
    const Image luma = to_luma(img);
    const int h = luma.height();
    const int w = luma.width();
    const int gh = sampled_extent(h, spec.stride);
    const int gw = sampled_extent(w, spec.stride);
    const auto hist = orientation_channels(luma);
    const int blocks = static_cast<int>(spec.scale_indices.size());
    const int depth = blocks * kOrientationBins;

    DescriptorMap out(gh, gw, depth);
    std::vector<double> horiz(static_cast<std::size_t>(h) * gw * kOrientationBins);
    for (int blk = 0; blk < blocks; ++blk) {
        const auto kernel = gaussian_kernel(pooling_sigma(spec.scale_indices[blk]));
        const int radius = static_cast<int>(kernel.size() / 2);
        // Horizontal pass, evaluated only at the sampled columns.
        parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
            for (auto y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
                for (int gx = 0; gx < gw; ++gx) {
                    const int cx = sample_coordinate(gx, spec.stride);
                    double acc[kOrientationBins] = {};
                    for (int k = -radius; k <= radius; ++k) {
                        const int x = cx + k;
                        if (x < 0 || x >= w) continue;
                        const double* src = &hist[(static_cast<std::size_t>(y) * w + x) * kOrientationBins];
                        const double g = kernel[k + radius];
                        for (int o = 0; o < kOrientationBins; ++o) acc[o] += g * src[o];
                    }
                    double* dst = &horiz[(static_cast<std::size_t>(y) * gw + gx) * kOrientationBins];
                    std::copy(acc, acc + kOrientationBins, dst);
                }
            }
        });
        // Vertical pass at the sampled rows, then block normalization.
        parallel_for(static_cast<std::size_t>(gh), [&](std::size_t b, std::size_t e) {
            for (auto gy = static_cast<int>(b); gy < static_cast<int>(e); ++gy) {
                const int cy = sample_coordinate(gy, spec.stride);
                for (int gx = 0; gx < gw; ++gx) {
                    double acc[kOrientationBins] = {};
                    for (int k = -radius; k <= radius; ++k) {
                        const int y = cy + k;
                        if (y < 0 || y >= h) continue;
                        const double* src = &horiz[(static_cast<std::size_t>(y) * gw + gx) * kOrientationBins];
                        const double g = kernel[k + radius];
                        for (int o = 0; o < kOrientationBins; ++o) acc[o] += g * src[o];
                    }
                    double sq = 0.0;
                    for (double v : acc) sq += v * v;
                    const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
                    auto dst = out.at(gy, gx).subspan(static_cast<std::size_t>(blk) * kOrientationBins, kOrientationBins);
                    for (int o = 0; o < kOrientationBins; ++o) dst[o] = acc[o] * inv;
                }
            }
        });
    }
    return blocks == 1 ? (out.set_normalized(true), out) : l2_normalize(out);
}

DescriptorMap concat_levels(std::span<const DescriptorMap> maps) {
    if (maps.empty()) throw ShapeError("concat_levels needs at least one map");
    const int h = maps.front().height();
    const int w = maps.front().width();
    int depth = 0;
    for (const auto& m : maps) {
        if (m.height() != h || m.width() != w) throw ShapeError("concat_levels: spatial dimension mismatch");
        depth += m.depth();
    }
    DescriptorMap out(h, w, depth);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto dst = out.at(y, x).begin();
            for (const auto& m : maps) dst = std::copy(m.at(y, x).begin(), m.at(y, x).end(), dst);
        }
    }
    return out;
}

DescriptorMap l2_normalize(const DescriptorMap& map) {
    DescriptorMap out = map;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            auto v = out.at(y, x);
            double sq = 0.0;
            for (double c : v) sq += c * c;
            if (sq == 0.0) continue;
            const double n = std::sqrt(sq);
            for (double& c : v) c /= n;
        }
    }
    out.set_normalized(true);
    return out;
}

std::vector<std::uint8_t> encode_feature_map(const DescriptorMap& map) {
    io::ByteWriter w;
    w.magic("PFM1");
    w.u32(static_cast<std::uint32_t>(map.height()));
    w.u32(static_cast<std::uint32_t>(map.width()));
    w.u32(static_cast<std::uint32_t>(map.depth()));
    for (double v : map.data()) w.f32(static_cast<float>(v));
    return w.data();
}

DescriptorMap decode_feature_map(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("PFM1");
    const std::size_t dims_at = r.offset();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    const std::uint32_t d = r.u32();
    if (h == 0 || w == 0 || d == 0) {
        throw ParseError(ParseErrorKind::Malformed, "zero dimension at offset " + std::to_string(dims_at), dims_at);
    }
    const std::size_t count = io::checked_count({h, w, d}, dims_at, std::uint64_t{1} << 34);
    r.require(count * 4, "payload");
    if (r.remaining() != count * 4) {
        throw ParseError(ParseErrorKind::Malformed, "trailing bytes after payload", r.offset() + count * 4);
    }
    DescriptorMap map(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
    for (auto& v : map.data()) v = r.f32();
    map.set_normalized(map.check_unit_norms());
    return map;
}

void save_feature_map(const DescriptorMap& map, const std::filesystem::path& path) {
    io::write_file(path, encode_feature_map(map));
}

DescriptorMap load_feature_map(const std::filesystem::path& path) {
    return decode_feature_map(io::read_file(path));
}

}  // namespace affield
