#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "affield/image.hpp"
#include "affield/supervision.hpp"

namespace affield {

/// Binary PGM (P5) and PPM (P6), maxval up to 65535. Values are scaled to
/// [0, 1]. Header comments are skipped.
Image decode_pnm(std::span<const std::uint8_t> bytes);
Image load_pnm(const std::filesystem::path& path);

/// 8-bit P5 for one channel, P6 for three. Values are clamped to [0, 1] and
/// rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_pnm(const Image& img);
void save_pnm(const Image& img, const std::filesystem::path& path);

/// Masks are stored as PGM; nonzero pixels are foreground.
ObjectMask load_mask(const std::filesystem::path& path);
void save_mask(const ObjectMask& mask, const std::filesystem::path& path);

/// Rounds an image to the 8-bit levels a PNM round trip would give.
Image quantize8(const Image& img);

}  // namespace affield
