#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affield/error.hpp"

namespace affield::io {

/// Appends little-endian encoded values to a byte buffer.
class ByteWriter {
public:
    void magic(std::string_view tag);
    void u32(std::uint32_t v);
    void f32(float v);
    void f64(double v);
    void bytes(std::string_view s);

    const std::vector<std::uint8_t>& data() const noexcept { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Decodes little-endian values from a byte span, tracking the offset for
/// error reporting. Every read checks the remaining length first.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    void expect_magic(std::string_view tag);
    std::uint32_t u32();
    float f32();
    double f64();
    std::string bytes(std::size_t n);

    /// Throws a Truncated error unless `n` more bytes are available.
    void require(std::size_t n, std::string_view what) const;

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

/// Multiplies element counts, throwing DimensionOverflow when the product
/// cannot be represented or exceeds `limit`.
std::size_t checked_count(std::initializer_list<std::uint64_t> dims, std::size_t offset,
                          std::uint64_t limit = (std::uint64_t{1} << 40));

}  // namespace affield::io
