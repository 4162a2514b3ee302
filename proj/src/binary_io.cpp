#include "affield/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace affield::io {

void ByteWriter::magic(std::string_view tag) {
    buf_.insert(buf_.end(), tag.begin(), tag.end());
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void ByteWriter::bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteReader::require(std::size_t n, std::string_view what) const {
    if (remaining() < n) {
        throw ParseError(ParseErrorKind::Truncated,
                         "truncated " + std::string(what) + " at offset " + std::to_string(pos_) +
                             ": expected " + std::to_string(pos_ + n) + " bytes, got " +
                             std::to_string(data_.size()),
                         pos_);
    }
}

void ByteReader::expect_magic(std::string_view tag) {
    if (remaining() < tag.size() ||
        std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
        throw ParseError(ParseErrorKind::BadMagic,
                         "bad magic at offset " + std::to_string(pos_) + ": expected '" +
                             std::string(tag) + "'",
                         pos_);
    }
    pos_ += tag.size();
}

std::uint32_t ByteReader::u32() {
    require(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() {
    require(8, "f64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
}

std::string ByteReader::bytes(std::size_t n) {
    require(n, "string");
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(ParseErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("short write to " + path.string());
}

std::size_t checked_count(std::initializer_list<std::uint64_t> dims, std::size_t offset,
                          std::uint64_t limit) {
    std::uint64_t n = 1;
    for (auto d : dims) {
        if (d != 0 && n > limit / d) {
            throw ParseError(ParseErrorKind::DimensionOverflow,
                             "dimension product overflows at offset " + std::to_string(offset),
                             offset);
        }
        n *= d;
    }
    return static_cast<std::size_t>(n);
}

}  // namespace affield::io
