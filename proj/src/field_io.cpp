#include "affield/binary_io.hpp"
#include "affield/error.hpp"
#include "affield/field.hpp"

namespace affield {

namespace {

constexpr std::uint64_t kMaxSide = 1u << 20;

void read_dims(io::ByteReader& r, std::uint32_t& h, std::uint32_t& w) {
    const std::size_t at = r.offset();
    h = r.u32();
    w = r.u32();
    if (h == 0 || w == 0) throw ParseError(ParseErrorKind::Malformed, "zero dimension at offset " + std::to_string(at), at);
    if (h > kMaxSide || w > kMaxSide) {
        throw ParseError(ParseErrorKind::DimensionOverflow, "dimension too large at offset " + std::to_string(at), at);
    }
}

void require_exact(const io::ByteReader& r, std::size_t payload) {
    r.require(payload, "payload");
    if (r.remaining() != payload) {
        throw ParseError(ParseErrorKind::Malformed,
                         "trailing bytes after payload at offset " + std::to_string(r.offset() + payload),
                         r.offset() + payload);
    }
}

}  // namespace

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
    io::ByteWriter w;
    w.magic("PFF1");
    w.u32(static_cast<std::uint32_t>(flow.height()));
    w.u32(static_cast<std::uint32_t>(flow.width()));
    for (double v : flow.data()) w.f32(static_cast<float>(v));
    return w.data();
}

FlowField decode_flow(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("PFF1");
    std::uint32_t h, w;
    read_dims(r, h, w);
    const std::size_t n = io::checked_count({h, w, 2}, r.offset());
    require_exact(r, n * 4);
    FlowField flow(static_cast<int>(h), static_cast<int>(w));
    for (auto& v : flow.data()) v = r.f32();
    return flow;
}

void save_flow(const FlowField& flow, const std::filesystem::path& path) {
    io::write_file(path, encode_flow(flow));
}

FlowField load_flow(const std::filesystem::path& path) { return decode_flow(io::read_file(path)); }

std::vector<std::uint8_t> encode_affine_field(const AffineField& field) {
    io::ByteWriter w;
    w.magic("PAF1");
    w.u32(static_cast<std::uint32_t>(field.height()));
    w.u32(static_cast<std::uint32_t>(field.width()));
    for (const auto& t : field.cells()) {
        for (double v : t.params()) w.f32(static_cast<float>(v));
    }
    return w.data();
}

AffineField decode_affine_field(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("PAF1");
    std::uint32_t h, w;
    read_dims(r, h, w);
    const std::size_t n = io::checked_count({h, w, 6}, r.offset());
    require_exact(r, n * 4);
    AffineField field(static_cast<int>(h), static_cast<int>(w));
    for (auto& t : field.cells()) {
        std::array<double, 6> p{};
        for (auto& v : p) v = r.f32();
        t = Affine2D::from_params(p);
    }
    return field;
}

void save_affine_field(const AffineField& field, const std::filesystem::path& path) {
    io::write_file(path, encode_affine_field(field));
}

AffineField load_affine_field(const std::filesystem::path& path) {
    return decode_affine_field(io::read_file(path));
}

}  // namespace affield
