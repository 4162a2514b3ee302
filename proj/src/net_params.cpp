#include "affield/net_params.hpp"

#include <cmath>

#include "affield/binary_io.hpp"
#include "affield/error.hpp"

namespace affield {

Tensor4::Tensor4(Shape4 shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.count()) throw ShapeError("tensor value count does not match its shape");
}

std::size_t ParamBlock::count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

Shape4 ParamBlock::shape4() const {
    if (dims.size() > 4) throw ShapeError("parameter block rank exceeds 4");
    int d[4] = {1, 1, 1, 1};
    const std::size_t off = 4 - dims.size();
    for (std::size_t k = 0; k < dims.size(); ++k) d[off + k] = static_cast<int>(dims[k]);
    return {d[0], d[1], d[2], d[3]};
}

const ParamBlock* NetParams::find(std::string_view name) const {
    for (const auto& b : blocks)
        if (b.name == name) return &b;
    return nullptr;
}

ParamBlock* NetParams::find(std::string_view name) {
    for (auto& b : blocks)
        if (b.name == name) return &b;
    return nullptr;
}

const ParamBlock& NetParams::get(std::string_view name) const {
    const auto* b = find(name);
    if (!b) throw ShapeError("missing parameter block '" + std::string(name) + "'");
    return *b;
}

std::size_t NetParams::total_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.values.size();
    return n;
}

Gradients zero_gradients(const NetParams& params) {
    Gradients g;
    g.reserve(params.blocks.size());
    for (const auto& b : params.blocks) g.emplace_back(b.values.size(), 0.0);
    return g;
}

void accumulate(Gradients& into, const Gradients& g, double scale) {
    if (into.size() != g.size()) throw ShapeError("gradient block count mismatch");
    for (std::size_t b = 0; b < g.size(); ++b) {
        if (into[b].size() != g[b].size()) throw ShapeError("gradient block size mismatch");
        for (std::size_t k = 0; k < g[b].size(); ++k) into[b][k] += scale * g[b][k];
    }
}

double gradient_norm(const Gradients& g) {
    double s = 0.0;
    for (const auto& b : g)
        for (double v : b) s += v * v;
    return std::sqrt(s);
}

void MomentumSgd::step(NetParams& params, const Gradients& grads) {
    if (grads.size() != params.blocks.size()) throw ShapeError("gradients do not match parameters");
    if (velocity_.empty()) velocity_ = zero_gradients(params);
    for (std::size_t b = 0; b < grads.size(); ++b) {
        auto& v = velocity_[b];
        auto& p = params.blocks[b].values;
        if (grads[b].size() != p.size()) throw ShapeError("gradient block size mismatch");
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = momentum_ * v[k] + grads[b][k];
            p[k] -= lr_ * v[k];
        }
    }
}

std::vector<std::uint8_t> encode_params(const NetParams& params) {
    io::ByteWriter w;
    w.magic("PNP1");
    w.u32(static_cast<std::uint32_t>(params.blocks.size() + 1));
    auto block = [&](const std::string& name, const std::vector<std::uint32_t>& dims, const std::vector<double>& vals) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u32(static_cast<std::uint32_t>(dims.size()));
        for (auto d : dims) w.u32(d);
        for (double v : vals) w.f64(v);
    };
    block("meta.seed", {2}, {static_cast<double>(params.seed >> 32), static_cast<double>(params.seed & 0xFFFFFFFFu)});
    for (const auto& b : params.blocks) {
        if (b.values.size() != b.count()) throw ShapeError("block '" + b.name + "' value count mismatch");
        block(b.name, b.dims, b.values);
    }
    return w.data();
}

NetParams decode_params(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("PNP1");
    const std::uint32_t layers = r.u32();
    NetParams out;
    bool have_seed = false;
    for (std::uint32_t l = 0; l < layers; ++l) {
        const std::size_t at = r.offset();
        const std::uint32_t len = r.u32();
        if (len > 4096) throw ParseError(ParseErrorKind::DimensionOverflow, "block name too long", at);
        ParamBlock b;
        b.name = r.bytes(len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw ParseError(ParseErrorKind::DimensionOverflow, "block rank too large", r.offset());
        std::uint64_t count = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            b.dims.push_back(r.u32());
            count = io::checked_count({count, b.dims.back()}, r.offset(), std::uint64_t{1} << 32);
        }
        r.require(count * 8, "payload of block '" + b.name + "'");
        b.values.resize(count);
        for (auto& v : b.values) v = r.f64();
        if (b.name == "meta.seed") {
            if (count != 2) throw ParseError(ParseErrorKind::Malformed, "meta.seed must hold two values", at);
            out.seed = (static_cast<std::uint64_t>(b.values[0]) << 32) | static_cast<std::uint64_t>(b.values[1]);
            have_seed = true;
        } else {
            out.blocks.push_back(std::move(b));
        }
    }
    if (!have_seed) throw ParseError(ParseErrorKind::Malformed, "checkpoint has no meta.seed block", 4);
    if (r.remaining() != 0) throw ParseError(ParseErrorKind::Malformed, "trailing bytes after last block", r.offset());
    return out;
}

void save_params(const NetParams& params, const std::filesystem::path& path) {
    io::write_file(path, encode_params(params));
}

NetParams load_params(const std::filesystem::path& path) { return decode_params(io::read_file(path)); }

}  // namespace affield
