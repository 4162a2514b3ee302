#include "affield/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "affield/binary_io.hpp"
#include "affield/error.hpp"

namespace affield {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> b) : b_(b) {}

    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::uint64_t number() {
        skip_space();
        const std::size_t start = pos_;
        std::uint64_t v = 0;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            if (v > (std::uint64_t{1} << 32))
                throw ParseError(ParseErrorKind::DimensionOverflow, "PNM header value too large at offset " +
                                                                        std::to_string(start), start);
        }
        if (pos_ == start) {
            if (pos_ >= b_.size())
                throw ParseError(ParseErrorKind::Truncated, "PNM header truncated at offset " + std::to_string(pos_),
                                 pos_);
            throw ParseError(ParseErrorKind::Malformed, "PNM header expects a number at offset " + std::to_string(pos_),
                             pos_);
        }
        return v;
    }

    std::size_t pos_ = 0;

private:
    std::span<const std::uint8_t> b_;
};

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw ParseError(ParseErrorKind::BadMagic, "not a binary PGM/PPM file (offset 0)", 0);
    const int channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader h(bytes);
    h.pos_ = 2;
    const auto w = h.number(), ht = h.number();
    const std::size_t maxval_at = h.pos_;
    const auto maxval = h.number();
    if (w == 0 || ht == 0) throw ParseError(ParseErrorKind::Malformed, "PNM has a zero dimension", 2);
    if (maxval == 0 || maxval > 65535)
        throw ParseError(ParseErrorKind::Malformed, "PNM maxval out of range at offset " + std::to_string(maxval_at),
                         maxval_at);
    if (h.pos_ >= bytes.size() || !std::isspace(bytes[h.pos_]))
        throw ParseError(ParseErrorKind::Truncated, "PNM header truncated at offset " + std::to_string(h.pos_), h.pos_);
    std::size_t pos = h.pos_ + 1;
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t count = io::checked_count({ht, w, static_cast<std::uint64_t>(channels)}, 2, 1ull << 30);
    if (bytes.size() - pos < count * sample_bytes)
        throw ParseError(ParseErrorKind::Truncated,
                         "PNM pixel data truncated at offset " + std::to_string(bytes.size()), bytes.size());
    Image img(static_cast<int>(ht), static_cast<int>(w), channels);
    auto& d = img.data();
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned v = sample_bytes == 1 ? bytes[pos + i] : (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1];
        d[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
    return img;
}

Image load_pnm(const std::filesystem::path& path) { return decode_pnm(io::read_file(path)); }

std::vector<std::uint8_t> encode_pnm(const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) throw InvalidArgument("PNM output needs 1 or 3 channels");
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) +
                               " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.data().size());
    for (double v : img.data()) out.push_back(to_byte(v));
    return out;
}

void save_pnm(const Image& img, const std::filesystem::path& path) { io::write_file(path, encode_pnm(img)); }

ObjectMask load_mask(const std::filesystem::path& path) {
    const Image m = load_pnm(path);
    if (m.channels() != 1) throw InvalidArgument("mask must be a PGM image: " + path.string());
    std::vector<std::uint8_t> v(m.data().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m.data()[i] > 0.0;
    return ObjectMask(m.height(), m.width(), std::move(v));
}

void save_mask(const ObjectMask& mask, const std::filesystem::path& path) {
    Image m(mask.height(), mask.width(), 1);
    for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = mask.values()[i] ? 1.0 : 0.0;
    save_pnm(m, path);
}

Image quantize8(const Image& img) {
    Image out = img;
    for (double& v : out.data()) v = to_byte(v) / 255.0;
    return out;
}

}  // namespace affield
