#include "affield/image.hpp"

#include <cmath>

#include "affield/error.hpp"

namespace affield {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) throw InvalidArgument("negative image dimension");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image to_luma(const Image& img) {
    if (img.channels() == 1) return img;
    if (img.channels() != 3) throw InvalidArgument("expected 1 or 3 channels");
    Image out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
        }
    }
    return out;
}

double sample_bilinear(const Image& img, double x, double y, int c) {
    const int w = img.width();
    const int h = img.height();
    if (!(x > -1.0 && x < w && y > -1.0 && y < h)) return 0.0;
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = x - fx0;
    const double ay = y - fy0;
    double v = 0.0;
    const bool xin0 = x0 >= 0, xin1 = x0 + 1 < w;
    const bool yin0 = y0 >= 0, yin1 = y0 + 1 < h;
    if (yin0) {
        if (xin0) v += (1.0 - ax) * (1.0 - ay) * img.at(y0, x0, c);
        if (xin1) v += ax * (1.0 - ay) * img.at(y0, x0 + 1, c);
    }
    if (yin1) {
        if (xin0) v += (1.0 - ax) * ay * img.at(y0 + 1, x0, c);
        if (xin1) v += ax * ay * img.at(y0 + 1, x0 + 1, c);
    }
    return v;
}

}  // namespace affield
