#pragma once

#include <cstddef>
#include <vector>

namespace affield {

struct Shape4 {
    int n = 1, c = 1, h = 1, w = 1;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// NCHW array of 64-bit reals.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, double fill = 0.0) : shape_(shape), values_(shape.count(), fill) {}
    Tensor4(Shape4 shape, std::vector<double> values);

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& at(int n, int c, int y, int x) { return values_[index(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return values_[index(n, c, y, x)]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape4 shape_{0, 0, 0, 0};
    std::vector<double> values_;
};

}  // namespace affield
