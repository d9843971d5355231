#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nfcds/error.hpp"

namespace nfcds {

struct Shape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    [[nodiscard]] std::size_t pixels() const noexcept { return height * width; }
    [[nodiscard]] std::size_t size() const noexcept { return height * width * channels; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

/// Dense H x W x C real image, channel-interleaved row-major storage.
class ImageTensor {
public:
    ImageTensor() = default;
    explicit ImageTensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}
    ImageTensor(std::size_t h, std::size_t w, std::size_t c = 1, double fill = 0.0)
        : ImageTensor(Shape{h, w, c}, fill) {}
    ImageTensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        detail::check<ShapeError>(data_.size() == shape_.size(), "image data size does not match shape " +
                                                                     to_string(shape_));
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t height() const noexcept { return shape_.height; }
    [[nodiscard]] std::size_t width() const noexcept { return shape_.width; }
    [[nodiscard]] std::size_t channels() const noexcept { return shape_.channels; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j, std::size_t c = 0) {
        return data_[(i * shape_.width + j) * shape_.channels + c];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t c = 0) const {
        return data_[(i * shape_.width + j) * shape_.channels + c];
    }
    double& operator[](std::size_t k) { return data_[k]; }
    double operator[](std::size_t k) const { return data_[k]; }

    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

    /// One channel as a contiguous H x W plane.
    [[nodiscard]] std::vector<double> plane(std::size_t c) const {
        std::vector<double> out(shape_.pixels());
        for (std::size_t p = 0; p < out.size(); ++p) out[p] = data_[p * shape_.channels + c];
        return out;
    }
    void set_plane(std::size_t c, std::span<const double> plane) {
        detail::check<ShapeError>(plane.size() == shape_.pixels(), "plane size mismatch");
        for (std::size_t p = 0; p < plane.size(); ++p) data_[p * shape_.channels + c] = plane[p];
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    ImageTensor& operator+=(const ImageTensor& o) {
        require_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    ImageTensor& operator-=(const ImageTensor& o) {
        require_same(o);
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    ImageTensor& operator*=(double s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend ImageTensor operator+(ImageTensor a, const ImageTensor& b) { return a += b; }
    friend ImageTensor operator-(ImageTensor a, const ImageTensor& b) { return a -= b; }
    friend ImageTensor operator*(ImageTensor a, double s) { return a *= s; }
    friend ImageTensor operator*(double s, ImageTensor a) { return a *= s; }

    void require_same(const ImageTensor& o) const {
        detail::check<ShapeError>(shape_ == o.shape_,
                                  "shape mismatch: " + to_string(shape_) + " vs " + to_string(o.shape_));
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// a*x + b*y
inline ImageTensor axpby(double a, const ImageTensor& x, double b, const ImageTensor& y) {
    x.require_same(y);
    ImageTensor out(x.shape());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = a * x[k] + b * y[k];
    return out;
}

inline double dot(const ImageTensor& a, const ImageTensor& b) {
    a.require_same(b);
    long double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<long double>(a[k]) * b[k];
    return static_cast<double>(s);
}

inline double squared_norm(const ImageTensor& a) { return dot(a, a); }
inline double norm(const ImageTensor& a) { return std::sqrt(squared_norm(a)); }

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
    a.require_same(b);
    double m = 0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace nfcds
