#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "nfcds/error.hpp"
#include "nfcds/fft.hpp"
#include "nfcds/image.hpp"
#include "nfcds/random.hpp"

namespace nfcds {

/// Small 2D filter, row-major.
struct Kernel2d {
    std::size_t height = 1;
    std::size_t width = 1;
    std::vector<double> values{1.0};

    [[nodiscard]] double operator()(std::size_t a, std::size_t b) const { return values[a * width + b]; }
    [[nodiscard]] double sum() const {
        long double s = 0;
        for (double v : values) s += v;
        return static_cast<double>(s);
    }

    static Kernel2d delta() { return {}; }
    static Kernel2d outer(const std::vector<double>& rows, const std::vector<double>& cols) {
        Kernel2d k{rows.size(), cols.size(), std::vector<double>(rows.size() * cols.size())};
        for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < cols.size(); ++b) k.values[a * cols.size() + b] = rows[a] * cols[b];
        return k;
    }
};

inline Kernel2d gaussian_kernel(std::size_t size, double sigma) {
    detail::check<ConfigError>(size % 2 == 1 && sigma > 0, "gaussian kernel needs odd size and sigma > 0");
    std::vector<double> g(size);
    const double c = static_cast<double>(size / 2);
    double s = 0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - c;
        g[i] = std::exp(-d * d / (2 * sigma * sigma));
        s += g[i];
    }
    for (auto& v : g) v /= s;
    return Kernel2d::outer(g, g);
}

/// f x f block average.
inline Kernel2d box_kernel(std::size_t factor) {
    std::vector<double> g(factor, 1.0 / static_cast<double>(factor));
    return Kernel2d::outer(g, g);
}

/// Antialiased bicubic (Keys, a = -0.5) decimation filter with 4f taps per
/// axis, stretched by the factor and normalized to unit sum.
inline Kernel2d bicubic_kernel(std::size_t factor) {
    detail::check<ConfigError>(factor >= 1, "downsample factor must be >= 1");
    if (factor == 1) return Kernel2d::delta();
    const auto cubic = [](double x) {
        constexpr double a = -0.5;
        x = std::abs(x);
        if (x <= 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
        if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
        return 0.0;
    };
    const std::size_t taps = 4 * factor;
    std::vector<double> g(taps);
    double s = 0;
    for (std::size_t j = 0; j < taps; ++j) {
        const double x = (static_cast<double>(j) - (static_cast<double>(taps) - 1) / 2) / static_cast<double>(factor);
        g[j] = cubic(x);
        s += g[j];
    }
    for (auto& v : g) v /= s;
    return Kernel2d::outer(g, g);
}

namespace op {
struct Identity {};
/// Periodic convolution; kernel anchored at (kh/2, kw/2).
struct CircularBlur {
    Kernel2d kernel;
};
/// Periodic antialias filtering followed by stride-`factor` decimation. The
/// kernel center is aligned with the center of each factor x factor block.
struct Downsample {
    std::size_t factor = 2;
    Kernel2d antialias;
};
}  // namespace op

using Operator = std::variant<op::Identity, op::CircularBlur, op::Downsample>;

/// y = A x + n, n ~ N(0, sigma_y^2 I).
struct DegradationModel {
    Operator op = op::Identity{};
    double sigma_y = 0.0;

    static DegradationModel identity(double sigma_y = 0.0) { return {op::Identity{}, sigma_y}; }
    static DegradationModel blur(Kernel2d k, double sigma_y = 0.0) { return {op::CircularBlur{std::move(k)}, sigma_y}; }
    static DegradationModel downsample(std::size_t factor, Kernel2d k, double sigma_y = 0.0) {
        return {op::Downsample{factor, std::move(k)}, sigma_y};
    }

    [[nodiscard]] bool is_downsample() const { return std::holds_alternative<op::Downsample>(op); }

    void validate() const {
        detail::check<ConfigError>(std::isfinite(sigma_y) && sigma_y >= 0, "task.sigma_y must be >= 0");
        const auto check_kernel = [](const Kernel2d& k) {
            detail::check<ConfigError>(k.values.size() == k.height * k.width && !k.values.empty(),
                                       "kernel size does not match its header");
            detail::check<ConfigError>(std::abs(k.sum() - 1.0) < 1e-9, "kernel must sum to 1 (got " +
                                                                           std::to_string(k.sum()) + ")");
        };
        if (const auto* b = std::get_if<op::CircularBlur>(&op)) check_kernel(b->kernel);
        if (const auto* d = std::get_if<op::Downsample>(&op)) {
            detail::check<ConfigError>(d->factor >= 1, "task.sr_factor must be >= 1");
            check_kernel(d->antialias);
        }
    }

    /// Measurement-space shape for an input of shape `s`.
    [[nodiscard]] Shape measurement_shape(const Shape& s) const {
        if (const auto* d = std::get_if<op::Downsample>(&op)) {
            detail::check<ShapeError>(s.height % d->factor == 0 && s.width % d->factor == 0,
                                      "downsample factor " + std::to_string(d->factor) +
                                          " does not divide image size " + to_string(s));
            return {s.height / d->factor, s.width / d->factor, s.channels};
        }
        return s;
    }

    /// Signal-space shape producing a measurement of shape `m`.
    [[nodiscard]] Shape signal_shape(const Shape& m) const {
        if (const auto* d = std::get_if<op::Downsample>(&op)) return {m.height * d->factor, m.width * d->factor, m.channels};
        return m;
    }
};

namespace detail {

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

inline std::ptrdiff_t downsample_offset(const op::Downsample& d, std::size_t taps) {
    return (static_cast<std::ptrdiff_t>(taps) - static_cast<std::ptrdiff_t>(d.factor)) / 2;
}

}  // namespace detail

inline ImageTensor apply(const DegradationModel& model, const ImageTensor& x) {
    return std::visit(
        [&](const auto& o) -> ImageTensor {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, op::Identity>) {
                return x;
            } else if constexpr (std::is_same_v<T, op::CircularBlur>) {
                const auto& k = o.kernel;
                const auto H = x.height(), W = x.width(), C = x.channels();
                const auto ca = static_cast<std::ptrdiff_t>(k.height / 2), cb = static_cast<std::ptrdiff_t>(k.width / 2);
                ImageTensor y(x.shape());
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j)
                        for (std::size_t a = 0; a < k.height; ++a)
                            for (std::size_t b = 0; b < k.width; ++b) {
                                const double w = k(a, b);
                                if (w == 0.0) continue;
                                const auto si = detail::wrap(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(a) + ca, H);
                                const auto sj = detail::wrap(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(b) + cb, W);
                                for (std::size_t c = 0; c < C; ++c) y(i, j, c) += w * x(si, sj, c);
                            }
                return y;
            } else {
                const Shape ms = model.measurement_shape(x.shape());
                const auto& k = o.antialias;
                const auto oh = detail::downsample_offset(o, k.height), ow = detail::downsample_offset(o, k.width);
                const auto f = static_cast<std::ptrdiff_t>(o.factor);
                ImageTensor y(ms);
                for (std::size_t i = 0; i < ms.height; ++i)
                    for (std::size_t j = 0; j < ms.width; ++j)
                        for (std::size_t a = 0; a < k.height; ++a)
                            for (std::size_t b = 0; b < k.width; ++b) {
                                const double w = k(a, b);
                                const auto si = detail::wrap(static_cast<std::ptrdiff_t>(i) * f + static_cast<std::ptrdiff_t>(a) - oh, x.height());
                                const auto sj = detail::wrap(static_cast<std::ptrdiff_t>(j) * f + static_cast<std::ptrdiff_t>(b) - ow, x.width());
                                for (std::size_t c = 0; c < ms.channels; ++c) y(i, j, c) += w * x(si, sj, c);
                            }
                return y;
            }
        },
        model.op);
}

/// A^T z. `signal` is the shape of the signal space (needed for downsampling).
inline ImageTensor adjoint(const DegradationModel& model, const ImageTensor& z, const Shape& signal) {
    detail::check<ShapeError>(model.measurement_shape(signal) == z.shape(),
                              "adjoint: measurement shape " + to_string(z.shape()) +
                                  " incompatible with signal shape " + to_string(signal));
    return std::visit(
        [&](const auto& o) -> ImageTensor {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, op::Identity>) {
                return z;
            } else if constexpr (std::is_same_v<T, op::CircularBlur>) {
                const auto& k = o.kernel;
                const auto H = z.height(), W = z.width(), C = z.channels();
                const auto ca = static_cast<std::ptrdiff_t>(k.height / 2), cb = static_cast<std::ptrdiff_t>(k.width / 2);
                ImageTensor x(z.shape());
                for (std::size_t i = 0; i < H; ++i)
                    for (std::size_t j = 0; j < W; ++j)
                        for (std::size_t a = 0; a < k.height; ++a)
                            for (std::size_t b = 0; b < k.width; ++b) {
                                const double w = k(a, b);
                                if (w == 0.0) continue;
                                const auto si = detail::wrap(static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(a) - ca, H);
                                const auto sj = detail::wrap(static_cast<std::ptrdiff_t>(j) + static_cast<std::ptrdiff_t>(b) - cb, W);
                                for (std::size_t c = 0; c < C; ++c) x(i, j, c) += w * z(si, sj, c);
                            }
                return x;
            } else {
                const auto& k = o.antialias;
                const auto oh = detail::downsample_offset(o, k.height), ow = detail::downsample_offset(o, k.width);
                const auto f = static_cast<std::ptrdiff_t>(o.factor);
                ImageTensor x(signal);
                for (std::size_t i = 0; i < z.height(); ++i)
                    for (std::size_t j = 0; j < z.width(); ++j)
                        for (std::size_t a = 0; a < k.height; ++a)
                            for (std::size_t b = 0; b < k.width; ++b) {
                                const double w = k(a, b);
                                const auto si = detail::wrap(static_cast<std::ptrdiff_t>(i) * f + static_cast<std::ptrdiff_t>(a) - oh, signal.height);
                                const auto sj = detail::wrap(static_cast<std::ptrdiff_t>(j) * f + static_cast<std::ptrdiff_t>(b) - ow, signal.width);
                                for (std::size_t c = 0; c < z.channels(); ++c) x(si, sj, c) += w * z(i, j, c);
                            }
                return x;
            }
        },
        model.op);
}

inline ImageTensor adjoint(const DegradationModel& model, const ImageTensor& z) {
    return adjoint(model, z, model.signal_shape(z.shape()));
}

inline constexpr std::size_t kDenseLimit = 4096;

/// Explicit matrix of A acting on vec(x) in ImageTensor storage order.
inline Eigen::MatrixXd materialize_dense(const DegradationModel& model, std::size_t h, std::size_t w,
                                         std::size_t channels = 1) {
    detail::check<ConfigError>(h * w <= kDenseLimit, "materialize_dense refused: h*w = " + std::to_string(h * w) +
                                                         " exceeds " + std::to_string(kDenseLimit));
    const Shape s{h, w, channels};
    const Shape ms = model.measurement_shape(s);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(ms.size()), static_cast<Eigen::Index>(s.size()));
    ImageTensor probe(s);
    for (std::size_t col = 0; col < s.size(); ++col) {
        probe[col] = 1.0;
        const auto y = apply(model, probe);
        for (std::size_t r = 0; r < ms.size(); ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = y[r];
        probe[col] = 0.0;
    }
    return m;
}

/// Centered-layout-free transfer function H(k) of a circular operator on an
/// h x w grid, in natural FFT order. Empty for decimating operators.
inline std::optional<std::vector<std::complex<double>>> transfer_function(const DegradationModel& model, std::size_t h,
                                                                          std::size_t w) {
    if (std::holds_alternative<op::Identity>(model.op)) return std::vector<std::complex<double>>(h * w, 1.0);
    const auto* b = std::get_if<op::CircularBlur>(&model.op);
    if (b == nullptr) return std::nullopt;
    const auto& k = b->kernel;
    std::vector<std::complex<double>> kimg(h * w);
    const auto ca = static_cast<std::ptrdiff_t>(k.height / 2), cb = static_cast<std::ptrdiff_t>(k.width / 2);
    for (std::size_t a = 0; a < k.height; ++a)
        for (std::size_t bb = 0; bb < k.width; ++bb)
            kimg[detail::wrap(static_cast<std::ptrdiff_t>(a) - ca, h) * w +
                 detail::wrap(static_cast<std::ptrdiff_t>(bb) - cb, w)] += k(a, bb);
    fft::Plan2d(h, w).forward(kimg);
    return kimg;
}

/// A x0 + sigma_y * g with g drawn from the seeded measurement stream.
inline ImageTensor synthesize_measurement(const DegradationModel& model, const ImageTensor& x0, std::uint64_t seed) {
    model.validate();
    auto y = apply(model, x0);
    if (model.sigma_y > 0) {
        CounterRng rng(seed, streams::measurement);
        for (auto& v : y.values()) v += model.sigma_y * rng.normal();
    }
    return y;
}

}  // namespace nfcds
