#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "nfcds/error.hpp"

namespace nfcds::fft {

using complex = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// exp(sign * 2 pi i k / n), evaluated directly to avoid recurrence drift.
inline complex twiddle(std::size_t k, std::size_t n, int sign) {
    const double th = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    return {std::cos(th), std::sin(th)};
}

}  // namespace detail

/// Unnormalized 1D DFT of fixed length. Forward uses exp(-2 pi i jk/n).
/// Power-of-two lengths run radix-2 in place; other lengths go through
/// Bluestein's chirp-z on a padded power-of-two transform.
class Plan1d {
public:
    explicit Plan1d(std::size_t n) : n_(n) {
        nfcds::detail::check<ShapeError>(n >= 1, "FFT length must be positive");
        if (detail::is_pow2(n)) {
            build_radix2(n, fwd_twiddles_);
        } else {
            m_ = detail::next_pow2(2 * n - 1);
            build_radix2(m_, fwd_twiddles_);
            chirp_.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                // k^2 mod 2n keeps the angle argument small.
                const std::size_t k2 = (k * k) % (2 * n);
                const double th = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
                chirp_[k] = {std::cos(th), std::sin(th)};
            }
            kernel_.assign(m_, complex{});
            kernel_[0] = chirp_[0];
            for (std::size_t k = 1; k < n; ++k) kernel_[k] = kernel_[m_ - k] = chirp_[k];
            radix2(kernel_, -1);
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }

    /// sign = -1 forward, +1 inverse (still unnormalized).
    void execute(std::span<complex> data, int sign) const {
        nfcds::detail::check<ShapeError>(data.size() == n_, "FFT buffer length mismatch");
        if (n_ == 1) return;
        if (m_ == 0) {
            radix2(data, sign);
            return;
        }
        bluestein(data, sign);
    }

private:
    static void build_radix2(std::size_t n, std::vector<complex>& tw) {
        tw.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) tw[k] = detail::twiddle(k, n, -1);
    }

    // Iterative Cooley-Tukey on a length equal to 2 * fwd_twiddles_.size().
    void radix2(std::span<complex> a, int sign) const {
        const std::size_t n = a.size();
        for (std::size_t i = 1, j = 0; i < n; ++i) {
            std::size_t bit = n >> 1;
            for (; j & bit; bit >>= 1) j ^= bit;
            j ^= bit;
            if (i < j) std::swap(a[i], a[j]);
        }
        const std::size_t full = fwd_twiddles_.size() * 2;
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t stride = full / len;
            for (std::size_t i = 0; i < n; i += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    complex w = fwd_twiddles_[k * stride];
                    if (sign > 0) w = std::conj(w);
                    const complex u = a[i + k];
                    const complex v = a[i + k + half] * w;
                    a[i + k] = u + v;
                    a[i + k + half] = u - v;
                }
            }
        }
    }

    void bluestein(std::span<complex> data, int sign) const {
        // X_k = conj(c_k) * sum_j (x_j conj(c_j)) c_{k-j},  c_k = exp(i pi k^2 / n)
        // for the forward transform; the inverse swaps the conjugations.
        std::vector<complex> buf(m_, complex{});
        for (std::size_t j = 0; j < n_; ++j) {
            const complex c = sign < 0 ? std::conj(chirp_[j]) : chirp_[j];
            buf[j] = data[j] * c;
        }
        radix2(buf, -1);
        if (sign < 0) {
            for (std::size_t k = 0; k < m_; ++k) buf[k] *= kernel_[k];
        } else {
            // Kernel of the conjugate chirp is the index-reversed conjugate.
            for (std::size_t k = 0; k < m_; ++k) buf[k] *= std::conj(kernel_[(m_ - k) % m_]);
        }
        radix2(buf, +1);
        const double inv_m = 1.0 / static_cast<double>(m_);
        for (std::size_t k = 0; k < n_; ++k) {
            const complex c = sign < 0 ? std::conj(chirp_[k]) : chirp_[k];
            data[k] = buf[k] * inv_m * c;
        }
    }

    std::size_t n_;
    std::size_t m_ = 0;  // padded length for Bluestein; 0 when radix-2 applies directly
    std::vector<complex> fwd_twiddles_;
    std::vector<complex> chirp_;
    std::vector<complex> kernel_;
};

/// Row-column 2D transform over a row-major H x W buffer.
class Plan2d {
public:
    Plan2d(std::size_t height, std::size_t width) : rows_(width), cols_(height), h_(height), w_(width) {}

    [[nodiscard]] std::size_t height() const noexcept { return h_; }
    [[nodiscard]] std::size_t width() const noexcept { return w_; }

    void execute(std::span<complex> data, int sign) const {
        nfcds::detail::check<ShapeError>(data.size() == h_ * w_, "2D FFT buffer size mismatch");
        for (std::size_t i = 0; i < h_; ++i) rows_.execute(data.subspan(i * w_, w_), sign);
        std::vector<complex> col(h_);
        for (std::size_t j = 0; j < w_; ++j) {
            for (std::size_t i = 0; i < h_; ++i) col[i] = data[i * w_ + j];
            cols_.execute(col, sign);
            for (std::size_t i = 0; i < h_; ++i) data[i * w_ + j] = col[i];
        }
    }

    void forward(std::span<complex> data) const { execute(data, -1); }

    /// Inverse including the 1/(H W) normalization.
    void inverse(std::span<complex> data) const {
        execute(data, +1);
        const double s = 1.0 / static_cast<double>(h_ * w_);
        for (auto& v : data) v *= s;
    }

private:
    Plan1d rows_;
    Plan1d cols_;
    std::size_t h_;
    std::size_t w_;
};

}  // namespace nfcds::fft
