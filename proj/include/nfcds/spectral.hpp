#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "nfcds/error.hpp"
#include "nfcds/fft.hpp"
#include "nfcds/image.hpp"

namespace nfcds {

using complex = std::complex<double>;

/// Radial frequency coordinates ||omega|| on a DC-centered H x W lattice, in
/// frequency-bin units. Index (u, v) of the centered layout corresponds to
/// frequency (u - H/2, v - W/2) with integer division.
class FrequencyGrid {
public:
    FrequencyGrid(std::size_t height, std::size_t width) : h_(height), w_(width), radii_(height * width) {
        detail::check<ShapeError>(height >= 1 && width >= 1, "frequency grid needs positive dimensions");
        for (std::size_t u = 0; u < h_; ++u) {
            const double fu = static_cast<double>(u) - static_cast<double>(h_ / 2);
            for (std::size_t v = 0; v < w_; ++v) {
                const double fv = static_cast<double>(v) - static_cast<double>(w_ / 2);
                radii_[u * w_ + v] = std::hypot(fu, fv);
            }
        }
    }

    [[nodiscard]] std::size_t height() const noexcept { return h_; }
    [[nodiscard]] std::size_t width() const noexcept { return w_; }
    [[nodiscard]] std::size_t center_row() const noexcept { return h_ / 2; }
    [[nodiscard]] std::size_t center_col() const noexcept { return w_ / 2; }
    [[nodiscard]] double radius(std::size_t u, std::size_t v) const { return radii_[u * w_ + v]; }
    [[nodiscard]] const std::vector<double>& radii() const noexcept { return radii_; }
    [[nodiscard]] double max_radius() const { return *std::max_element(radii_.begin(), radii_.end()); }

private:
    std::size_t h_;
    std::size_t w_;
    std::vector<double> radii_;
};

enum class RadiusSchedule { Constant, PerStep };

/// Parameters of the sigmoid soft-threshold mask
///   M(omega) = 1 / (1 + exp(-alpha * (||omega|| - r(t)))).
/// `bypass` turns the mask into the identity (M == 1).
struct FrequencyMaskSpec {
    double r_thresh = 35.0;
    double alpha = 5.0;
    RadiusSchedule schedule = RadiusSchedule::Constant;
    /// (timestep, radius) breakpoints sorted by timestep; r(t) takes the radius
    /// of the largest breakpoint <= t, or the first entry below all of them.
    std::vector<std::pair<int, double>> radius_table;
    bool bypass = false;
    /// Rescale filtered noise by sqrt(HW / sum M^2) to restore unit variance.
    bool renormalize = false;

    static FrequencyMaskSpec identity() {
        FrequencyMaskSpec s;
        s.bypass = true;
        return s;
    }

    void validate() const {
        if (bypass) return;
        detail::check<ConfigError>(std::isfinite(alpha) && alpha > 0, "mask.alpha must be > 0");
        detail::check<ConfigError>(std::isfinite(r_thresh) && r_thresh >= 0, "mask.r_thresh must be >= 0");
        if (schedule == RadiusSchedule::PerStep) {
            detail::check<ConfigError>(!radius_table.empty(), "mask.r_table is empty for a per-step schedule");
            for (std::size_t i = 0; i < radius_table.size(); ++i) {
                detail::check<ConfigError>(radius_table[i].second >= 0, "mask.r_table radii must be >= 0");
                if (i > 0)
                    detail::check<ConfigError>(radius_table[i].first > radius_table[i - 1].first,
                                               "mask.r_table timesteps must be strictly increasing");
            }
        }
    }

    [[nodiscard]] double radius_at(int t) const {
        if (schedule == RadiusSchedule::Constant || radius_table.empty()) return r_thresh;
        double r = radius_table.front().second;
        for (const auto& [step, radius] : radius_table) {
            if (step <= t) r = radius;
            else break;
        }
        return r;
    }
};

inline double soft_threshold(double radius, double cutoff, double alpha) {
    return 1.0 / (1.0 + std::exp(-alpha * (radius - cutoff)));
}

/// Mask over the centered grid, row-major H x W.
inline std::vector<double> soft_threshold_mask(const FrequencyGrid& grid, const FrequencyMaskSpec& spec, int t) {
    spec.validate();
    std::vector<double> m(grid.radii().size(), 1.0);
    if (spec.bypass) return m;
    const double r = spec.radius_at(t);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = soft_threshold(grid.radii()[k], r, spec.alpha);
    return m;
}

/// Per-channel spectrum in DC-centered layout; coefficients stored as
/// [channel][u * W + v].
struct SpectralField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::vector<complex>> channels;

    [[nodiscard]] complex at(std::size_t c, std::size_t u, std::size_t v) const {
        return channels[c][u * width + v];
    }
};

namespace detail {

// Move between natural FFT order and centered order. For odd sizes the shift
// is not its own inverse, hence the explicit direction.
inline void shift_plane(std::vector<complex>& a, std::size_t h, std::size_t w, bool to_centered) {
    std::vector<complex> out(a.size());
    const std::size_t sh = h / 2;
    const std::size_t sw = w / 2;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            if (to_centered) out[((i + sh) % h) * w + (j + sw) % w] = a[i * w + j];
            else out[i * w + j] = a[((i + sh) % h) * w + (j + sw) % w];
        }
    }
    a = std::move(out);
}

}  // namespace detail

/// Unnormalized forward 2D DFT of each channel; DC lands at (H/2, W/2).
inline SpectralField forward_fft2(const ImageTensor& image) {
    detail::check<ShapeError>(image.height() >= 2 && image.width() >= 2, "forward_fft2 requires H, W >= 2");
    detail::check<NumericalError>(image.all_finite(), "forward_fft2: non-finite input values");
    const std::size_t h = image.height(), w = image.width();
    fft::Plan2d plan(h, w);
    SpectralField out{h, w, {}};
    out.channels.resize(image.channels());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        auto& buf = out.channels[c];
        buf.resize(h * w);
        for (std::size_t p = 0; p < h * w; ++p) buf[p] = image[p * image.channels() + c];
        plan.forward(buf);
        detail::shift_plane(buf, h, w, true);
    }
    return out;
}

/// Inverse of forward_fft2 (1/(HW) normalization). Imaginary parts are
/// discarded after checking that they stay below `imag_tol` in absolute value.
inline ImageTensor inverse_fft2(const SpectralField& field, double imag_tol = 1e-9) {
    const std::size_t h = field.height, w = field.width;
    fft::Plan2d plan(h, w);
    ImageTensor out(h, w, field.channels.size());
    for (std::size_t c = 0; c < field.channels.size(); ++c) {
        auto buf = field.channels[c];
        detail::shift_plane(buf, h, w, false);
        plan.inverse(buf);
        for (std::size_t p = 0; p < h * w; ++p) {
            if (!(std::abs(buf[p].imag()) <= imag_tol))
                throw NumericalError("inverse_fft2: imaginary residue " + std::to_string(std::abs(buf[p].imag())) +
                                     " exceeds tolerance (spectrum not Hermitian)");
            out[p * field.channels.size() + c] = buf[p].real();
        }
    }
    return out;
}

/// Multiply every channel of a centered spectrum by a real centered mask.
inline void apply_mask(SpectralField& field, const std::vector<double>& mask) {
    detail::check<ShapeError>(mask.size() == field.height * field.width, "mask size does not match spectrum");
    for (auto& ch : field.channels)
        for (std::size_t k = 0; k < ch.size(); ++k) ch[k] *= mask[k];
}

/// NFCDS noise filter with a precomputed mask: F^-1(F(noise) * M).
inline ImageTensor filter_with_mask(const ImageTensor& noise, const std::vector<double>& mask, bool renormalize = false) {
    auto spec = forward_fft2(noise);
    apply_mask(spec, mask);
    auto out = inverse_fft2(spec);
    if (renormalize) {
        double s2 = 0;
        for (double m : mask) s2 += m * m;
        if (s2 > 0) out *= std::sqrt(static_cast<double>(mask.size()) / s2);
    }
    return out;
}

inline ImageTensor nfcds_filter(const ImageTensor& noise, const FrequencyMaskSpec& spec, int t) {
    if (spec.bypass) {
        detail::check<NumericalError>(noise.all_finite(), "nfcds_filter: non-finite input values");
        return noise;
    }
    const FrequencyGrid grid(noise.height(), noise.width());
    return filter_with_mask(noise, soft_threshold_mask(grid, spec, t), spec.renormalize);
}

struct BandSplit {
    ImageTensor low;
    ImageTensor high;
};

/// image = low + high, with high the mask-filtered component.
inline BandSplit band_split(const ImageTensor& image, const FrequencyMaskSpec& spec, int t) {
    FrequencyMaskSpec s = spec;
    s.renormalize = false;
    BandSplit out;
    out.high = nfcds_filter(image, s, t);
    out.low = image - out.high;
    return out;
}

inline BandSplit band_split_with_mask(const ImageTensor& image, const std::vector<double>& mask) {
    BandSplit out;
    out.high = filter_with_mask(image, mask);
    out.low = image - out.high;
    return out;
}

/// Sum of |coefficient|^2 over all channels.
inline double spectral_energy(const SpectralField& f) {
    double e = 0;
    for (const auto& ch : f.channels)
        for (const auto& z : ch) e += std::norm(z);
    return e;
}

}  // namespace nfcds
