#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "nfcds/error.hpp"
#include "nfcds/image.hpp"
#include "nfcds/spectral.hpp"

namespace nfcds {

/// 10 log10(peak^2 / MSE); +inf when the images are identical.
inline double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0) {
    a.require_same(b);
    detail::check<ConfigError>(peak > 0, "psnr peak must be > 0");
    detail::check<ShapeError>(!a.empty(), "psnr of empty images");
    long double se = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const long double d = static_cast<long double>(a[k]) - b[k];
        se += d * d;
    }
    const double mse = static_cast<double>(se / static_cast<long double>(a.size()));
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;
};

/// Mean SSIM over all window positions fully inside the image, averaged over
/// channels. Local statistics use a normalized separable Gaussian window.
inline double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& p = {}) {
    a.require_same(b);
    const std::size_t H = a.height(), W = a.width(), n = p.window;
    detail::check<ShapeError>(std::min(H, W) >= n, "ssim requires min(H, W) >= window size " + std::to_string(n));
    std::vector<double> g(n);
    double gs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(n - 1) / 2;
        g[i] = std::exp(-d * d / (2 * p.sigma * p.sigma));
        gs += g[i];
    }
    for (auto& v : g) v /= gs;
    const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
    const double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);
    const std::size_t oh = H - n + 1, ow = W - n + 1;

    // Valid-region separable filter of an H x W plane.
    const auto filt = [&](const std::vector<double>& src) {
        std::vector<double> tmp(H * ow, 0.0), out(oh * ow, 0.0);
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s += g[k] * src[i * W + j + k];
                tmp[i * ow + j] = s;
            }
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double s = 0;
                for (std::size_t k = 0; k < n; ++k) s += g[k] * tmp[(i + k) * ow + j];
                out[i * ow + j] = s;
            }
        return out;
    };

    double total = 0;
    for (std::size_t c = 0; c < a.channels(); ++c) {
        const auto x = a.plane(c), y = b.plane(c);
        std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) {
            xx[k] = x[k] * x[k];
            yy[k] = y[k] * y[k];
            xy[k] = x[k] * y[k];
        }
        const auto mx = filt(x), my = filt(y), sxx = filt(xx), syy = filt(yy), sxy = filt(xy);
        double acc = 0;
        for (std::size_t k = 0; k < mx.size(); ++k) {
            const double vx = sxx[k] - mx[k] * mx[k];
            const double vy = syy[k] - my[k] * my[k];
            const double cxy = sxy[k] - mx[k] * my[k];
            acc += ((2 * mx[k] * my[k] + c1) * (2 * cxy + c2)) /
                   ((mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / static_cast<double>(a.channels());
}

struct RadialBin {
    std::size_t radius = 0;
    double error = 0.0;     // mean |F(a) - F(b)| over the annulus (all channels)
    std::size_t count = 0;  // frequency bins in the annulus (per channel)
};

/// Mean spectral error per integer radius, bins assigned by rounding ||omega||.
inline std::vector<RadialBin> radial_spectral_error(const ImageTensor& a, const ImageTensor& b) {
    a.require_same(b);
    const auto diff = forward_fft2(a - b);
    const FrequencyGrid grid(a.height(), a.width());
    const auto nbins = static_cast<std::size_t>(std::lround(grid.max_radius())) + 1;
    std::vector<RadialBin> bins(nbins);
    std::vector<double> sums(nbins, 0.0);
    for (std::size_t k = 0; k < grid.radii().size(); ++k) {
        const auto r = static_cast<std::size_t>(std::lround(grid.radii()[k]));
        ++bins[r].count;
        for (const auto& ch : diff.channels) sums[r] += std::abs(ch[k]);
    }
    for (std::size_t r = 0; r < nbins; ++r) {
        bins[r].radius = r;
        if (bins[r].count > 0)
            bins[r].error = sums[r] / static_cast<double>(bins[r].count * diff.channels.size());
    }
    return bins;
}

struct MetricReport {
    double psnr = 0;
    double ssim = 0;
    std::vector<RadialBin> band_errors;
};

inline MetricReport compare(const ImageTensor& a, const ImageTensor& b, double peak = 1.0) {
    MetricReport r;
    r.psnr = psnr(a, b, peak);
    SsimParams sp;
    sp.peak = peak;
    r.ssim = std::min(a.height(), a.width()) >= sp.window ? ssim(a, b, sp) : std::numeric_limits<double>::quiet_NaN();
    r.band_errors = radial_spectral_error(a, b);
    return r;
}

}  // namespace nfcds
