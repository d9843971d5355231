#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "nfcds/degradation.hpp"
#include "nfcds/error.hpp"
#include "nfcds/image.hpp"
#include "nfcds/random.hpp"
#include "nfcds/schedule.hpp"
#include "nfcds/spectral.hpp"

namespace nfcds {

/// Gaussian image prior x0 ~ N(mean, U^H diag(P) U) with U the unitary 2D DFT,
/// i.e. stationary with per-frequency variance P. `spectral_power` uses the
/// DC-centered layout of FrequencyGrid and is shared by all channels.
struct StationaryGaussianPrior {
    ImageTensor mean;
    std::vector<double> spectral_power;

    [[nodiscard]] const Shape& shape() const { return mean.shape(); }

    void validate() const {
        detail::check<ConfigError>(spectral_power.size() == mean.height() * mean.width(),
                                   "prior spectral_power size must equal H*W");
        for (double p : spectral_power)
            detail::check<ConfigError>(std::isfinite(p) && p > 0, "prior spectral_power must be > 0 everywhere");
    }
};

/// P(omega) = floor + amplitude / (1 + (||omega|| / corner)^2)^(exponent / 2).
/// Low frequencies carry most of the variance, as in natural images.
inline StationaryGaussianPrior radial_power_law_prior(const Shape& shape, double mean, double amplitude, double corner,
                                                      double exponent, double floor) {
    detail::check<ConfigError>(amplitude > 0 && corner > 0 && exponent >= 0 && floor >= 0,
                               "power-law prior requires amplitude > 0, corner > 0, exponent >= 0, floor >= 0");
    const FrequencyGrid grid(shape.height, shape.width);
    StationaryGaussianPrior p{ImageTensor(shape, mean), std::vector<double>(grid.radii().size())};
    for (std::size_t k = 0; k < p.spectral_power.size(); ++k) {
        const double q = grid.radii()[k] / corner;
        p.spectral_power[k] = floor + amplitude / std::pow(1.0 + q * q, exponent / 2.0);
    }
    p.validate();
    return p;
}

/// Draw x0 = mean + F^-1(sqrt(P) * F(w)), w white standard normal.
inline ImageTensor sample_prior(const StationaryGaussianPrior& prior, std::uint64_t seed) {
    auto w = standard_normal(prior.shape(), seed, streams::prior_sample);
    std::vector<double> amp(prior.spectral_power.size());
    for (std::size_t k = 0; k < amp.size(); ++k) amp[k] = std::sqrt(prior.spectral_power[k]);
    return prior.mean + filter_with_mask(w, amp);
}

/// Closed-form MMSE estimate E[x0 | y] for y = A x0 + n under the stationary
/// prior, for operators diagonalized by the DFT (identity, circular blur).
inline ImageTensor wiener_posterior_mean(const StationaryGaussianPrior& prior, const DegradationModel& model,
                                         const ImageTensor& y) {
    prior.validate();
    const auto h = prior.mean.height(), w = prior.mean.width();
    auto tf = transfer_function(model, h, w);
    detail::check<ConfigError>(tf.has_value(), "wiener_posterior_mean needs a circulant operator");
    // Bring the transfer function into centered layout.
    detail::shift_plane(*tf, h, w, true);
    auto spec = forward_fft2(y - apply(model, prior.mean));
    const double s2 = model.sigma_y * model.sigma_y;
    for (auto& ch : spec.channels)
        for (std::size_t k = 0; k < ch.size(); ++k) {
            const double p = prior.spectral_power[k];
            const double den = std::norm((*tf)[k]) * p + s2;
            ch[k] = den > 0 ? ch[k] * std::conj((*tf)[k]) * p / den : complex{};
        }
    return prior.mean + inverse_fft2(spec);
}

/// Per-pixel MMSE of wiener_posterior_mean (average posterior variance).
inline double wiener_expected_mse(const StationaryGaussianPrior& prior, const DegradationModel& model) {
    const auto h = prior.mean.height(), w = prior.mean.width();
    auto tf = transfer_function(model, h, w);
    detail::check<ConfigError>(tf.has_value(), "wiener_expected_mse needs a circulant operator");
    detail::shift_plane(*tf, h, w, true);
    const double s2 = model.sigma_y * model.sigma_y;
    long double acc = 0;
    for (std::size_t k = 0; k < prior.spectral_power.size(); ++k) {
        const double p = prior.spectral_power[k];
        const double g = std::norm((*tf)[k]);
        acc += (g * p + s2) > 0 ? p * s2 / (g * p + s2) : p;
    }
    return static_cast<double>(acc / static_cast<long double>(prior.spectral_power.size()));
}

/// Noise predictor eps_theta(x_t, t).
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual ImageTensor predict_noise(const ImageTensor& x_t, int t, const NoiseSchedule& sched) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

using DenoiserHandle = std::unique_ptr<Denoiser>;

/// Exact MMSE denoiser of a stationary Gaussian prior: per frequency
///   E[x0 | x_t] = mean + g * (x_t / sqrt(ab) - mean),  g = ab P / (ab P + 1 - ab).
class AnalyticGaussianDenoiser final : public Denoiser {
public:
    explicit AnalyticGaussianDenoiser(StationaryGaussianPrior prior) : prior_(std::move(prior)) {
        prior_.validate();
        mean_spec_ = forward_fft2(prior_.mean);
    }

    [[nodiscard]] ImageTensor posterior_mean(const ImageTensor& x_t, double ab) const {
        x_t.require_same(prior_.mean);
        auto spec = forward_fft2(x_t);
        const double inv = 1.0 / std::sqrt(ab);
        for (std::size_t c = 0; c < spec.channels.size(); ++c) {
            auto& ch = spec.channels[c];
            const auto& mu = mean_spec_.channels[c];
            for (std::size_t k = 0; k < ch.size(); ++k) {
                const double p = prior_.spectral_power[k];
                const double g = ab * p / (ab * p + (1.0 - ab));
                ch[k] = mu[k] + g * (ch[k] * inv - mu[k]);
            }
        }
        return inverse_fft2(spec);
    }

    ImageTensor predict_noise(const ImageTensor& x_t, int t, const NoiseSchedule& sched) override {
        const double ab = sched.alpha_bar_at(t);
        return noise_from_x0(x_t, posterior_mean(x_t, ab), ab);
    }

    [[nodiscard]] std::string name() const override { return "gaussian"; }
    [[nodiscard]] const StationaryGaussianPrior& prior() const noexcept { return prior_; }

private:
    StationaryGaussianPrior prior_;
    SpectralField mean_spec_;
};

/// Knows the clean image; returns the noise that exactly explains x_t.
class OracleDenoiser final : public Denoiser {
public:
    explicit OracleDenoiser(ImageTensor x0) : x0_(std::move(x0)) {}

    ImageTensor predict_noise(const ImageTensor& x_t, int t, const NoiseSchedule& sched) override {
        x_t.require_same(x0_);
        return noise_from_x0(x_t, x0_, sched.alpha_bar_at(t));
    }

    [[nodiscard]] std::string name() const override { return "oracle"; }

private:
    ImageTensor x0_;
};

/// x_{0|t} from the backend's noise prediction.
inline ImageTensor denoise_to_x0(Denoiser& d, const ImageTensor& x_t, int t, const NoiseSchedule& sched) {
    return predict_x0(x_t, d.predict_noise(x_t, t, sched), sched.alpha_bar_at(t));
}

}  // namespace nfcds
