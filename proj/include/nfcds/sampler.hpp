#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nfcds/degradation.hpp"
#include "nfcds/denoiser.hpp"
#include "nfcds/error.hpp"
#include "nfcds/guidance.hpp"
#include "nfcds/image.hpp"
#include "nfcds/metrics.hpp"
#include "nfcds/random.hpp"
#include "nfcds/schedule.hpp"
#include "nfcds/spectral.hpp"

namespace nfcds {

/// Band manipulations of the injected noise used to study its role.
enum class Ablation { None, ZeroLowFreqNoise, ZeroHighFreqNoise, CutLowAfterStep, CutHighAfterStep };

inline const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::None: return "none";
        case Ablation::ZeroLowFreqNoise: return "zero_low";
        case Ablation::ZeroHighFreqNoise: return "zero_high";
        case Ablation::CutLowAfterStep: return "cut_low";
        case Ablation::CutHighAfterStep: return "cut_high";
    }
    return "?";
}

struct SamplerConfig {
    SamplingPlan plan;
    /// Noise filter applied before re-injection; bypass gives the unfiltered baseline.
    FrequencyMaskSpec mask = FrequencyMaskSpec::identity();
    /// Cutoff used for band diagnostics and ablations (never bypassed).
    FrequencyMaskSpec band;
    /// Absent for unconditional generation.
    std::optional<GuidanceSpec> guidance;
    Ablation ablation = Ablation::None;
    int ablation_step = 0;  // first step index affected by the Cut* modes
    std::uint64_t seed = 0;
    bool record_trajectory = false;
    bool record_tensors = false;
    /// Filter only the fresh noise component instead of the blended noise.
    bool filter_fresh_only = false;

    void validate(const NoiseSchedule& sched) const {
        plan.validate(sched);
        mask.validate();
        detail::check<ConfigError>(!band.bypass, "band cutoff spec must not be a bypass");
        band.validate();
        if (guidance) guidance->validate();
        detail::check<ConfigError>(ablation == Ablation::None || mask.bypass,
                                   "noise ablation and the NFCDS mask are mutually exclusive; set mask.bypass");
        detail::check<ConfigError>(ablation_step >= 0, "ablation step must be >= 0");
    }
};

struct StepTensors {
    ImageTensor x_t;
    ImageTensor x0_hat;
    ImageTensor eps_bar;   // blended noise before filtering
    ImageTensor injected;  // noise actually re-injected (zero at the final step)
};

struct StepRecord {
    int step = 0;
    int t = 0;
    double residual_l2 = std::numeric_limits<double>::quiet_NaN();
    double low_band_err = std::numeric_limits<double>::quiet_NaN();
    double high_band_err = std::numeric_limits<double>::quiet_NaN();
    double noise_low_energy = 0.0;
    double noise_high_energy = 0.0;
    std::optional<StepTensors> tensors;
};

struct Trajectory {
    std::vector<StepRecord> records;

    static constexpr const char* kCsvHeader =
        "step,t,residual_l2,low_band_err,high_band_err,noise_low_energy,noise_high_energy";

    void write_csv(std::ostream& os, bool header = true) const {
        if (header) os << kCsvHeader << '\n';
        os.precision(17);
        for (const auto& r : records)
            os << r.step << ',' << r.t << ',' << r.residual_l2 << ',' << r.low_band_err << ',' << r.high_band_err
               << ',' << r.noise_low_energy << ',' << r.noise_high_energy << '\n';
    }
};

struct SampleResult {
    ImageTensor x0;
    Trajectory trajectory;
};

/// Measurement context for restoration runs.
struct Restoration {
    const ImageTensor* y = nullptr;
    const DegradationModel* model = nullptr;
};

namespace detail {

class MaskCache {
public:
    MaskCache(const FrequencyMaskSpec& spec, std::size_t h, std::size_t w) : spec_(spec), grid_(h, w) {
        if (!spec_.bypass && spec_.schedule == RadiusSchedule::Constant) fixed_ = soft_threshold_mask(grid_, spec_, 0);
    }
    [[nodiscard]] bool bypass() const { return spec_.bypass; }
    [[nodiscard]] const FrequencyMaskSpec& spec() const { return spec_; }
    const std::vector<double>& at(int t) {
        if (!fixed_.empty()) return fixed_;
        current_ = soft_threshold_mask(grid_, spec_, t);
        return current_;
    }

private:
    FrequencyMaskSpec spec_;
    FrequencyGrid grid_;
    std::vector<double> fixed_;
    std::vector<double> current_;
};

inline bool ablation_active(const SamplerConfig& cfg, std::size_t step, Ablation which_zero, Ablation which_cut) {
    if (cfg.ablation == which_zero) return true;
    return cfg.ablation == which_cut && static_cast<int>(step) >= cfg.ablation_step;
}

/// Shared reverse loop: x_T ~ N(0, I); per step x0|t, optional guidance,
/// blended noise, spectral control, re-injection.
inline SampleResult reverse_process(Denoiser& denoiser, const SamplerConfig& cfg, const NoiseSchedule& sched,
                                    const Shape& shape, std::optional<Restoration> restoration,
                                    const ImageTensor* reference) {
    cfg.validate(sched);
    if (restoration) {
        check<ConfigError>(cfg.guidance.has_value(), "restoration requires a guidance spec");
        restoration->model->validate();
    } else {
        check<ConfigError>(!cfg.guidance.has_value(), "generation mode requires guidance = none");
    }
    if (reference)
        check<ShapeError>(reference->shape() == shape, "reference image shape " + to_string(reference->shape()) +
                                                           " does not match sample shape " + to_string(shape));

    MaskCache mask(cfg.mask, shape.height, shape.width);
    MaskCache band(cfg.band, shape.height, shape.width);

    SampleResult out;
    ImageTensor x = standard_normal(shape, cfg.seed, streams::initial_state);
    const auto& steps = cfg.plan.steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const int t = steps[i];
        const double ab = sched.alpha_bar_at(t);
        const auto coef = ddim_coefficients(cfg.plan, sched, i);
        const bool last = coef.sqrt_ab_prev >= 1.0;

        ImageTensor eps_theta;
        try {
            eps_theta = denoiser.predict_noise(x, t, sched);
        } catch (const Error& e) {
            throw Error(e.kind(), "step " + std::to_string(i) + " (t=" + std::to_string(t) + "): " + e.what());
        }
        check<NumericalError>(eps_theta.shape() == shape && eps_theta.all_finite(),
                              "step " + std::to_string(i) + " (t=" + std::to_string(t) +
                                  "): denoiser returned a non-finite or misshaped prediction");
        const ImageTensor x0t = predict_x0(x, eps_theta, ab);
        ImageTensor x0_hat = x0t;
        if (restoration) {
            try {
                x0_hat = apply_guidance(x0t, *restoration->y, *cfg.guidance, *restoration->model, sched, t);
            } catch (const Error& e) {
                throw Error(e.kind(), "step " + std::to_string(i) + " (t=" + std::to_string(t) + "): " + e.what());
            }
        }

        ImageTensor eps_bar(shape);
        ImageTensor injected(shape);
        if (!last) {
            const double w_pred = std::sqrt(1.0 - coef.zeta);
            const double w_fresh = std::sqrt(coef.zeta);
            const ImageTensor fresh = standard_normal(shape, cfg.seed, streams::step_base + i);
            eps_bar = axpby(w_pred, eps_theta, w_fresh, fresh);
            if (cfg.ablation != Ablation::None) {
                const auto& m = band.at(t);
                if (ablation_active(cfg, i, Ablation::ZeroLowFreqNoise, Ablation::CutLowAfterStep))
                    injected = filter_with_mask(eps_bar, m);
                else if (ablation_active(cfg, i, Ablation::ZeroHighFreqNoise, Ablation::CutHighAfterStep))
                    injected = eps_bar - filter_with_mask(eps_bar, m);
                else
                    injected = eps_bar;
            } else if (mask.bypass()) {
                injected = eps_bar;
            } else if (cfg.filter_fresh_only) {
                injected = axpby(w_pred, eps_theta, w_fresh, filter_with_mask(fresh, mask.at(t), cfg.mask.renormalize));
            } else {
                injected = filter_with_mask(eps_bar, mask.at(t), cfg.mask.renormalize);
            }
            x = axpby(coef.sqrt_ab_prev, x0_hat, std::sqrt(1.0 - coef.sqrt_ab_prev * coef.sqrt_ab_prev), injected);
        } else {
            x = x0_hat;
        }
        check<NumericalError>(x.all_finite(), "step " + std::to_string(i) + " (t=" + std::to_string(t) +
                                                  "): non-finite sampler state");

        if (cfg.record_trajectory) {
            StepRecord rec;
            rec.step = static_cast<int>(i);
            rec.t = t;
            const auto& bm = band.at(t);
            if (restoration) rec.residual_l2 = norm(*restoration->y - apply(*restoration->model, x0_hat));
            if (reference) {
                const auto split = band_split_with_mask(x0_hat - *reference, bm);
                rec.low_band_err = norm(split.low);
                rec.high_band_err = norm(split.high);
            }
            if (!last) {
                const auto ns = band_split_with_mask(injected, bm);
                rec.noise_low_energy = squared_norm(ns.low);
                rec.noise_high_energy = squared_norm(ns.high);
            }
            if (cfg.record_tensors) rec.tensors = StepTensors{x, x0_hat, eps_bar, injected};
            out.trajectory.records.push_back(std::move(rec));
        }
        if (last) break;
    }
    out.x0 = std::move(x);
    return out;
}

}  // namespace detail

/// NFCDS restoration: DDIM-style plug-and-play sampling whose re-injected
/// noise is soft-threshold filtered in the Fourier domain. `reference` (the
/// clean image, when known) only feeds trajectory diagnostics.
inline SampleResult nfcds_restore(const ImageTensor& y, const DegradationModel& model, Denoiser& denoiser,
                                  const SamplerConfig& cfg, const NoiseSchedule& sched,
                                  const ImageTensor* reference = nullptr) {
    const Shape shape = model.signal_shape(y.shape());
    return detail::reverse_process(denoiser, cfg, sched, shape, Restoration{&y, &model}, reference);
}

/// Same loop with unfiltered noise injection.
inline SampleResult pnp_restore_baseline(const ImageTensor& y, const DegradationModel& model, Denoiser& denoiser,
                                         SamplerConfig cfg, const NoiseSchedule& sched,
                                         const ImageTensor* reference = nullptr) {
    cfg.mask = FrequencyMaskSpec::identity();
    return nfcds_restore(y, model, denoiser, cfg, sched, reference);
}

/// Unconditional reverse process, optionally with band ablations of the noise.
inline SampleResult generate(Denoiser& denoiser, const SamplerConfig& cfg, const NoiseSchedule& sched,
                             const Shape& shape) {
    return detail::reverse_process(denoiser, cfg, sched, shape, std::nullopt, nullptr);
}

}  // namespace nfcds
