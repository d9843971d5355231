#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nfcds/error.hpp"
#include "nfcds/image.hpp"

namespace nfcds {

enum class ScheduleKind { Linear, Custom };

/// Discrete variance schedule indexed by timestep t = 0 .. T-1, where
/// alpha_bar[t] = prod_{i <= t} (1 - beta[i]).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Custom;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    [[nodiscard]] int steps() const noexcept { return static_cast<int>(beta.size()); }

    /// alpha_bar at timestep t, with alpha_bar(-1) = 1 (the clean end).
    [[nodiscard]] double alpha_bar_at(int t) const {
        if (t < 0) return 1.0;
        detail::check<ConfigError>(t < steps(), "timestep " + std::to_string(t) + " out of range [0, " +
                                                    std::to_string(steps()) + ")");
        return alpha_bar[static_cast<std::size_t>(t)];
    }
};

inline NoiseSchedule make_custom_schedule(std::vector<double> betas) {
    detail::check<ConfigError>(!betas.empty(), "schedule needs at least one step");
    NoiseSchedule s;
    s.kind = ScheduleKind::Custom;
    s.beta = std::move(betas);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    long double prod = 1.0L;
    for (std::size_t i = 0; i < s.beta.size(); ++i) {
        const double b = s.beta[i];
        detail::check<ConfigError>(b > 0.0 && b < 1.0, "beta values must lie in (0, 1)");
        s.alpha[i] = 1.0 - b;
        prod *= 1.0L - static_cast<long double>(b);
        s.alpha_bar[i] = static_cast<double>(prod);
    }
    return s;
}

inline NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    detail::check<ConfigError>(T >= 1, "schedule.T must be >= 1");
    detail::check<ConfigError>(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
                               "schedule requires 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) {
        const long double frac = T == 1 ? 0.0L : static_cast<long double>(i) / (T - 1);
        betas[static_cast<std::size_t>(i)] =
            static_cast<double>(beta_start + (static_cast<long double>(beta_end) - beta_start) * frac);
    }
    auto s = make_custom_schedule(std::move(betas));
    s.kind = ScheduleKind::Linear;
    return s;
}

inline NoiseSchedule default_schedule() { return make_linear_schedule(1000, 1e-4, 0.02); }

/// x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps
inline ImageTensor forward_diffuse(const ImageTensor& x0, int t, const ImageTensor& eps, const NoiseSchedule& sched) {
    const double ab = sched.alpha_bar_at(t);
    return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

enum class Spacing { Uniform, Quadratic };

/// Strictly decreasing list of `nfe` timesteps out of [0, T).
inline std::vector<int> make_subsequence(int T, int nfe, Spacing spacing) {
    detail::check<ConfigError>(T >= 1, "schedule.T must be >= 1");
    detail::check<ConfigError>(nfe >= 1 && nfe <= T, "plan.nfe must lie in [1, T]");
    std::vector<int> out(static_cast<std::size_t>(nfe));
    if (spacing == Spacing::Uniform) {
        for (int i = 0; i < nfe; ++i)
            out[static_cast<std::size_t>(i)] =
                T - 1 - static_cast<int>((static_cast<long long>(i) * T) / nfe);
        return out;
    }
    std::vector<int> asc(static_cast<std::size_t>(nfe));
    for (int j = 0; j < nfe; ++j) {
        const double f = static_cast<double>(j + 1) / nfe;
        int v = static_cast<int>(std::floor(f * f * T)) - 1;
        if (j == nfe - 1) v = T - 1;
        if (j > 0) v = std::max(v, asc[static_cast<std::size_t>(j - 1)] + 1);
        asc[static_cast<std::size_t>(j)] = std::max(v, 0);
    }
    for (int i = 0; i < nfe; ++i) out[static_cast<std::size_t>(i)] = asc[static_cast<std::size_t>(nfe - 1 - i)];
    return out;
}

/// How the per-step stochastic noise level sigma_t is chosen.
enum class SigmaRule {
    /// sigma_t = sqrt(zeta) * sqrt(1 - ab_prev), matching the blended form
    /// sqrt(1 - ab_prev) * (sqrt(1 - zeta) eps_theta + sqrt(zeta) eps).
    Zeta,
    /// DDIM eta rule: sigma_t = eta * sqrt((1 - ab_prev)/(1 - ab_t)) * sqrt(1 - ab_t/ab_prev).
    Eta,
};

struct SamplingPlan {
    std::vector<int> steps;
    SigmaRule sigma_rule = SigmaRule::Zeta;
    double zeta = 1.0;
    double eta = 0.0;

    [[nodiscard]] int nfe() const noexcept { return static_cast<int>(steps.size()); }

    /// Timestep the state moves to after step `i` (-1 means the clean end).
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Warray-bounds"  // false positive on the guarded index (GCC 11, -O3)
#endif
    [[nodiscard]] int prev_timestep(std::size_t i) const { return i + 1 < steps.size() ? steps[i + 1] : -1; }
#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC diagnostic pop
#endif

    void validate(const NoiseSchedule& sched) const {
        detail::check<ConfigError>(!steps.empty(), "sampling plan has no steps");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            detail::check<ConfigError>(steps[i] >= 0 && steps[i] < sched.steps(), "plan timestep out of range");
            if (i > 0) detail::check<ConfigError>(steps[i] < steps[i - 1], "plan timesteps must strictly decrease");
        }
        detail::check<ConfigError>(zeta >= 0.0 && zeta <= 1.0, "plan.zeta must lie in [0, 1]");
        detail::check<ConfigError>(eta >= 0.0, "plan.eta must be >= 0");
    }
};

inline SamplingPlan make_plan(const NoiseSchedule& sched, int nfe, Spacing spacing = Spacing::Uniform,
                              double zeta = 1.0) {
    SamplingPlan p;
    p.steps = make_subsequence(sched.steps(), nfe, spacing);
    p.zeta = zeta;
    return p;
}

struct DdimCoefficients {
    double sqrt_ab_prev;
    double sigma_bar;
    double sigma;
    /// Effective blend weight: sigma^2 / (1 - ab_prev), 0 at the clean end.
    double zeta;
};

/// Throws when sigma^2 exceeds the available variance 1 - ab_prev.
inline DdimCoefficients ddim_coefficients_from_sigma(double ab_prev, double sigma) {
    const double budget = 1.0 - ab_prev;
    const double rem = budget - sigma * sigma;
    // Rounding of sqrt(zeta*budget)^2 may overshoot by an ulp.
    detail::check<ConfigError>(rem >= -1e-15 * std::max(1.0, budget),
                               "sigma_t^2 exceeds 1 - alpha_bar_prev; sigma_bar would be imaginary");
    const double sigma_bar = std::sqrt(std::max(rem, 0.0));
    return {std::sqrt(ab_prev), sigma_bar, sigma, budget > 0 ? std::min(1.0, sigma * sigma / budget) : 0.0};
}

inline DdimCoefficients ddim_coefficients(const SamplingPlan& plan, const NoiseSchedule& sched, std::size_t step_index) {
    detail::check<ConfigError>(step_index < plan.steps.size(), "step index out of plan range");
    const int t = plan.steps[step_index];
    const double ab = sched.alpha_bar_at(t);
    const double ab_prev = sched.alpha_bar_at(plan.prev_timestep(step_index));
    const double budget = 1.0 - ab_prev;
    if (budget <= 0.0) return {std::sqrt(ab_prev), 0.0, 0.0, 0.0};

    double sigma = 0.0;
    if (plan.sigma_rule == SigmaRule::Zeta) {
        sigma = std::sqrt(plan.zeta * budget);
    } else {
        sigma = plan.eta * std::sqrt(budget / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
    }
    return ddim_coefficients_from_sigma(ab_prev, sigma);
}

/// x_{0|t} = (x_t - sqrt(1 - ab_t) eps) / sqrt(ab_t)
inline ImageTensor predict_x0(const ImageTensor& x_t, const ImageTensor& eps, double alpha_bar) {
    return axpby(1.0 / std::sqrt(alpha_bar), x_t, -std::sqrt(1.0 - alpha_bar) / std::sqrt(alpha_bar), eps);
}

/// eps = (x_t - sqrt(ab_t) x0) / sqrt(1 - ab_t)
inline ImageTensor noise_from_x0(const ImageTensor& x_t, const ImageTensor& x0, double alpha_bar) {
    const double s = std::sqrt(1.0 - alpha_bar);
    return axpby(1.0 / s, x_t, -std::sqrt(alpha_bar) / s, x0);
}

/// Ancestral DDPM step coefficients: x_{t-1} = c_x (x_t - c_eps eps) + sqrt(beta_t) z.
struct DdpmCoefficients {
    double inv_sqrt_alpha;
    double eps_scale;
    double noise_std;
};

inline DdpmCoefficients ddpm_coefficients(const NoiseSchedule& sched, int t) {
    const double ab = sched.alpha_bar_at(t);
    const double b = sched.beta.at(static_cast<std::size_t>(t));
    return {1.0 / std::sqrt(1.0 - b), b / std::sqrt(1.0 - ab), std::sqrt(b)};
}

}  // namespace nfcds
