#include <gtest/gtest.h>

#include <cmath>

#include "nfcds/denoiser.hpp"
#include "nfcds/random.hpp"
#include "oracles.hpp"

using namespace nfcds;

namespace {

StationaryGaussianPrior arbitrary_prior_4x4() {
    // Non-radial but point-symmetric power so the field stays real.
    StationaryGaussianPrior p{oracle::random_image({4, 4, 1}, 5, -0.3, 0.3), std::vector<double>(16)};
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t v = 0; v < 4; ++v) {
            const std::size_t mu = (4 - u) % 4, mv = (4 - v) % 4;
            const double a = 0.2 + 0.37 * static_cast<double>((u * 5 + v * 3) % 7);
            const double b = 0.2 + 0.37 * static_cast<double>((mu * 5 + mv * 3) % 7);
            p.spectral_power[u * 4 + v] = 0.5 * (a + b) + (u == 2 && v == 2 ? 3.0 : 0.0);
        }
    return p;
}

}  // namespace

TEST(OracleDenoiser, RecoversNoiseAndCleanImage) {
    const auto sched = default_schedule();
    const auto x0 = oracle::random_image({16, 16, 3}, 1);
    OracleDenoiser d(x0);
    for (int t : {0, 100, 500, 999}) {
        const auto eps = standard_normal(x0.shape(), 7, static_cast<std::uint64_t>(t));
        const auto xt = forward_diffuse(x0, t, eps, sched);
        EXPECT_LT(max_abs_diff(d.predict_noise(xt, t, sched), eps), 1e-10) << t;
        EXPECT_LT(max_abs_diff(denoise_to_x0(d, xt, t, sched), x0), 1e-12 / std::sqrt(sched.alpha_bar_at(t)) * 100)
            << t;
    }
    EXPECT_THROW(d.predict_noise(ImageTensor(4, 4), 0, sched), ShapeError);
}

TEST(OracleDenoiser, CleanEndReturnsInput) {
    const auto sched = make_custom_schedule({1e-300, 0.5});
    const auto x = oracle::random_image({8, 8, 1}, 3);
    OracleDenoiser d(oracle::random_image({8, 8, 1}, 4));
    AnalyticGaussianDenoiser g(radial_power_law_prior({8, 8, 1}, 0.0, 4, 4, 3, 1e-3));
    EXPECT_LT(max_abs_diff(denoise_to_x0(g, x, 0, sched), x), 1e-12);
}

TEST(AnalyticGaussian, MatchesDenseConditioningOn4x4) {
    const auto sched = default_schedule();
    const auto prior = arbitrary_prior_4x4();
    const auto C = oracle::stationary_covariance(prior.spectral_power, 4, 4);
    AnalyticGaussianDenoiser d(prior);
    for (int t : {0, 50, 250, 500, 750, 999}) {
        const double ab = sched.alpha_bar_at(t);
        const auto xt = oracle::random_image({4, 4, 1}, static_cast<unsigned>(t) + 10, -2, 2);
        const auto ref = oracle::gaussian_conditional_mean(C, oracle::to_vec(prior.mean), oracle::to_vec(xt), ab);
        const auto got = oracle::to_vec(denoise_to_x0(d, xt, t, sched));
        EXPECT_LT((got - ref).norm(), 1e-8 * std::max(1.0, ref.norm())) << t;
        // noise prediction follows by the affine identity
        const Eigen::VectorXd eps_ref = (oracle::to_vec(xt) - std::sqrt(ab) * ref) / std::sqrt(1 - ab);
        const auto eps = oracle::to_vec(d.predict_noise(xt, t, sched));
        EXPECT_LT((eps - eps_ref).norm(), 1e-8 * std::max(1.0, eps_ref.norm())) << t;
    }
}

TEST(AnalyticGaussian, HugePriorVarianceTrustsInput) {
    const auto sched = default_schedule();
    StationaryGaussianPrior p{ImageTensor(4, 4), std::vector<double>(16, 1e6)};
    AnalyticGaussianDenoiser d(p);
    const auto xt = oracle::random_image({4, 4, 1}, 2);
    for (int t : {0, 5, 20}) {
        const auto eps = d.predict_noise(xt, t, sched);
        EXPECT_LT(norm(eps), 1e-2 * norm(xt)) << t;
    }
    const auto C = oracle::stationary_covariance(p.spectral_power, 4, 4);
    const auto ref = oracle::gaussian_conditional_mean(C, oracle::to_vec(p.mean), oracle::to_vec(xt), sched.alpha_bar_at(5));
    EXPECT_LT((oracle::to_vec(denoise_to_x0(d, xt, 5, sched)) - ref).norm(), 1e-8 * ref.norm());
}

TEST(AnalyticGaussian, MultichannelSharesPower) {
    const auto sched = default_schedule();
    auto prior = radial_power_law_prior({8, 8, 2}, 0.1, 4, 2, 3, 1e-3);
    AnalyticGaussianDenoiser d2(prior);
    const auto xt = oracle::random_image({8, 8, 2}, 3);
    const auto out = d2.predict_noise(xt, 400, sched);
    auto single = radial_power_law_prior({8, 8, 1}, 0.1, 4, 2, 3, 1e-3);
    AnalyticGaussianDenoiser d1(single);
    for (std::size_t c = 0; c < 2; ++c) {
        ImageTensor plane(8, 8);
        plane.set_plane(0, xt.plane(c));
        const auto ref = d1.predict_noise(plane, 400, sched);
        for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(out[k * 2 + c], ref[k], 1e-12);
    }
}

TEST(Prior, ValidationAndRadialSymmetry) {
    StationaryGaussianPrior bad{ImageTensor(4, 4), std::vector<double>(16, 1.0)};
    bad.spectral_power[3] = 0.0;
    EXPECT_THROW(AnalyticGaussianDenoiser{bad}, ConfigError);
    bad.spectral_power.resize(15);
    EXPECT_THROW(bad.validate(), ConfigError);

    const auto p = radial_power_law_prior({16, 16, 1}, 0, 4, 4, 3, 1e-3);
    const FrequencyGrid g(16, 16);
    for (std::size_t a = 0; a < 256; ++a)
        for (std::size_t b = 0; b < 256; ++b)
            if (std::abs(g.radii()[a] - g.radii()[b]) < 1e-12) {
                EXPECT_DOUBLE_EQ(p.spectral_power[a], p.spectral_power[b]);
            }
}

TEST(Prior, SamplesHaveTheRequestedSpectrum) {
    const auto p = radial_power_law_prior({8, 8, 1}, 0.0, 4, 2, 3, 1e-2);
    std::vector<long double> acc(64, 0.0L);
    const int n = 2000;
    for (int s = 0; s < n; ++s) {
        const auto x = sample_prior(p, static_cast<std::uint64_t>(s));
        const auto X = forward_fft2(x);
        for (std::size_t k = 0; k < 64; ++k) acc[k] += std::norm(X.channels[0][k]) / 64.0L;
    }
    for (std::size_t k = 0; k < 64; ++k) {
        const double est = static_cast<double>(acc[k] / n);
        EXPECT_NEAR(est / p.spectral_power[k], 1.0, 0.15) << k;
    }
}

TEST(Wiener, MatchesDenseConditioningOnMeasurement) {
    const auto prior = arbitrary_prior_4x4();
    const auto C = oracle::stationary_covariance(prior.spectral_power, 4, 4);
    const Eigen::VectorXd m = oracle::to_vec(prior.mean);
    const auto y = oracle::random_image({4, 4, 1}, 33);
    for (const auto& model : {DegradationModel::identity(0.25), DegradationModel::blur(gaussian_kernel(3, 0.8), 0.1)}) {
        const auto A = materialize_dense(model, 4, 4);
        const double s2 = model.sigma_y * model.sigma_y;
        const Eigen::MatrixXd S = A * C * A.transpose() + s2 * Eigen::MatrixXd::Identity(16, 16);
        const Eigen::VectorXd ref = m + C * A.transpose() * S.ldlt().solve(oracle::to_vec(y) - A * m);
        const auto got = oracle::to_vec(wiener_posterior_mean(prior, model, y));
        EXPECT_LT((got - ref).norm(), 1e-9 * ref.norm());
        const Eigen::MatrixXd post = C - C * A.transpose() * S.ldlt().solve(A * C);
        EXPECT_NEAR(wiener_expected_mse(prior, model), post.trace() / 16.0, 1e-10);
    }
    EXPECT_THROW(wiener_posterior_mean(prior, DegradationModel::downsample(2, box_kernel(2)), ImageTensor(2, 2)),
                 ConfigError);
}
