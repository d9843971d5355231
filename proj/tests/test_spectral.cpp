#include <gtest/gtest.h>

#include <cmath>

#include "nfcds/random.hpp"
#include "nfcds/spectral.hpp"
#include "oracles.hpp"

using namespace nfcds;

namespace {

double rel_err(const ImageTensor& a, const ImageTensor& b) {
    return norm(a - b) / std::max(norm(b), 1e-300);
}

}  // namespace

TEST(FrequencyGrid, CenterSymmetryAndBound) {
    for (auto [h, w] : {std::pair{8, 8}, {7, 10}, {16, 5}}) {
        const FrequencyGrid g(h, w);
        EXPECT_EQ(g.radius(g.center_row(), g.center_col()), 0.0);
        const auto H = static_cast<std::size_t>(h), W = static_cast<std::size_t>(w);
        for (std::size_t u = 0; u < H; ++u)
            for (std::size_t v = 0; v < W; ++v) {
                // omega -> -omega in centered coordinates, modulo the grid.
                const auto fu = static_cast<long>(u) - static_cast<long>(H / 2);
                const auto fv = static_cast<long>(v) - static_cast<long>(W / 2);
                const auto mu = static_cast<std::size_t>(((-fu + static_cast<long>(H / 2)) % h + h) % h);
                const auto mv = static_cast<std::size_t>(((-fv + static_cast<long>(W / 2)) % w + w) % w);
                EXPECT_DOUBLE_EQ(g.radius(u, v), g.radius(mu, mv)) << u << "," << v;
            }
        EXPECT_LE(g.max_radius(), std::hypot(h / 2.0, w / 2.0) + 1e-12);
    }
}

TEST(ForwardFft, ConstantImageHasAllEnergyAtDc) {
    const ImageTensor img(6, 8, 1, 0.75);
    const auto s = forward_fft2(img);
    const FrequencyGrid g(6, 8);
    for (std::size_t u = 0; u < 6; ++u)
        for (std::size_t v = 0; v < 8; ++v) {
            const auto z = s.at(0, u, v);
            if (u == g.center_row() && v == g.center_col()) {
                EXPECT_NEAR(z.real(), 0.75 * 48, 1e-12);
                EXPECT_NEAR(z.imag(), 0.0, 1e-12);
            } else {
                EXPECT_LT(std::abs(z), 1e-12);
            }
        }
}

TEST(ForwardFft, ImpulseHasFlatMagnitude) {
    ImageTensor img(8, 8);
    img(0, 0) = 1.0;
    const auto s = forward_fft2(img);
    for (const auto& z : s.channels[0]) EXPECT_NEAR(std::abs(z), 1.0, 1e-14);
}

TEST(ForwardFft, MatchesDirectDftOracle) {
    for (auto [h, w] : {std::pair{8, 8}, {6, 10}, {5, 7}, {12, 9}}) {
        const auto x = oracle::random_image({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 1}, 11);
        const auto s = forward_fft2(x);
        const auto ref = oracle::dft2_centered(x.plane(0), h, w);
        for (std::size_t k = 0; k < ref.size(); ++k) {
            EXPECT_NEAR(s.channels[0][k].real(), static_cast<double>(ref[k].real()), 1e-11);
            EXPECT_NEAR(s.channels[0][k].imag(), static_cast<double>(ref[k].imag()), 1e-11);
        }
        EXPECT_LT(rel_err(inverse_fft2(s), x), 1e-10);
    }
}

TEST(ForwardFft, RoundTripAllTargetSizesAndChannels) {
    for (std::size_t n : {4u, 8u, 16u, 32u, 64u, 256u}) {
        const auto x = oracle::random_image({n, n, 2}, static_cast<unsigned>(n));
        EXPECT_LT(rel_err(inverse_fft2(forward_fft2(x)), x), 1e-10) << n;
    }
    const auto odd = oracle::random_image({15, 21, 3}, 5);
    EXPECT_LT(rel_err(inverse_fft2(forward_fft2(odd)), odd), 1e-10);
}

TEST(ForwardFft, RejectsNonFinite) {
    ImageTensor x(4, 4);
    x(1, 2) = std::nan("");
    EXPECT_THROW(forward_fft2(x), NumericalError);
    EXPECT_THROW(forward_fft2(ImageTensor(1, 4)), ShapeError);
}

TEST(InverseFft, NonHermitianSpectrumIsAConsistencyError) {
    auto s = forward_fft2(ImageTensor(4, 4, 1, 1.0));
    s.channels[0][1] = {0.0, 5.0};
    EXPECT_THROW(inverse_fft2(s), NumericalError);
}

TEST(SoftThresholdMask, HalfAtCutoffAndDerivedValues) {
    EXPECT_EQ(soft_threshold(35.0, 35.0, 5.0), 0.5);
    // 1 / (1 + e^-5) evaluated at 50 digits.
    EXPECT_NEAR(soft_threshold(36.0, 35.0, 5.0), 0.99330714907571514444, 1e-15);
    FrequencyMaskSpec spec;  // r = 35, alpha = 5
    const FrequencyGrid g(256, 256);
    const auto m = soft_threshold_mask(g, spec, 0);
    const double dc = m[g.center_row() * 256 + g.center_col()];
    EXPECT_GT(dc, 0.0);
    EXPECT_LT(dc, 1e-75);
    EXPECT_NEAR(dc / 9.9647330101036722640e-77, 1.0, 1e-12);
}

TEST(SoftThresholdMask, RadialMonotoneAndInUnitInterval) {
    FrequencyMaskSpec spec;
    spec.r_thresh = 5.5;
    spec.alpha = 1.3;
    const FrequencyGrid g(32, 24);
    const auto m = soft_threshold_mask(g, spec, 0);
    for (std::size_t a = 0; a < m.size(); ++a) {
        EXPECT_GT(m[a], 0.0);
        EXPECT_LT(m[a], 1.0);
        for (std::size_t b = 0; b < m.size(); b += 7)
            if (g.radii()[a] < g.radii()[b]) { EXPECT_LE(m[a], m[b]); }
    }
}

TEST(SoftThresholdMask, PerStepRadiusTable) {
    FrequencyMaskSpec spec;
    spec.schedule = RadiusSchedule::PerStep;
    spec.radius_table = {{0, 4.0}, {500, 8.0}};
    EXPECT_EQ(spec.radius_at(0), 4.0);
    EXPECT_EQ(spec.radius_at(499), 4.0);
    EXPECT_EQ(spec.radius_at(999), 8.0);
    spec.radius_table = {{10, 4.0}, {5, 8.0}};
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(SoftThresholdMask, InvalidSpecRejected) {
    FrequencyMaskSpec spec;
    spec.alpha = 0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.alpha = 5;
    spec.r_thresh = -1;
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(NfcdsFilter, BypassIsIdentity) {
    const auto x = standard_normal({16, 16, 1}, 3, 0);
    EXPECT_LT(rel_err(nfcds_filter(x, FrequencyMaskSpec::identity(), 0), x), 1e-10);
}

TEST(NfcdsFilter, FullSuppressionLimit) {
    // Cutoff well beyond the Nyquist corner removes essentially everything.
    FrequencyMaskSpec spec;
    spec.r_thresh = 16 * std::sqrt(2.0) + 20;
    spec.alpha = 5;
    const auto x = standard_normal({32, 32, 1}, 9, 0);
    const auto y = nfcds_filter(x, spec, 0);
    EXPECT_LT(spectral_energy(forward_fft2(y)), 1e-30);
}

TEST(NfcdsFilter, ParsevalAgainstDirectDft) {
    FrequencyMaskSpec spec;
    spec.r_thresh = 2;
    spec.alpha = 5;
    const auto x = standard_normal({8, 8, 1}, 21, 0);
    const auto y = nfcds_filter(x, spec, 0);
    const auto X = oracle::dft2_centered(x.plane(0), 8, 8);
    long double expected = 0;
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t v = 0; v < 8; ++v) {
            const auto m = oracle::sigmoid_mask(oracle::centered_radius(u, v, 8, 8), 2, 5);
            expected += m * m * std::norm(X[u * 8 + v]);
        }
    expected /= 64;
    EXPECT_NEAR(squared_norm(y), static_cast<double>(expected), 1e-9);
    // Output spectrum equals M * input spectrum, bin by bin.
    const auto Y = oracle::dft2_centered(y.plane(0), 8, 8);
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t v = 0; v < 8; ++v) {
            const auto m = oracle::sigmoid_mask(oracle::centered_radius(u, v, 8, 8), 2, 5);
            EXPECT_LT(std::abs(Y[u * 8 + v] - m * X[u * 8 + v]), 1e-11L);
        }
}

TEST(NfcdsFilter, LinearityAndSquaredMaskOnRepeat) {
    FrequencyMaskSpec spec;
    spec.r_thresh = 3.2;
    spec.alpha = 2;
    const auto e1 = standard_normal({16, 16, 2}, 1, 0);
    const auto e2 = standard_normal({16, 16, 2}, 2, 0);
    const auto lhs = nfcds_filter(axpby(0.7, e1, -1.9, e2), spec, 0);
    const auto rhs = axpby(0.7, nfcds_filter(e1, spec, 0), -1.9, nfcds_filter(e2, spec, 0));
    EXPECT_LT(max_abs_diff(lhs, rhs), 1e-10);

    const FrequencyGrid g(16, 16);
    auto m2 = soft_threshold_mask(g, spec, 0);
    for (auto& v : m2) v *= v;
    const auto twice = nfcds_filter(nfcds_filter(e1, spec, 0), spec, 0);
    EXPECT_LT(max_abs_diff(twice, filter_with_mask(e1, m2)), 1e-10);
}

TEST(NfcdsFilter, RenormalizeRestoresExpectedEnergy) {
    FrequencyMaskSpec spec;
    spec.r_thresh = 10;
    spec.renormalize = true;
    const auto x = standard_normal({64, 64, 1}, 4, 0);
    const auto y = nfcds_filter(x, spec, 0);
    EXPECT_NEAR(squared_norm(y) / 4096.0, 1.0, 0.1);
}

TEST(BandSplit, ReassemblesAndHandlesLimits) {
    FrequencyMaskSpec spec;
    spec.r_thresh = 2;
    const auto x = oracle::random_image({8, 8, 1}, 77);
    const auto split = band_split(x, spec, 0);
    EXPECT_LT(max_abs_diff(split.low + split.high, x), 1e-10);

    const auto by = band_split(x, FrequencyMaskSpec::identity(), 0);
    EXPECT_EQ(norm(by.low), 0.0);
    EXPECT_LT(max_abs_diff(by.high, x), 1e-15);

    const ImageTensor c(16, 16, 1, 0.3);
    FrequencyMaskSpec moderate;
    moderate.r_thresh = 5;
    const auto cs = band_split(c, moderate, 0);
    EXPECT_LT(norm(cs.high), 1e-10);
    EXPECT_LT(max_abs_diff(cs.low, c), 1e-10);
}

TEST(NfcdsFilter, FilteredRealNoiseStaysReal) {
    // Non-square and odd grids keep the mask point-symmetric.
    FrequencyMaskSpec spec;
    spec.r_thresh = 3;
    spec.alpha = 0.8;
    for (auto sh : {Shape{9, 14, 1}, Shape{31, 17, 3}}) {
        const auto x = standard_normal(sh, 6, 0);
        EXPECT_NO_THROW(nfcds_filter(x, spec, 0));
    }
}
