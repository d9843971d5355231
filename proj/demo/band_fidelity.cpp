// Paired NFCDS vs unfiltered-noise comparison on the analytic Gaussian
// denoising benchmark, for each denoising preset.
//
//   band_fidelity [seeds] [size]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "nfcds/config.hpp"
#include "nfcds/nfcds.hpp"

using namespace nfcds;

int main(int argc, char** argv) {
    const int seeds = argc > 1 ? std::atoi(argv[1]) : 20;
    const std::string size = argc > 2 ? argv[2] : "64";

    std::printf("%-12s %7s %6s %10s %10s %10s %12s\n", "preset", "sigma_y", "r", "PSNR nfcds", "PSNR base",
                "PSNR post", "low-band win");
    for (const char* preset : {"denoise_010", "denoise_025", "denoise_050"}) {
        const auto cfg = config::RunConfig::resolve(
            {{"preset", preset}, {"image.height", size}, {"image.width", size}, {"plan.nfe", "50"}}, {});
        const auto sched = cfg.build_schedule();
        const auto model = cfg.build_model();
        const auto prior = cfg.build_prior(cfg.image_shape());
        AnalyticGaussianDenoiser den(prior);
        auto scfg = cfg.build_sampler(sched, true);

        double pa = 0, pb = 0, pp = 0;
        int wins = 0;
        for (int s = 0; s < seeds; ++s) {
            const auto x0 = sample_prior(prior, 1000 + s);
            const auto y = synthesize_measurement(model, x0, 1000 + s);
            const auto post = wiener_posterior_mean(prior, model, y);
            scfg.seed = static_cast<std::uint64_t>(s);
            const auto a = nfcds_restore(y, model, den, scfg, sched).x0;
            const auto b = pnp_restore_baseline(y, model, den, scfg, sched).x0;
            wins += norm(band_split(a - post, scfg.band, 0).low) <= norm(band_split(b - post, scfg.band, 0).low);
            pa += psnr(a, x0, 2.0);
            pb += psnr(b, x0, 2.0);
            pp += psnr(post, x0, 2.0);
        }
        std::printf("%-12s %7.2f %6.1f %10.3f %10.3f %10.3f %8d/%d\n", preset, model.sigma_y, scfg.mask.r_thresh,
                    pa / seeds, pb / seeds, pp / seeds, wins, seeds);
    }
}
