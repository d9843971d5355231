// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfcds/app.hpp"
#include "nfcds/nfcds.hpp"
#include "oracles.hpp"

using namespace nfcds;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------

Outcome mask_correctness() {
    double worst_half = 0;
    bool monotone = true;
    const FrequencyGrid grid(256, 256);
    for (double r : {25.0, 35.0, 64.0}) {
        FrequencyMaskSpec spec;
        spec.r_thresh = r;
        spec.alpha = 5;
        worst_half = std::max(worst_half, std::abs(soft_threshold(r, r, 5) - 0.5));
        const auto m = soft_threshold_mask(grid, spec, 0);
        // Bins at integer distance r along both axes.
        const auto ri = static_cast<std::size_t>(r);
        for (auto k : {(128 + ri) * 256 + 128, (128 - ri) * 256 + 128, 128 * 256 + 128 + ri, 128 * 256 + 128 - ri})
            worst_half = std::max(worst_half, std::abs(m[k] - 0.5));
        std::vector<std::pair<double, double>> rm;
        for (std::size_t k = 0; k < m.size(); ++k) rm.emplace_back(grid.radii()[k], m[k]);
        std::sort(rm.begin(), rm.end());
        for (std::size_t k = 1; k < rm.size(); ++k) {
            if (rm[k].second < rm[k - 1].second) monotone = false;
            if (rm[k].first > rm[k - 1].first + 1e-9 && rm[k].second == rm[k - 1].second && rm[k].second < 1 - 1e-6 &&
                rm[k].second > 1e-6)
                monotone = false;
        }
    }
    struct Expect {
        const char* name;
        const char* op;
        double sigma, r;
    };
    bool presets = true;
    for (const Expect& e : {Expect{"sr4", "downsample", 0.0, 35}, Expect{"sr4_noisy", "downsample", 0.05, 25},
                            Expect{"denoise_010", "identity", 0.1, 64}, Expect{"denoise_025", "identity", 0.25, 35},
                            Expect{"denoise_050", "identity", 0.5, 25}}) {
        const auto cfg = config::RunConfig::resolve({{"preset", e.name}}, {}, false);
        const auto mask = cfg.build_mask();
        const auto model = cfg.build_model();
        presets = presets && mask.r_thresh == e.r && mask.alpha == 5.0 && !mask.bypass &&
                  cfg.str("task.operator") == e.op && model.sigma_y == e.sigma &&
                  (std::string(e.op) != "downsample" || cfg.integer("task.sr_factor") == 4);
    }
    return {worst_half <= 1e-12 && monotone && presets,
            "max |M(r) - 0.5| = " + fmt(worst_half) + ", monotone " + (monotone ? "yes" : "no") + ", presets " +
                (presets ? "exact" : "MISMATCH")};
}

Outcome fft_round_trip_parseval() {
    double worst_rt = 0, worst_parseval = 0, worst_bin = 0;
    unsigned seed = 1;
    for (std::size_t n : {4u, 8u, 16u, 32u, 64u, 256u}) {
        const auto x = oracle::random_image({n, n, 1}, seed++);
        FrequencyMaskSpec spec;
        spec.r_thresh = static_cast<double>(n) / 4;
        spec.alpha = 5;

        const auto back = inverse_fft2(forward_fft2(x));
        worst_rt = std::max(worst_rt, max_abs_diff(back, x));
        worst_rt = std::max(worst_rt, max_abs_diff(nfcds_filter(x, FrequencyMaskSpec::identity(), 0), x));

        // ||filter(x)||^2 == (1/HW) sum |M X|^2 with X from a direct DFT.
        const auto X = oracle::dft2_centered_separable(x.data(), n, n);
        const auto f = nfcds_filter(x, spec, 0);
        long double spec_energy = 0, in_energy = 0;
        const auto m = soft_threshold_mask(FrequencyGrid(n, n), spec, 0);
        for (std::size_t k = 0; k < X.size(); ++k) {
            spec_energy += std::norm(X[k]) * m[k] * m[k];
            in_energy += std::norm(X[k]);
        }
        const double hw = static_cast<double>(n * n);
        worst_parseval = std::max(worst_parseval,
                                  std::abs(squared_norm(f) - static_cast<double>(spec_energy / hw)) / squared_norm(x));
        worst_parseval = std::max(worst_parseval,
                                  std::abs(squared_norm(x) - static_cast<double>(in_energy / hw)) / squared_norm(x));

        const auto F = forward_fft2(f);
        double scale = 0;
        for (const auto& v : X) scale = std::max(scale, static_cast<double>(std::abs(v)));
        for (std::size_t k = 0; k < X.size(); ++k) {
            const auto want = X[k] * static_cast<long double>(m[k]);
            const std::complex<double> w(static_cast<double>(want.real()), static_cast<double>(want.imag()));
            worst_bin = std::max(worst_bin, std::abs(F.channels[0][k] - w) / scale);
        }
    }
    const bool ok = worst_rt <= 1e-9 && worst_parseval <= 1e-9 && worst_bin <= 1e-9;
    return {ok, "round trip " + fmt(worst_rt) + ", Parseval rel " + fmt(worst_parseval) + ", per-bin rel " +
                    fmt(worst_bin)};
}

Outcome ddnrlg_dense_equivalence() {
    const auto sched = default_schedule();
    const std::vector<std::pair<std::string, DegradationModel>> ops{
        {"identity", DegradationModel::identity()},
        {"blur", DegradationModel::blur(gaussian_kernel(5, 1.0))},
        {"ds2-bicubic", DegradationModel::downsample(2, bicubic_kernel(2))},
        {"ds2-box", DegradationModel::downsample(2, box_kernel(2))}};
    double worst = 0;
    int cases = 0;
    unsigned seed = 100;
    for (auto [name, model] : ops)
        for (double sy : {0.0, 0.05, 0.25})
            for (int t : {0, 250, 500, 750, 999}) {
                model.sigma_y = sy;
                const Shape s{8, 8, 1};
                const auto x = oracle::random_image(s, seed++);
                const auto y = oracle::random_image(model.measurement_shape(s), seed++);
                const auto M = materialize_dense(model, 8, 8);
                const auto ref = oracle::dense_ddnrlg(M, oracle::to_vec(x), oracle::to_vec(y), sched.alpha_bar_at(t), sy);
                for (auto solver : {SolverKind::Auto, SolverKind::Dense, SolverKind::ConjugateGradient,
                                    SolverKind::FFTDiagonal}) {
                    if (solver == SolverKind::FFTDiagonal && model.is_downsample()) continue;
                    GuidanceSpec g;
                    g.solver = solver;
                    g.cg_tol = 1e-13;
                    g.cg_max_iter = 2000;
                    const auto grad = oracle::to_vec(ddnrlg_gradient(x, y, model, sched, t, g));
                    worst = std::max(worst, (grad - ref).norm() / ref.norm());
                    ++cases;
                }
            }
    return {worst <= 1e-8, std::to_string(cases) + " solves, max rel error " + fmt(worst)};
}

Outcome oracle_collapse() {
    const auto sched = default_schedule();
    double worst = 0;
    for (int nfe : {1, 10, 50})
        for (const auto& model : {DegradationModel::identity(0.25), DegradationModel::downsample(2, bicubic_kernel(2), 0.05)}) {
            const auto x0 = oracle::random_image({32, 32, 1}, static_cast<unsigned>(nfe));
            const auto y = synthesize_measurement(model, x0, 7);
            OracleDenoiser den(x0);
            SamplerConfig cfg;
            cfg.plan = make_plan(sched, nfe, Spacing::Uniform, 0.0);
            cfg.mask = FrequencyMaskSpec::identity();
            GuidanceSpec g;
            g.mu = 0;
            g.mu_schedule = MuSchedule::Constant;
            cfg.guidance = g;
            cfg.seed = 3;
            worst = std::max(worst, max_abs_diff(nfcds_restore(y, model, den, cfg, sched).x0, x0));
        }
    return {worst <= 1e-8, "max |x0_hat - x0| = " + fmt(worst)};
}

// Shared 50-seed benchmark: analytic prior, identity A, sigma_y = 0.25, 64 x 64,
// NFE 50, preset mask. Low-band errors are measured against the closed-form
// posterior mean; PSNR against the ground-truth draw.
struct Benchmark {
    int seeds = 50;
    int low_band_wins = 0;
    double mean_psnr_nfcds = 0, mean_psnr_bypass = 0, mean_psnr_posterior = 0;
    double mean_rel_dist = 0, max_rel_dist = 0;
    double band_radius = 0;
    double seconds = 0;
};

const Benchmark& benchmark() {
    static std::optional<Benchmark> cached;
    if (cached) return *cached;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = config::RunConfig::resolve(
        {{"preset", "denoise_025"}, {"image.height", "64"}, {"image.width", "64"}, {"plan.nfe", "50"}}, {}, false);
    const auto sched = cfg.build_schedule();
    const auto model = cfg.build_model();
    const auto prior = cfg.build_prior(cfg.image_shape());
    AnalyticGaussianDenoiser den(prior);
    SamplerConfig scfg = cfg.build_sampler(sched, true);
    Benchmark b;
    b.band_radius = scfg.band.r_thresh;
    for (int s = 0; s < b.seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(1000 + s);
        const auto x0 = sample_prior(prior, seed);
        const auto y = synthesize_measurement(model, x0, seed);
        const auto post = wiener_posterior_mean(prior, model, y);
        scfg.seed = static_cast<std::uint64_t>(s);
        const auto a = nfcds_restore(y, model, den, scfg, sched).x0;
        const auto c = pnp_restore_baseline(y, model, den, scfg, sched).x0;
        const double la = norm(band_split(a - post, scfg.band, 0).low);
        const double lc = norm(band_split(c - post, scfg.band, 0).low);
        b.low_band_wins += la <= lc;
        b.mean_psnr_nfcds += psnr(a, x0, 2.0) / b.seeds;
        b.mean_psnr_bypass += psnr(c, x0, 2.0) / b.seeds;
        b.mean_psnr_posterior += psnr(post, x0, 2.0) / b.seeds;
        const double d = norm(a - post) / norm(post);
        b.mean_rel_dist += d / b.seeds;
        b.max_rel_dist = std::max(b.max_rel_dist, d);
    }
    b.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cached = b;
    return *cached;
}

// Regression bounds frozen from the reference run (mean 0.1551, max 0.1713).
constexpr double kFrozenMeanRelDist = 0.17;
constexpr double kFrozenMaxRelDist = 0.19;

Outcome analytic_end_to_end() {
    const auto& b = benchmark();
    const bool ok = b.mean_rel_dist <= kFrozenMeanRelDist && b.max_rel_dist <= kFrozenMaxRelDist &&
                    b.low_band_wins >= (9 * b.seeds + 9) / 10 && b.band_radius == 35.0;
    return {ok, "||x - x_post||/||x_post|| mean " + fmt(b.mean_rel_dist, 4) + " max " + fmt(b.max_rel_dist, 4) +
                    " (bounds " + fmt(kFrozenMeanRelDist) + "/" + fmt(kFrozenMaxRelDist) + "), low-band wins " +
                    std::to_string(b.low_band_wins) + "/" + std::to_string(b.seeds)};
}

Outcome psnr_direction() {
    const auto& b = benchmark();
    return {b.mean_psnr_nfcds > b.mean_psnr_bypass,
            "mean PSNR nfcds " + fmt(b.mean_psnr_nfcds, 5) + " dB vs bypass " + fmt(b.mean_psnr_bypass, 5) +
                " dB (posterior mean " + fmt(b.mean_psnr_posterior, 5) + " dB)"};
}

// --- CLI-level criteria ----------------------------------------------------

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

int run_cli(const std::vector<std::string>& args, const fs::path& stdout_path) {
    std::string cmd = "NFCDS_SEED= " + quote(NFCDS_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " >" + quote(stdout_path.string()) + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("nfcds_accept_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Outcome determinism() {
    const auto dir = scratch_dir("determinism");
    const auto gt = (dir / "gt.nfct").string();
    io::write_image(gt, app::to_unit(sample_prior(radial_power_law_prior({32, 32, 1}, 0, 4, 4, 3, 1e-3), 9)));
    auto p = [&](const char* f) { return (dir / f).string(); };
    const std::string stub = quote(NFCDS_STUB_PATH) + " smooth 1.5";
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> runs = {
        {{"generate", "--set", "image.height=32", "--set", "image.width=32", "--set", "seed=5", "--set",
          "mask.r_thresh=4.375", "--set", "io.output=" + p("gen.nfct"), "--set", "io.trajectory=" + p("gen.csv"),
          "--set", "io.report=" + p("gen.json"), "--set", "io.config_echo=" + p("gen.cfg")},
         {"gen.nfct", "gen.csv", "gen.json", "gen.cfg"}},
        {{"restore", "--set", "preset=sr4_noisy", "--set", "io.ground_truth=" + gt, "--set", "io.synthesize=true",
          "--set", "seed=5", "--set", "mask.r_thresh=3.125", "--set", "io.output=" + p("sr.pgm"), "--set",
          "io.trajectory=" + p("sr.csv"), "--set", "io.report=" + p("sr.json")},
         {"sr.pgm", "sr.csv", "sr.json"}},
        {{"restore", "--set", "preset=denoise_025", "--set", "io.ground_truth=" + gt, "--set", "io.synthesize=true",
          "--set", "image.height=32", "--set", "image.width=32", "--set", "seed=6", "--set", "denoiser.backend=external",
          "--set", "bridge.command=" + stub, "--set", "plan.nfe=10", "--set", "io.output=" + p("ext.nfct"), "--set",
          "io.report=" + p("ext.json")},
         {"ext.nfct", "ext.json"}},
        {{"ablate", "--set", "image.height=32", "--set", "image.width=32", "--set", "task.sigma_y=0.1", "--set",
          "plan.nfe=20", "--set", "io.output=" + p("abl.csv"), "--set", "io.csv=" + p("abl_m.csv")},
         {"abl.csv", "abl_m.csv"}},
        {{"ablate", "--set", "ablation.task=generate", "--set", "image.height=32", "--set", "image.width=32", "--set",
          "plan.nfe=20", "--set", "io.output=" + p("ablg.csv"), "--set", "io.csv=" + p("ablg_m.csv")},
         {"ablg.csv", "ablg_m.csv"}},
        {{"mask-inspect", "--set", "image.height=256", "--set", "image.width=256", "--set", "io.output=" + p("m.pgm"),
          "--set", "io.csv=" + p("m.csv")},
         {"m.pgm", "m.csv"}},
        {{"metrics", gt, p("gen.nfct"), "--set", "io.report=" + p("met.json"), "--set", "io.csv=" + p("met.csv")},
         {"met.json", "met.csv"}},
    };
    int files = 0;
    for (const auto& [args, outputs] : runs) {
        std::vector<std::string> first;
        for (int rep = 0; rep < 2; ++rep) {
            const auto log = dir / ("log" + std::to_string(rep) + ".txt");
            const int code = run_cli(args, log);
            if (code != 0) return {false, args[0] + " exited " + std::to_string(code) + ": " + io::read_file(log)};
            for (std::size_t k = 0; k < outputs.size(); ++k) {
                const auto content = io::read_file(dir / outputs[k]);
                if (rep == 0) {
                    first.push_back(content);
                    fs::remove(dir / outputs[k]);
                } else if (content != first[k]) {
                    return {false, args[0] + ": " + outputs[k] + " differs between runs"};
                }
            }
        }
        files += static_cast<int>(outputs.size());
    }
    fs::remove_all(dir);
    return {true, std::to_string(runs.size()) + " commands, " + std::to_string(files) + " files bit-identical"};
}

Outcome bench_sanity() {
    const auto dir = scratch_dir("bench");
    const auto log = dir / "bench.json";
    const int code = run_cli({"bench", "--set", "preset=denoise_025", "--set", "bench.nfe_list=50,100", "--set",
                              "bench.repeats=5"},
                             log);
    const auto text = io::read_file(log);
    fs::remove_all(dir);
    if (code != 0) return {false, "bench exited " + std::to_string(code) + ": " + text};
    const auto j = nlohmann::json::parse(text);
    const double ratio = j["time_ratio"].get<double>();
    return {std::abs(ratio - 0.5) <= 0.2, "t(NFE 50)/t(NFE 100) = " + fmt(ratio) + " (median of 5, " +
                                              fmt(j["runs"][0]["median_seconds"].get<double>()) + " s vs " +
                                              fmt(j["runs"][1]["median_seconds"].get<double>()) + " s)"};
}

Outcome metrics_oracles() {
    double worst_psnr = 0, worst_ssim = 0;
    int pairs = 0;
    for (unsigned s = 0; s < 20; ++s)
        for (std::size_t c : {1u, 3u}) {
            const auto a = oracle::random_image({32, 32, c}, 2 * s + 1, 0, 1);
            auto b = a;
            const auto noise = oracle::random_image({32, 32, c}, 2 * s + 2, -0.2, 0.2);
            const double amount = 0.1 + 0.2 * s;
            for (std::size_t k = 0; k < b.size(); ++k) b[k] = a[k] + amount * noise[k];
            for (double peak : {1.0, 2.0}) {
                worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b, peak) - oracle::psnr_reference(a, b, peak)));
                SsimParams sp;
                sp.peak = peak;
                worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b, sp) - oracle::ssim_bruteforce(a, b, peak)));
            }
            ++pairs;
        }
    return {worst_psnr <= 1e-8 && worst_ssim <= 1e-8,
            std::to_string(pairs) + " pairs, max |dPSNR| " + fmt(worst_psnr) + " dB, max |dSSIM| " + fmt(worst_ssim)};
}

struct Criterion {
    const char* name;
    double budget_seconds;  // 0: no runtime limit
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"mask_correctness", 1, mask_correctness},
        {"fft_round_trip_parseval", 10, fft_round_trip_parseval},
        {"ddnrlg_dense_equivalence", 30, ddnrlg_dense_equivalence},
        {"oracle_collapse", 10, oracle_collapse},
        {"analytic_end_to_end", 300, analytic_end_to_end},
        {"psnr_direction", 300, psnr_direction},
        {"determinism", 0, determinism},
        {"bench_sanity", 0, bench_sanity},
        {"metrics_oracles", 0, metrics_oracles},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // The two benchmark criteria share one computation; charge each its full cost.
        if (std::string(c.name) == "psnr_direction") secs = std::max(secs, benchmark().seconds);
        if (c.budget_seconds > 0 && secs > c.budget_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt(secs) << " s]"
                  << std::endl;
    }
    std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << " (" << criteria.size()
              << " criteria)" << std::endl;
    return failed == 0 ? 0 : 1;
}
