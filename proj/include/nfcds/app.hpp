#pragma once

// Command implementations behind the `nfcds` executable.
//
//   nfcds <restore|generate|ablate|mask-inspect|metrics|bench> [--config FILE] [--set key=value]...
//
// Errors are reported on stderr as a single line `ERROR <code>: <reason>`
// with exit codes 2 (configuration), 3 (I/O or bridge), 4 (numerical).
// Image files hold values in [0, 1]; sampling runs on the standardized
// range [-1, 1], which is also the range task.sigma_y refers to.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfcds/ablation.hpp"
#include "nfcds/bridge.hpp"
#include "nfcds/config.hpp"
#include "nfcds/denoiser.hpp"
#include "nfcds/io.hpp"
#include "nfcds/metrics.hpp"
#include "nfcds/sampler.hpp"

namespace nfcds::app {

using config::RunConfig;
using json = nlohmann::ordered_json;

inline int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config:
        case ErrorKind::Shape: return 2;
        case ErrorKind::Io:
        case ErrorKind::Bridge: return 3;
        case ErrorKind::Numerical: return 4;
    }
    return 4;
}

inline ImageTensor to_signed(ImageTensor img) {
    for (auto& v : img.values()) v = 2.0 * v - 1.0;
    return img;
}

inline ImageTensor to_unit(ImageTensor img) {
    for (auto& v : img.values()) v = 0.5 * (v + 1.0);
    return img;
}

/// JSON cannot carry infinities; identical images report "inf".
inline json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

inline json config_json(const RunConfig& cfg) {
    json j = json::object();
    for (const auto& k : config::registry()) j[k.key] = cfg.str(k.key);
    return j;
}

inline void write_text(const std::string& path, const std::string& text) { io::write_atomic(path, text); }

inline std::optional<ImageTensor> load_ground_truth(const RunConfig& cfg) {
    if (!cfg.has("io.ground_truth")) return std::nullopt;
    return to_signed(io::read_image(cfg.str("io.ground_truth")));
}

inline DenoiserHandle make_denoiser(const RunConfig& cfg, const Shape& shape, const std::optional<ImageTensor>& truth) {
    const auto& backend = cfg.str("denoiser.backend");
    if (backend == "oracle") {
        if (!truth) throw ConfigError("io.ground_truth: required configuration key is missing (oracle denoiser)");
        return std::make_unique<OracleDenoiser>(*truth);
    }
    if (backend == "external") {
        bridge::BridgeConfig b;
        b.transport = cfg.str("bridge.transport") == "tcp" ? bridge::Transport::Tcp : bridge::Transport::Stdio;
        if (b.transport == bridge::Transport::Stdio) b.command = cfg.required("bridge.command");
        b.host = cfg.str("bridge.host");
        b.port = static_cast<int>(cfg.integer("bridge.port"));
        b.timeout_ms = static_cast<int>(cfg.integer("bridge.timeout_ms"));
        b.send_schedule = cfg.boolean("bridge.send_schedule");
        return std::make_unique<bridge::ExternalDenoiser>(b);
    }
    return std::make_unique<AnalyticGaussianDenoiser>(cfg.build_prior(shape));
}

inline void write_trajectory(const RunConfig& cfg, const Trajectory& traj) {
    if (!cfg.has("io.trajectory")) return;
    std::ostringstream os;
    traj.write_csv(os);
    write_text(cfg.str("io.trajectory"), os.str());
}

inline void write_echo(const RunConfig& cfg) {
    if (cfg.has("io.config_echo")) write_text(cfg.str("io.config_echo"), cfg.echo());
}

inline json metric_fields(const ImageTensor& estimate, const ImageTensor& truth) {
    // Both in [-1, 1]; peak 2 equals peak 1 on [0, 1] files.
    json j;
    j["psnr"] = number_or_inf(psnr(estimate, truth, 2.0));
    if (std::min(truth.height(), truth.width()) >= 11) {
        SsimParams sp;
        sp.peak = 2.0;
        j["ssim"] = ssim(estimate, truth, sp);
    } else {
        j["ssim"] = "n/a";
    }
    j["lpips"] = "n/a";
    return j;
}

inline int cmd_restore(const RunConfig& cfg, std::ostream& out) {
    const auto sched = cfg.build_schedule();
    const auto model = cfg.build_model();
    const auto output = cfg.required("io.output");
    const auto truth = load_ground_truth(cfg);

    ImageTensor y;
    if (cfg.boolean("io.synthesize")) {
        if (!truth) throw ConfigError("io.ground_truth: required configuration key is missing (io.synthesize = true)");
        y = synthesize_measurement(model, *truth, static_cast<std::uint64_t>(cfg.integer("seed")));
    } else {
        y = to_signed(io::read_image(cfg.required("io.input")));
    }
    const Shape shape = model.signal_shape(y.shape());
    if (truth && truth->shape() != shape)
        throw ShapeError("io.ground_truth: shape " + to_string(truth->shape()) + " does not match restored shape " +
                         to_string(shape));

    auto denoiser = make_denoiser(cfg, shape, truth);
    const auto scfg = cfg.build_sampler(sched, true);
    const auto result = nfcds_restore(y, model, *denoiser, scfg, sched, truth ? &*truth : nullptr);

    io::write_image(output, to_unit(result.x0), static_cast<int>(cfg.integer("io.bit_depth")));
    write_trajectory(cfg, result.trajectory);
    write_echo(cfg);

    json report;
    report["command"] = "restore";
    report["nfe"] = scfg.plan.nfe();
    report["output"] = output;
    if (truth) {
        report["metrics"] = metric_fields(result.x0, *truth);
        if (y.shape() == truth->shape()) report["measurement_metrics"] = metric_fields(y, *truth);
    }
    report["config"] = config_json(cfg);
    if (cfg.has("io.report")) write_text(cfg.str("io.report"), report.dump(2) + "\n");
    json line = {{"command", "restore"}, {"output", output}};
    if (truth) line["psnr"] = report["metrics"]["psnr"];
    out << line.dump() << '\n';
    return 0;
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out) {
    const auto sched = cfg.build_schedule();
    const auto output = cfg.required("io.output");
    const Shape shape = cfg.image_shape();
    auto denoiser = make_denoiser(cfg, shape, load_ground_truth(cfg));
    const auto scfg = cfg.build_sampler(sched, false);
    const auto result = generate(*denoiser, scfg, sched, shape);
    io::write_image(output, to_unit(result.x0), static_cast<int>(cfg.integer("io.bit_depth")));
    write_trajectory(cfg, result.trajectory);
    write_echo(cfg);
    if (cfg.has("io.report")) {
        json report = {{"command", "generate"}, {"nfe", scfg.plan.nfe()}, {"output", output}};
        report["config"] = config_json(cfg);
        write_text(cfg.str("io.report"), report.dump(2) + "\n");
    }
    out << json{{"command", "generate"}, {"output", output}}.dump() << '\n';
    return 0;
}

inline int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    const auto sched = cfg.build_schedule();
    const auto output = cfg.required("io.output");
    const bool restore = cfg.str("ablation.task") == "restore";
    const auto prior = cfg.build_prior(cfg.image_shape());
    std::optional<DegradationModel> model;
    if (restore) model = cfg.build_model();

    SamplerConfig base = cfg.build_sampler(sched, restore);
    std::vector<AblationCase> grid;
    const int cut = static_cast<int>(cfg.integer("ablation.cut_step"));
    for (const auto& mode : config::split(cfg.str("ablation.modes"), ',')) {
        SamplerConfig c = base;
        c.mask = FrequencyMaskSpec::identity();
        c.ablation = RunConfig::parse_ablation(mode);
        c.ablation_step = cut;
        grid.push_back({mode, c});
    }
    const auto report = run_ablation_suite(prior, model, grid, sched, static_cast<std::uint64_t>(cfg.integer("ablation.image_seed")));
    std::ostringstream traj;
    report.write_trajectories_csv(traj);
    write_text(output, traj.str());
    if (cfg.has("io.csv")) {
        std::ostringstream m;
        report.write_metrics_csv(m);
        write_text(cfg.str("io.csv"), m.str());
    }
    write_echo(cfg);
    out << json{{"command", "ablate"}, {"configs", report.rows.size()}, {"output", output}}.dump() << '\n';
    return 0;
}

inline int cmd_mask_inspect(const RunConfig& cfg, std::ostream& out) {
    const auto output = cfg.required("io.output");
    const Shape shape = cfg.image_shape();
    const FrequencyGrid grid(shape.height, shape.width);
    auto spec = cfg.build_mask();
    const auto mask = soft_threshold_mask(grid, spec, 0);
    ImageTensor img(shape.height, shape.width, 1);
    for (std::size_t k = 0; k < mask.size(); ++k) img[k] = mask[k];
    io::write_atomic(output, io::encode_pnm(img, static_cast<int>(cfg.integer("io.bit_depth"))));
    if (cfg.has("io.csv")) {
        std::vector<std::pair<double, double>> rows;
        for (std::size_t k = 0; k < mask.size(); ++k) rows.emplace_back(grid.radii()[k], mask[k]);
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end(),
                               [](const auto& a, const auto& b) { return a.first == b.first; }),
                   rows.end());
        std::ostringstream os;
        os.precision(17);
        os << "radius,mask\n";
        for (const auto& [r, m] : rows) os << r << ',' << m << '\n';
        write_text(cfg.str("io.csv"), os.str());
    }
    write_echo(cfg);
    out << json{{"command", "mask-inspect"}, {"output", output}, {"dc", mask[grid.center_row() * shape.width + grid.center_col()]},
                {"corner", mask[0]}}
               .dump()
        << '\n';
    return 0;
}

inline int cmd_metrics(const RunConfig& cfg, std::ostream& out) {
    const auto a = io::read_image(cfg.required("metrics.a"));
    const auto b = io::read_image(cfg.required("metrics.b"));
    const double peak = cfg.real("metrics.peak");
    json j;
    j["psnr"] = number_or_inf(psnr(a, b, peak));
    if (std::min(a.height(), a.width()) >= 11) {
        SsimParams sp;
        sp.peak = peak;
        j["ssim"] = ssim(a, b, sp);
    } else {
        j["ssim"] = "n/a";
    }
    j["lpips"] = "n/a";
    const auto line = j.dump();
    out << line << '\n';
    if (cfg.has("io.report")) write_text(cfg.str("io.report"), line + "\n");
    if (cfg.has("io.csv")) {
        std::ostringstream os;
        os.precision(17);
        os << "radius,error,count\n";
        for (const auto& bin : radial_spectral_error(a, b)) os << bin.radius << ',' << bin.error << ',' << bin.count << '\n';
        write_text(cfg.str("io.csv"), os.str());
    }
    return 0;
}

struct BenchEntry {
    int nfe = 0;
    double median_seconds = 0;
    std::vector<double> seconds;
};

/// Median wall-clock of full restorations at each NFE on the synthesized task.
inline std::vector<BenchEntry> run_bench(const RunConfig& cfg) {
    const auto sched = cfg.build_schedule();
    const auto model = cfg.build_model();
    const Shape shape = cfg.image_shape();
    auto truth = load_ground_truth(cfg);
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    if (!truth) truth = sample_prior(cfg.build_prior(shape), seed);
    const auto y = synthesize_measurement(model, *truth, seed);
    auto denoiser = make_denoiser(cfg, truth->shape(), truth);
    const int repeats = std::max<int>(1, static_cast<int>(cfg.integer("bench.repeats")));

    std::vector<BenchEntry> entries;
    for (const auto nfe : cfg.int_list("bench.nfe_list")) {
        SamplerConfig scfg = cfg.build_sampler(sched, true);
        scfg.record_trajectory = false;
        scfg.plan.steps = make_subsequence(sched.steps(), static_cast<int>(nfe),
                                           cfg.str("plan.spacing") == "quadratic" ? Spacing::Quadratic : Spacing::Uniform);
        BenchEntry e;
        e.nfe = static_cast<int>(nfe);
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = nfcds_restore(y, model, *denoiser, scfg, sched);
            const auto t1 = std::chrono::steady_clock::now();
            e.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        auto sorted = e.seconds;
        std::sort(sorted.begin(), sorted.end());
        e.median_seconds = sorted[sorted.size() / 2];
        entries.push_back(std::move(e));
    }
    return entries;
}

inline int cmd_bench(const RunConfig& cfg, std::ostream& out) {
    const auto entries = run_bench(cfg);
    json j;
    j["command"] = "bench";
    j["runs"] = json::array();
    for (const auto& e : entries) j["runs"].push_back({{"nfe", e.nfe}, {"median_seconds", e.median_seconds}});
    if (entries.size() >= 2 && entries[1].median_seconds > 0)
        j["time_ratio"] = entries[0].median_seconds / entries[1].median_seconds;
    out << j.dump() << '\n';
    if (cfg.has("io.report")) write_text(cfg.str("io.report"), j.dump(2) + "\n");
    return 0;
}

inline const char* kUsage =
    "usage: nfcds <restore|generate|ablate|mask-inspect|metrics|bench> [--config FILE] [--set key=value]...\n"
    "       nfcds metrics A B [--set key=value]...\n";

inline std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

/// Entry point shared by the executable and the tests.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.empty() || args[0] == "-h" || args[0] == "--help") {
            (args.empty() ? err : out) << kUsage;
            return args.empty() ? 2 : 0;
        }
        const std::string& command = args[0];
        config::KeyValues file, overrides;
        std::vector<std::string> positional;
        for (std::size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config") {
                if (++i >= args.size()) throw ConfigError("--config needs a file argument");
                const auto kv = config::parse_text(io::read_file(args[i]), args[i]);
                file.insert(file.end(), kv.begin(), kv.end());
            } else if (args[i] == "--set") {
                if (++i >= args.size()) throw ConfigError("--set needs a key=value argument");
                overrides.push_back(config::parse_assignment(args[i]));
            } else if (!args[i].empty() && args[i][0] == '-') {
                throw ConfigError("unknown option " + args[i]);
            } else {
                positional.push_back(args[i]);
            }
        }
        if (command == "metrics") {
            if (positional.size() == 2) {
                overrides.insert(overrides.begin(), {"metrics.b", positional[1]});
                overrides.insert(overrides.begin(), {"metrics.a", positional[0]});
            } else if (!positional.empty()) {
                throw ConfigError("metrics takes exactly two image paths");
            }
        } else if (!positional.empty()) {
            throw ConfigError("unexpected argument " + positional.front());
        }
        const auto cfg = RunConfig::resolve(file, overrides);
        if (command == "restore") return cmd_restore(cfg, out);
        if (command == "generate") return cmd_generate(cfg, out);
        if (command == "ablate") return cmd_ablate(cfg, out);
        if (command == "mask-inspect") return cmd_mask_inspect(cfg, out);
        if (command == "metrics") return cmd_metrics(cfg, out);
        if (command == "bench") return cmd_bench(cfg, out);
        throw ConfigError("unknown command '" + command + "'");
    } catch (const Error& e) {
        const int code = exit_code(e.kind());
        err << "ERROR " << code << ": " << one_line(e.what()) << '\n';
        return code;
    } catch (const std::exception& e) {
        err << "ERROR 4: " << one_line(e.what()) << '\n';
        return 4;
    }
}

}  // namespace nfcds::app
