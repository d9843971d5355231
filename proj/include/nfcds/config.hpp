#pragma once

// Flat `section.key = value` run configuration with typed validation,
// task presets, and builders for the library's parameter structs.

#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nfcds/degradation.hpp"
#include "nfcds/denoiser.hpp"
#include "nfcds/error.hpp"
#include "nfcds/guidance.hpp"
#include "nfcds/io.hpp"
#include "nfcds/sampler.hpp"
#include "nfcds/schedule.hpp"
#include "nfcds/spectral.hpp"

namespace nfcds::config {

enum class Type { String, Int, Real, Bool, Choice, IntList, PairList };

struct KeySpec {
    const char* key;
    const char* default_value;
    Type type;
    const char* choices = "";  // '|' separated for Type::Choice
};

// clang-format off
inline const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        {"preset", "", Type::Choice, "|sr4|sr4_noisy|denoise_010|denoise_025|denoise_050"},
        {"seed", "0", Type::Int},
        {"schedule.T", "1000", Type::Int},
        {"schedule.beta_start", "0.0001", Type::Real},
        {"schedule.beta_end", "0.02", Type::Real},
        {"plan.nfe", "50", Type::Int},
        {"plan.zeta", "1", Type::Real},
        {"plan.eta", "", Type::Real},
        {"plan.spacing", "uniform", Type::Choice, "uniform|quadratic"},
        {"task.operator", "identity", Type::Choice, "identity|blur|downsample"},
        {"task.sr_factor", "4", Type::Int},
        {"task.sr_kernel", "bicubic", Type::Choice, "bicubic|box"},
        {"task.sigma_y", "0", Type::Real},
        {"task.kernel_file", "", Type::String},
        {"task.blur_size", "9", Type::Int},
        {"task.blur_sigma", "2", Type::Real},
        {"mask.r_thresh", "35", Type::Real},
        {"mask.alpha", "5", Type::Real},
        {"mask.bypass", "false", Type::Bool},
        {"mask.renormalize", "false", Type::Bool},
        {"mask.r_table", "", Type::PairList},
        {"mask.filter_fresh_only", "false", Type::Bool},
        {"band.r_thresh", "", Type::Real},
        {"band.alpha", "", Type::Real},
        {"guidance.kind", "ddnrlg", Type::Choice, "ddnrlg|least_squares|proximal"},
        {"guidance.mu", "1", Type::Real},
        {"guidance.mu_schedule", "tweedie", Type::Choice, "constant|tweedie|table"},
        {"guidance.mu_table", "", Type::PairList},
        {"guidance.solver", "auto", Type::Choice, "auto|dense|fft|cg"},
        {"guidance.cg_tol", "1e-10", Type::Real},
        {"guidance.cg_max_iter", "500", Type::Int},
        {"denoiser.backend", "gaussian", Type::Choice, "gaussian|oracle|external"},
        {"prior.mean", "0", Type::Real},
        {"prior.amplitude", "4", Type::Real},
        {"prior.corner", "4", Type::Real},
        {"prior.exponent", "3", Type::Real},
        {"prior.floor", "0.001", Type::Real},
        {"bridge.transport", "stdio", Type::Choice, "stdio|tcp"},
        {"bridge.command", "", Type::String},
        {"bridge.host", "127.0.0.1", Type::String},
        {"bridge.port", "0", Type::Int},
        {"bridge.timeout_ms", "30000", Type::Int},
        {"bridge.send_schedule", "true", Type::Bool},
        {"sampler.ablation", "none", Type::Choice, "none|zero_low|zero_high|cut_low|cut_high"},
        {"sampler.ablation_step", "0", Type::Int},
        {"image.height", "64", Type::Int},
        {"image.width", "64", Type::Int},
        {"image.channels", "1", Type::Int},
        {"io.input", "", Type::String},
        {"io.ground_truth", "", Type::String},
        {"io.synthesize", "false", Type::Bool},
        {"io.output", "", Type::String},
        {"io.report", "", Type::String},
        {"io.trajectory", "", Type::String},
        {"io.csv", "", Type::String},
        {"io.config_echo", "", Type::String},
        {"io.bit_depth", "8", Type::Int},
        {"ablation.task", "restore", Type::Choice, "restore|generate"},
        {"ablation.modes", "none,zero_low,cut_low,zero_high,cut_high", Type::String},
        {"ablation.cut_step", "10", Type::Int},
        {"ablation.image_seed", "0", Type::Int},
        {"bench.nfe_list", "50,100", Type::IntList},
        {"bench.repeats", "5", Type::Int},
        {"metrics.a", "", Type::String},
        {"metrics.b", "", Type::String},
        {"metrics.peak", "1", Type::Real},
    };
    return keys;
}
// clang-format on

struct Preset {
    const char* name;
    const char* op;
    double sigma_y;
    double r_thresh;
    double alpha;
};

/// (r_thresh, alpha) per restoration task at 256 x 256.
inline constexpr Preset kPresets[] = {
    {"sr4", "downsample", 0.0, 35, 5},       {"sr4_noisy", "downsample", 0.05, 25, 5},
    {"denoise_010", "identity", 0.1, 64, 5}, {"denoise_025", "identity", 0.25, 35, 5},
    {"denoise_050", "identity", 0.5, 25, 5},
};

inline const Preset* find_preset(const std::string& name) {
    for (const auto& p : kPresets)
        if (name == p.name) return &p;
    return nullptr;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parse `key = value` lines; '#' starts a comment.
inline KeyValues parse_text(const std::string& text, const std::string& origin = "<config>") {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

/// Effective configuration: every registered key with its resolved value.
class RunConfig {
public:
    RunConfig() {
        for (const auto& k : registry()) values_[k.key] = k.default_value;
    }

    /// defaults < preset < file < NFCDS_SEED < overrides. The preset is taken
    /// from the last `preset` assignment among file and overrides.
    static RunConfig resolve(const KeyValues& file, const KeyValues& overrides, bool use_env = true) {
        RunConfig cfg;
        std::string preset;
        for (const auto* src : {&file, &overrides})
            for (const auto& [k, v] : *src)
                if (k == "preset") preset = v;
        if (!preset.empty()) {
            const auto* p = find_preset(preset);
            if (p == nullptr) throw ConfigError("preset: unknown preset '" + preset + "'");
            cfg.set("preset", preset);
            cfg.set("task.operator", p->op);
            cfg.set("task.sr_factor", "4");
            cfg.set("task.sigma_y", format_real(p->sigma_y));
            cfg.set("mask.r_thresh", format_real(p->r_thresh));
            cfg.set("mask.alpha", format_real(p->alpha));
        }
        for (const auto& [k, v] : file) cfg.set(k, v);
        if (use_env)
            if (const char* env = std::getenv("NFCDS_SEED"); env != nullptr && *env != '\0') cfg.set("seed", env);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        cfg.validate();
        return cfg;
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.contains(key)) throw ConfigError(key + ": unknown configuration key");
        values_[key] = value;
    }

    [[nodiscard]] bool has(const std::string& key) const { return !at(key).empty(); }
    [[nodiscard]] const std::string& str(const std::string& key) const { return at(key); }

    [[nodiscard]] const std::string& required(const std::string& key) const {
        const auto& v = at(key);
        if (v.empty()) throw ConfigError(key + ": required configuration key is missing");
        return v;
    }

    [[nodiscard]] long long integer(const std::string& key) const { return parse_int(key, required(key)); }
    [[nodiscard]] double real(const std::string& key) const { return parse_real(key, required(key)); }
    [[nodiscard]] bool boolean(const std::string& key) const { return parse_bool(key, required(key)); }

    [[nodiscard]] std::vector<long long> int_list(const std::string& key) const {
        std::vector<long long> out;
        for (const auto& item : split(at(key), ',')) out.push_back(parse_int(key, item));
        return out;
    }

    [[nodiscard]] std::vector<std::pair<int, double>> pair_list(const std::string& key) const {
        std::vector<std::pair<int, double>> out;
        for (const auto& item : split(at(key), ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw ConfigError(key + ": expected t:value pairs, got '" + item + "'");
            out.emplace_back(static_cast<int>(parse_int(key, item.substr(0, colon))),
                             parse_real(key, item.substr(colon + 1)));
        }
        return out;
    }

    /// Canonical text form; feeding it back through resolve() reproduces this config.
    [[nodiscard]] std::string echo() const {
        std::string s;
        for (const auto& k : registry()) s += std::string(k.key) + " = " + values_.at(k.key) + "\n";
        return s;
    }

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

    void validate() const {
        for (const auto& k : registry()) {
            const auto& v = values_.at(k.key);
            if (v.empty()) continue;
            switch (k.type) {
                case Type::String: break;
                case Type::Int: parse_int(k.key, v); break;
                case Type::Real: parse_real(k.key, v); break;
                case Type::Bool: parse_bool(k.key, v); break;
                case Type::IntList: (void)int_list(k.key); break;
                case Type::PairList: (void)pair_list(k.key); break;
                case Type::Choice: {
                    bool ok = false;
                    for (const auto& c : split(std::string("|") + k.choices + "|", '|')) ok |= c == v;
                    if (!ok) throw ConfigError(std::string(k.key) + ": invalid value '" + v + "' (expected " +
                                               k.choices + ")");
                } break;
            }
        }
        const int T = static_cast<int>(integer("schedule.T"));
        if (T < 1) throw ConfigError("schedule.T: must be >= 1");
        const auto nfe = integer("plan.nfe");
        if (nfe < 1 || nfe > T) throw ConfigError("plan.nfe: must lie in [1, schedule.T]");
        if (integer("image.height") < 2 || integer("image.width") < 2 || integer("image.channels") < 1)
            throw ConfigError("image.height: image dimensions must be >= 2 (channels >= 1)");
        if (integer("task.sr_factor") < 1) throw ConfigError("task.sr_factor: must be >= 1");
        if (integer("io.bit_depth") != 8 && integer("io.bit_depth") != 16)
            throw ConfigError("io.bit_depth: must be 8 or 16");
        // Delegate value-range checks to the library's own validators.
        (void)build_plan(build_schedule());
        (void)build_model();
        build_mask().validate();
        build_guidance().validate();
    }

    // --- builders ----------------------------------------------------------

    [[nodiscard]] NoiseSchedule build_schedule() const {
        return wrap("schedule", [&] {
            return make_linear_schedule(static_cast<int>(integer("schedule.T")), real("schedule.beta_start"),
                                        real("schedule.beta_end"));
        });
    }

    [[nodiscard]] SamplingPlan build_plan(const NoiseSchedule& sched) const {
        SamplingPlan p;
        p.steps = make_subsequence(sched.steps(), static_cast<int>(integer("plan.nfe")),
                                   str("plan.spacing") == "quadratic" ? Spacing::Quadratic : Spacing::Uniform);
        p.zeta = real("plan.zeta");
        if (has("plan.eta")) {
            p.sigma_rule = SigmaRule::Eta;
            p.eta = real("plan.eta");
        }
        wrap("plan", [&] {
            p.validate(sched);
            return 0;
        });
        return p;
    }

    [[nodiscard]] DegradationModel build_model() const {
        DegradationModel m;
        m.sigma_y = real("task.sigma_y");
        const auto& op = str("task.operator");
        if (op == "blur") {
            Kernel2d k = has("task.kernel_file")
                             ? io::read_kernel(str("task.kernel_file"))
                             : wrap("task.blur_size", [&] {
                                   return gaussian_kernel(static_cast<std::size_t>(integer("task.blur_size")),
                                                          real("task.blur_sigma"));
                               });
            m.op = op::CircularBlur{std::move(k)};
        } else if (op == "downsample") {
            const auto f = static_cast<std::size_t>(integer("task.sr_factor"));
            Kernel2d k = has("task.kernel_file") ? io::read_kernel(str("task.kernel_file"))
                         : str("task.sr_kernel") == "box" ? box_kernel(f)
                                                          : bicubic_kernel(f);
            m.op = op::Downsample{f, std::move(k)};
        }
        wrap("task", [&] {
            m.validate();
            return 0;
        });
        return m;
    }

    [[nodiscard]] FrequencyMaskSpec build_mask() const {
        FrequencyMaskSpec s;
        s.r_thresh = real("mask.r_thresh");
        s.alpha = real("mask.alpha");
        s.bypass = boolean("mask.bypass");
        s.renormalize = boolean("mask.renormalize");
        if (has("mask.r_table")) {
            s.schedule = RadiusSchedule::PerStep;
            s.radius_table = pair_list("mask.r_table");
        }
        return s;
    }

    [[nodiscard]] FrequencyMaskSpec build_band() const {
        FrequencyMaskSpec s = build_mask();
        s.bypass = false;
        s.renormalize = false;
        if (has("band.r_thresh")) {
            s.r_thresh = real("band.r_thresh");
            s.schedule = RadiusSchedule::Constant;
        }
        if (has("band.alpha")) s.alpha = real("band.alpha");
        return s;
    }

    [[nodiscard]] GuidanceSpec build_guidance() const {
        GuidanceSpec g;
        const auto& kind = str("guidance.kind");
        g.kind = kind == "least_squares" ? GuidanceKind::LeastSquares
                 : kind == "proximal"    ? GuidanceKind::Proximal
                                         : GuidanceKind::DDNRLG;
        g.mu = real("guidance.mu");
        const auto& ms = str("guidance.mu_schedule");
        g.mu_schedule = ms == "constant" ? MuSchedule::Constant : ms == "table" ? MuSchedule::Table : MuSchedule::Tweedie;
        g.mu_table = pair_list("guidance.mu_table");
        const auto& sv = str("guidance.solver");
        g.solver = sv == "dense" ? SolverKind::Dense
                   : sv == "fft" ? SolverKind::FFTDiagonal
                   : sv == "cg"  ? SolverKind::ConjugateGradient
                                 : SolverKind::Auto;
        g.cg_tol = real("guidance.cg_tol");
        g.cg_max_iter = static_cast<int>(integer("guidance.cg_max_iter"));
        return g;
    }

    [[nodiscard]] SamplerConfig build_sampler(const NoiseSchedule& sched, bool restoration) const {
        SamplerConfig c;
        c.plan = build_plan(sched);
        c.mask = build_mask();
        c.band = build_band();
        if (restoration) c.guidance = build_guidance();
        c.seed = static_cast<std::uint64_t>(integer("seed"));
        c.filter_fresh_only = boolean("mask.filter_fresh_only");
        c.ablation = parse_ablation(str("sampler.ablation"));
        c.ablation_step = static_cast<int>(integer("sampler.ablation_step"));
        c.record_trajectory = has("io.trajectory");
        return c;
    }

    [[nodiscard]] StationaryGaussianPrior build_prior(const Shape& shape) const {
        return wrap("prior", [&] {
            return radial_power_law_prior(shape, real("prior.mean"), real("prior.amplitude"), real("prior.corner"),
                                          real("prior.exponent"), real("prior.floor"));
        });
    }

    [[nodiscard]] Shape image_shape() const {
        return {static_cast<std::size_t>(integer("image.height")), static_cast<std::size_t>(integer("image.width")),
                static_cast<std::size_t>(integer("image.channels"))};
    }

    static Ablation parse_ablation(const std::string& s) {
        if (s == "none") return Ablation::None;
        if (s == "zero_low") return Ablation::ZeroLowFreqNoise;
        if (s == "zero_high") return Ablation::ZeroHighFreqNoise;
        if (s == "cut_low") return Ablation::CutLowAfterStep;
        if (s == "cut_high") return Ablation::CutHighAfterStep;
        throw ConfigError("unknown ablation mode '" + s + "'");
    }

    static std::string format_real(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

private:
    [[nodiscard]] const std::string& at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(key + ": unknown configuration key");
        return it->second;
    }

    // Prefix library config errors with the section they came from.
    template <typename F>
    static auto wrap(const std::string& section, F&& f) -> decltype(f()) {
        try {
            return f();
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.find(section) == 0) throw;
            throw ConfigError(section + ": " + what);
        }
    }

    static long long parse_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const long long r = std::stoll(v, &pos);
            if (pos == v.size()) return r;
        } catch (const std::exception&) {
        }
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }

    static double parse_real(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos == v.size() && std::isfinite(r)) return r;
        } catch (const std::exception&) {
        }
        throw ConfigError(key + ": expected a finite real number, got '" + v + "'");
    }

    static bool parse_bool(const std::string& key, const std::string& v) {
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError(key + ": expected a boolean, got '" + v + "'");
    }

    std::map<std::string, std::string> values_;
};

}  // namespace nfcds::config
