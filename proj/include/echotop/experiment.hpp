#pragma once
// Reproducible experiment harness: config parsing, figure presets, parameter
// sweeps, ensemble averaging, CSV/JSON persistence and theory overlays.
//
// File contract (documented bit-exactly in the README):
//   single trace CSV      t, re_f, im_f, F
//   ensemble trace CSV    t, re_f, im_f, F, F_mean, F_stderr
//   classical trace CSV   t, F, F_stderr
//   sweep table CSV       one row per axis value, see sweep_header()
//   theory bundle JSON    semiclassical predictions for the configured run
//   manifest JSON         config echo, code version, RNG streams, checksums
// All floats are printed with "%.17g" so a rerun of the same config+seed on
// one platform reproduces every CSV byte for byte. Files are written to a
// temp name and renamed into place.

#include "classical.hpp"
#include "semiclassics.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace echotop {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "ECHOTOP_OUTPUT_DIR";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceRefusal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { Quantum, Classical, Theory, Correlation, Sweep };

struct ExperimentConfig {
    RunMode mode = RunMode::Quantum;
    int S = 200;
    double alpha = 1.1;
    double beta = 0.0;
    double gamma = 0.0;
    double j_ref = 0.0;
    std::optional<double> delta;         // exactly one of delta /
    std::optional<double> delta_times_S; // delta_times_S must be given
    StateKind state = StateKind::Coherent;
    double theta_star = 1.0;
    double phi_star = 1.0;
    uint64_t seed = 1;
    long members = 1; // random-state ensemble size
    long t_max = 1000;
    long stride = 1;
    std::string output_dir; // empty: $ECHOTOP_OUTPUT_DIR, else "."
    std::string label = "run";
    bool force = false;        // overrides the resource guard
    bool keep_members = false; // also write one CSV per ensemble member
    bool eigen_kick = false;   // oracle flag: kick via eigenbasis, not Chebyshev
    bool overlay = true;       // emit the theory overlay curve where defined
    // classical mode
    long cl_members = 20000;
    long cl_t_max = 2000;
    long cl_stride = 25;
    // sweep mode
    std::string sweep_axis; // delta | S | seed
    std::vector<double> sweep_values;

    TopParameters top() const { return TopParameters{alpha, beta, gamma, j_ref}; }

    double resolved_delta() const {
        if (delta.has_value() == delta_times_S.has_value())
            throw ConfigError("provide exactly one of: delta, delta_times_S");
        return delta ? *delta : *delta_times_S / S;
    }

    std::string resolved_output_dir() const {
        if (!output_dir.empty()) return output_dir;
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
        return ".";
    }
};

// ---------------------------------------------------------------------------
// Config parsing: flat key=value, one entry point for file keys and CLI flags
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not a real number: '" + value + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config field '" + key + "': not an integer: '" + value + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    throw ConfigError("config field '" + key + "': not a boolean: '" + value + "'");
}

} // namespace detail

inline void apply_config_entry(ExperimentConfig& c, const std::string& key,
                               const std::string& value) {
    using detail::parse_bool;
    using detail::parse_int;
    using detail::parse_real;
    if (key == "mode") {
        if (value == "quantum") c.mode = RunMode::Quantum;
        else if (value == "classical") c.mode = RunMode::Classical;
        else if (value == "theory") c.mode = RunMode::Theory;
        else if (value == "correlation") c.mode = RunMode::Correlation;
        else if (value == "sweep") c.mode = RunMode::Sweep;
        else throw ConfigError("config field 'mode': unknown mode '" + value + "'");
    } else if (key == "S") {
        const long s = parse_int(key, value);
        if (s < 1) throw ConfigError("config field 'S': must be a positive integer");
        c.S = static_cast<int>(s);
    } else if (key == "alpha") c.alpha = parse_real(key, value);
    else if (key == "beta") c.beta = parse_real(key, value);
    else if (key == "gamma") c.gamma = parse_real(key, value);
    else if (key == "j_ref") c.j_ref = parse_real(key, value);
    else if (key == "delta") c.delta = parse_real(key, value);
    else if (key == "delta_times_S") c.delta_times_S = parse_real(key, value);
    else if (key == "state") {
        if (value == "coherent") c.state = StateKind::Coherent;
        else if (value == "random") c.state = StateKind::Random;
        else throw ConfigError("config field 'state': must be 'coherent' or 'random'");
    } else if (key == "theta_star") c.theta_star = parse_real(key, value);
    else if (key == "phi_star") c.phi_star = parse_real(key, value);
    else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, value));
    else if (key == "members") {
        c.members = parse_int(key, value);
        if (c.members < 1) throw ConfigError("config field 'members': must be >= 1");
    } else if (key == "t_max") {
        c.t_max = parse_int(key, value);
        if (c.t_max < 0) throw ConfigError("config field 't_max': must be >= 0");
    } else if (key == "stride") {
        c.stride = parse_int(key, value);
        if (c.stride < 1) throw ConfigError("config field 'stride': must be >= 1");
    } else if (key == "output_dir") c.output_dir = value;
    else if (key == "label") c.label = value;
    else if (key == "force") c.force = parse_bool(key, value);
    else if (key == "keep_members") c.keep_members = parse_bool(key, value);
    else if (key == "eigen_kick") c.eigen_kick = parse_bool(key, value);
    else if (key == "overlay") c.overlay = parse_bool(key, value);
    else if (key == "cl_members") {
        c.cl_members = parse_int(key, value);
        if (c.cl_members < 1) throw ConfigError("config field 'cl_members': must be >= 1");
    } else if (key == "cl_t_max") c.cl_t_max = parse_int(key, value);
    else if (key == "cl_stride") {
        c.cl_stride = parse_int(key, value);
        if (c.cl_stride < 1) throw ConfigError("config field 'cl_stride': must be >= 1");
    } else if (key == "sweep_axis") {
        if (value != "delta" && value != "S" && value != "seed")
            throw ConfigError("config field 'sweep_axis': must be delta, S or seed");
        c.sweep_axis = value;
    } else if (key == "sweep_values") {
        c.sweep_values.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ','))
            c.sweep_values.push_back(parse_real(key, detail::trim(item)));
        if (c.sweep_values.empty())
            throw ConfigError("config field 'sweep_values': empty list");
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

inline ExperimentConfig parse_config_file(const std::string& path,
                                          ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got '" + t + "'");
        apply_config_entry(base, detail::trim(t.substr(0, eq)),
                           detail::trim(t.substr(eq + 1)));
    }
    return base;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

// Named parameter sets for the standard experiments. Everything a preset
// fixes can still be overridden by later flags.
inline ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig c;
    if (name == "freeze") {
        // fidelity freeze of a coherent packet, weak kick, plus the classical
        // comparison that keeps decaying where the quantum curve freezes
        c.mode = RunMode::Quantum;
        c.S = 200;
        c.beta = 0.0;
        c.delta_times_S = 0.32;
        c.state = StateKind::Coherent;
        c.theta_star = 1.0;
        c.phi_star = 1.0;
        c.t_max = 6000;
        c.stride = 2;
        c.label = "freeze";
    } else if (name == "random-plateau") {
        // random-state plateau at beta = 1.4 (nonresonant top), S = 200 leg;
        // rerun with S=1600, members=20, t_max=4000 for the large-spin leg
        c.mode = RunMode::Quantum;
        c.S = 200;
        c.beta = 1.4;
        c.delta_times_S = 0.32;
        c.state = StateKind::Random;
        c.members = 100;
        c.t_max = 2000;
        c.stride = 2;
        c.label = "random-plateau";
    } else if (name == "random-decay") {
        // power-law asymptotics of random states, resonant top; full preset
        // is ~1h on one core (1000 members to 10^6 steps), see README
        c.mode = RunMode::Quantum;
        c.S = 200;
        c.beta = 0.0;
        c.delta_times_S = 0.064;
        c.state = StateKind::Random;
        c.members = 1000;
        c.t_max = 1000000;
        c.stride = 500;
        c.label = "random-decay";
    } else {
        throw ConfigError("unknown preset: '" + name +
                          "' (available: freeze, random-plateau, random-decay)");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Persistence: atomic CSV/JSON emission + FNV-1a checksums
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

} // namespace detail

struct RunManifest {
    nlohmann::json config_echo;
    std::string code_version = kVersion;
    std::vector<std::string> rng_streams;
    double wall_seconds = 0;
    std::map<std::string, std::string> checksums; // file name -> fnv1a-64 hex
};

class OutputWriter {
  public:
    explicit OutputWriter(const std::filesystem::path& dir) : dir_(dir) {}

    std::string emit(const std::string& name, const std::string& content) {
        const std::filesystem::path p = dir_ / name;
        detail::write_atomic(p, content);
        checksums_[name] = detail::hex64(detail::fnv1a64(content));
        files_.push_back(p.string());
        return p.string();
    }

    const std::map<std::string, std::string>& checksums() const { return checksums_; }
    const std::vector<std::string>& files() const { return files_; }

  private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> checksums_;
    std::vector<std::string> files_;
};

inline std::string csv_of_trace(const FidelityTrace& tr) {
    std::string out = "t, re_f, im_f, F\n";
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out += std::to_string(tr.times[i]) + ", " + detail::fmt17(tr.amplitude[k].real()) +
               ", " + detail::fmt17(tr.amplitude[k].imag()) + ", " +
               detail::fmt17(tr.fidelity[k]) + "\n";
    }
    return out;
}

inline std::string csv_of_ensemble(const EnsembleTrace& tr) {
    std::string out = "t, re_f, im_f, F, F_mean, F_stderr\n";
    for (size_t i = 0; i < tr.times.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out += std::to_string(tr.times[i]) + ", " +
               detail::fmt17(tr.mean_amplitude[k].real()) + ", " +
               detail::fmt17(tr.mean_amplitude[k].imag()) + ", " +
               detail::fmt17(tr.fidelity_of_mean[k]) + ", " +
               detail::fmt17(tr.mean_fidelity[k]) + ", " +
               detail::fmt17(tr.stderr_fidelity[k]) + "\n";
    }
    return out;
}

inline std::string csv_of_classical(const ClassicalTrace& tr) {
    std::string out = "t, F, F_stderr\n";
    for (size_t i = 0; i < tr.times.size(); ++i)
        out += std::to_string(tr.times[i]) + ", " + detail::fmt17(tr.fidelity[i]) + ", " +
               detail::fmt17(tr.stderr_fidelity[i]) + "\n";
    return out;
}

inline nlohmann::json json_of_timescales(const Timescales& ts) {
    nlohmann::json j;
    if (ts.t1) j["t1"] = *ts.t1;
    else j["t1"] = nullptr;
    j["t2"] = ts.t2;
    j["t_coh"] = ts.t_coh;
    j["t_r"] = ts.t_r;
    j["t_ran"] = ts.t_ran;
    j["t_star"] = ts.t_star;
    return j;
}

inline nlohmann::json json_of_bundle(const TheoryBundle& b) {
    nlohmann::json j;
    j["j_star"] = b.j_star;
    j["omega"] = b.omega;
    j["omega_prime"] = b.omega_prime;
    j["lambda"] = b.lambda;
    j["delta_j"] = b.delta_j;
    j["u"] = b.u;
    j["vbb"] = b.vbb;
    j["nu"] = b.nu;
    j["plateau"] = b.plateau;
    j["timescales"] = json_of_timescales(b.times);
    j["resonances"] = nlohmann::json::array();
    for (const Resonance& r : b.resonances)
        j["resonances"].push_back({{"k", r.k},
                                   {"p", r.p},
                                   {"time", r.time},
                                   {"zeta", r.zeta},
                                   {"delta_t", r.delta_t}});
    return j;
}

inline nlohmann::json json_of_config(const ExperimentConfig& c) {
    nlohmann::json j;
    const char* modes[] = {"quantum", "classical", "theory", "correlation", "sweep"};
    j["mode"] = modes[static_cast<int>(c.mode)];
    j["S"] = c.S;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["gamma"] = c.gamma;
    j["j_ref"] = c.j_ref;
    if (c.delta) j["delta"] = *c.delta;
    if (c.delta_times_S) j["delta_times_S"] = *c.delta_times_S;
    j["state"] = c.state == StateKind::Coherent ? "coherent" : "random";
    j["theta_star"] = c.theta_star;
    j["phi_star"] = c.phi_star;
    j["seed"] = c.seed;
    j["members"] = c.members;
    j["t_max"] = c.t_max;
    j["stride"] = c.stride;
    j["label"] = c.label;
    j["force"] = c.force;
    j["keep_members"] = c.keep_members;
    j["eigen_kick"] = c.eigen_kick;
    j["overlay"] = c.overlay;
    j["cl_members"] = c.cl_members;
    j["cl_t_max"] = c.cl_t_max;
    j["cl_stride"] = c.cl_stride;
    if (!c.sweep_axis.empty()) {
        j["sweep_axis"] = c.sweep_axis;
        j["sweep_values"] = c.sweep_values;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Estimators and fits shared by runs, sweeps and the acceptance gate
// ---------------------------------------------------------------------------

struct PlateauEstimate {
    bool valid = false;
    double value = 0;
    double window_lo = 0, window_hi = 0;
    long n_points = 0;
    std::string note;
};

// Median fidelity over the freeze window, skipping everything within
// 3 Delta_t of a predicted recurrence (they are genuine spikes, not noise).
// Window: [2 t1, 0.1 t_coh] when the decay scale leaves room above the onset,
// else [2 t1, 0.8 t2]; a window that still collapses marks the estimate
// invalid rather than guessing.
inline PlateauEstimate plateau_estimate(const std::vector<long>& times,
                                        const Eigen::VectorXd& F, const Timescales& ts,
                                        const std::vector<Resonance>& resonances) {
    PlateauEstimate pe;
    pe.window_lo = ts.t1 ? 2.0 * *ts.t1 : 0.0;
    pe.window_hi = (0.1 * ts.t_coh > pe.window_lo) ? 0.1 * ts.t_coh : 0.8 * ts.t2;
    if (pe.window_hi <= pe.window_lo) {
        pe.note = "window collapsed (t2 <= 2 t1)";
        return pe;
    }
    std::vector<double> vals;
    for (size_t i = 0; i < times.size(); ++i) {
        const double t = static_cast<double>(times[i]);
        if (t < pe.window_lo || t > pe.window_hi) continue;
        bool masked = false;
        for (const Resonance& r : resonances)
            if (std::abs(t - r.time) <= 3.0 * r.delta_t) {
                masked = true;
                break;
            }
        if (!masked) vals.push_back(F[static_cast<Eigen::Index>(i)]);
    }
    if (vals.empty()) {
        pe.note = "no samples left in window";
        return pe;
    }
    pe.valid = true;
    pe.n_points = static_cast<long>(vals.size());
    pe.value = median_of(vals);
    return pe;
}

struct LineFit {
    double slope = 0;
    double intercept = 0;
    long n_points = 0;
    bool valid = false;
};

inline LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                                 const std::vector<double>& w) {
    LineFit f;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (x.size() < 2 || sw <= 0 || std::abs(det) < 1e-300) return f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.n_points = static_cast<long>(x.size());
    f.valid = true;
    return f;
}

struct GaussianFit {
    bool valid = false;
    double t_coh = 0;
    long n_points = 0;
};

// Fit -ln F = (t/t_coh)^2 over the band F in [f_hi, f_lo], F^2-weighted so the
// early (well-resolved) part dominates, masking recurrences like the plateau
// estimator does.
inline GaussianFit fit_gaussian_decay(const std::vector<long>& times, const Eigen::VectorXd& F,
                                      const std::vector<Resonance>& resonances,
                                      double f_hi = 0.8, double f_lo = 0.1) {
    std::vector<double> x, y, w;
    for (size_t i = 0; i < times.size(); ++i) {
        const double Fi = F[static_cast<Eigen::Index>(i)];
        if (Fi > f_hi || Fi < f_lo) continue;
        const double t = static_cast<double>(times[i]);
        bool masked = false;
        for (const Resonance& r : resonances)
            if (std::abs(t - r.time) <= 3.0 * r.delta_t) {
                masked = true;
                break;
            }
        if (masked) continue;
        x.push_back(t * t);
        y.push_back(-std::log(Fi));
        w.push_back(Fi * Fi);
    }
    GaussianFit g;
    const LineFit lf = weighted_line_fit(x, y, w);
    if (!lf.valid || lf.slope <= 0) return g;
    g.valid = true;
    g.t_coh = 1.0 / std::sqrt(lf.slope);
    g.n_points = lf.n_points;
    return g;
}

// Log-log slope of F(t) over [t_lo, t_hi], skipping the recurrence bands
// around multiples of t_r/2 (the power law rides on top of them).
inline LineFit fit_loglog_slope(const std::vector<long>& times, const Eigen::VectorXd& F,
                                double t_lo, double t_hi, double t_r,
                                double exclusion_frac = 0.04) {
    std::vector<double> x, y, w;
    for (size_t i = 0; i < times.size(); ++i) {
        const double t = static_cast<double>(times[i]);
        const double Fi = F[static_cast<Eigen::Index>(i)];
        if (t < t_lo || t > t_hi || Fi <= 0) continue;
        if (t_r > 0) {
            const double half = 0.5 * t_r;
            const double frac = std::abs(t / half - std::round(t / half));
            if (frac * half <= exclusion_frac * t_r) continue;
        }
        x.push_back(std::log(t));
        y.push_back(std::log(Fi));
        w.push_back(1.0);
    }
    return weighted_line_fit(x, y, w);
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

struct RunResult {
    std::vector<std::string> files;
    nlohmann::json summary;
    RunManifest manifest;
};

namespace detail {

inline std::vector<long> time_grid(long t_max, long stride) {
    std::vector<long> times;
    for (long t = 0; t <= t_max; t += stride) times.push_back(t);
    return times;
}

inline void resource_guard(const ExperimentConfig& c) {
    const double dim = 2.0 * c.S + 1.0;
    const double estimate = dim * dim * static_cast<double>(c.t_max);
    if (estimate > 1e13 && !c.force)
        throw ResourceRefusal("estimated cost dim^2 * t_max = " + fmt17(estimate) +
                              " multiply-adds exceeds 1e13; rerun with force=1 "
                              "if this is intentional");
}

inline Eigen::MatrixXcd draw_members(const SpinParameters& sp, const ExperimentConfig& c,
                                     std::vector<std::string>& streams) {
    Eigen::MatrixXcd states(c.members, sp.dim);
    for (long i = 0; i < c.members; ++i) {
        const std::string name = "member:" + std::to_string(i);
        Splitmix64 rng(stream_seed(c.seed, name));
        states.row(i) = random_state(sp, rng).transpose();
        streams.push_back(name);
    }
    return states;
}

} // namespace detail

// Quantum echo run: coherent packet -> single trace; random state -> ensemble
// of `members` traces averaged on the amplitude level and on the F level.
inline RunResult run_quantum(const ExperimentConfig& c) {
    detail::resource_guard(c);
    const auto t0 = std::chrono::steady_clock::now();
    const double delta = c.resolved_delta();
    const SpinParameters sp = SpinParameters::make(c.S);
    const TopParameters top = c.top();
    const AngularMomentumOps ops(sp);
    const UnperturbedPropagator u0(sp, top);
    const KickPropagator kick(ops, delta);
    const KickMethod method = c.eigen_kick ? KickMethod::EigenBasis : KickMethod::Chebyshev;

    RunResult res;
    OutputWriter out(std::filesystem::path(c.resolved_output_dir()));
    std::vector<std::string> streams;

    const double theta_for_bundle =
        c.state == StateKind::Coherent ? c.theta_star : 0.5 * M_PI;
    TheoryBundle bundle = make_theory_bundle(sp, top, delta, theta_for_bundle, c.state,
                                             static_cast<double>(c.t_max));

    PlateauEstimate pe;
    if (c.state == StateKind::Coherent) {
        const CoherentState cs = coherent_state(sp, c.theta_star, c.phi_star);
        const FidelityTrace tr = run_fidelity(cs.amps, u0, kick, c.t_max, c.stride, method);
        res.files.push_back(out.emit(c.label + "_quantum.csv", csv_of_trace(tr)));
        pe = plateau_estimate(tr.times, tr.fidelity, bundle.times, bundle.resonances);
        if (c.overlay) {
            // constant freeze line across the predicted plateau window
            std::string ov = "t, F_theory\n";
            const double lo = bundle.times.t1 ? *bundle.times.t1 : 0.0;
            ov += detail::fmt17(lo) + ", " + detail::fmt17(bundle.plateau) + "\n";
            ov += detail::fmt17(bundle.times.t2) + ", " + detail::fmt17(bundle.plateau) + "\n";
            res.files.push_back(out.emit(c.label + "_overlay.csv", ov));
        }
        res.summary["trace_points"] = tr.times.size();
    } else {
        const Eigen::MatrixXcd states = detail::draw_members(sp, c, streams);
        const EnsembleTrace tr =
            run_fidelity_ensemble(states, u0, kick, c.t_max, c.stride, c.keep_members);
        res.files.push_back(out.emit(c.label + "_ensemble.csv", csv_of_ensemble(tr)));
        if (c.keep_members) {
            for (long m = 0; m < c.members; ++m) {
                FidelityTrace single;
                single.times = tr.times;
                single.amplitude = tr.per_member.row(m).transpose();
                single.fidelity = single.amplitude.cwiseAbs2();
                char nbuf[24];
                std::snprintf(nbuf, sizeof nbuf, "%04ld", m);
                res.files.push_back(out.emit(c.label + "_member_" + nbuf + ".csv",
                                             csv_of_trace(single)));
            }
        }
        pe = plateau_estimate(tr.times, tr.mean_fidelity, bundle.times, bundle.resonances);
        if (c.overlay) {
            // lattice evaluator: the stationary-phase-exact curve on j = m/S
            const Eigen::VectorXd Fth =
                asymptotic_random_lattice(sp, ops, u0, top, delta, tr.times);
            std::string ov = "t, F_theory\n";
            for (size_t i = 0; i < tr.times.size(); ++i)
                ov += std::to_string(tr.times[i]) + ", " +
                      detail::fmt17(Fth[static_cast<Eigen::Index>(i)]) + "\n";
            res.files.push_back(out.emit(c.label + "_overlay.csv", ov));
        }
        res.summary["trace_points"] = tr.times.size();
        res.summary["members"] = c.members;
    }

    res.files.push_back(
        out.emit(c.label + "_theory.json", json_of_bundle(bundle).dump(2) + "\n"));
    res.summary["plateau_measured"] = pe.valid ? nlohmann::json(pe.value) : nullptr;
    res.summary["plateau_note"] = pe.note;
    res.summary["plateau_theory"] = bundle.plateau;
    res.summary["timescales"] = json_of_timescales(bundle.times);

    const auto t1 = std::chrono::steady_clock::now();
    res.manifest.config_echo = json_of_config(c);
    res.manifest.rng_streams = streams;
    res.manifest.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.manifest.checksums = out.checksums();
    nlohmann::json mj;
    mj["config"] = res.manifest.config_echo;
    mj["code_version"] = res.manifest.code_version;
    mj["rng_streams"] = res.manifest.rng_streams;
    mj["wall_seconds"] = res.manifest.wall_seconds;
    mj["checksums"] = res.manifest.checksums;
    res.files.push_back(out.emit(c.label + "_manifest.json", mj.dump(2) + "\n"));
    return res;
}

// Classical echo run: Monte-Carlo fidelity of the matching Gaussian ensemble.
inline RunResult run_classical(const ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const double delta = c.resolved_delta();
    RunResult res;
    OutputWriter out(std::filesystem::path(c.resolved_output_dir()));
    const std::string stream = "classical";
    const ClassicalEnsemble ens = sample_coherent(c.S, c.theta_star, c.phi_star,
                                                  c.cl_members, stream_seed(c.seed, stream));
    const ClassicalTrace tr = classical_fidelity_trace(
        ens, c.alpha, c.beta, delta, detail::time_grid(c.cl_t_max, c.cl_stride));
    res.files.push_back(out.emit(c.label + "_classical.csv", csv_of_classical(tr)));
    res.summary["cl_members"] = c.cl_members;
    res.summary["final_F"] = tr.fidelity.back();

    const auto t1 = std::chrono::steady_clock::now();
    res.manifest.config_echo = json_of_config(c);
    res.manifest.rng_streams = {stream};
    res.manifest.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.manifest.checksums = out.checksums();
    nlohmann::json mj;
    mj["config"] = res.manifest.config_echo;
    mj["code_version"] = res.manifest.code_version;
    mj["rng_streams"] = res.manifest.rng_streams;
    mj["wall_seconds"] = res.manifest.wall_seconds;
    mj["checksums"] = res.manifest.checksums;
    res.files.push_back(out.emit(c.label + "_manifest.json", mj.dump(2) + "\n"));
    return res;
}

// Theory-only run: evaluate the semiclassical bundle, no evolution.
inline RunResult run_theory(const ExperimentConfig& c) {
    const double delta = c.resolved_delta();
    const SpinParameters sp = SpinParameters::make(c.S);
    const double theta_for_bundle =
        c.state == StateKind::Coherent ? c.theta_star : 0.5 * M_PI;
    const TheoryBundle bundle = make_theory_bundle(sp, c.top(), delta, theta_for_bundle,
                                                   c.state, static_cast<double>(c.t_max));
    RunResult res;
    OutputWriter out(std::filesystem::path(c.resolved_output_dir()));
    res.files.push_back(
        out.emit(c.label + "_theory.json", json_of_bundle(bundle).dump(2) + "\n"));
    res.summary = json_of_bundle(bundle);
    res.manifest.config_echo = json_of_config(c);
    res.manifest.checksums = out.checksums();
    nlohmann::json mj;
    mj["config"] = res.manifest.config_echo;
    mj["code_version"] = res.manifest.code_version;
    mj["rng_streams"] = nlohmann::json::array();
    mj["wall_seconds"] = 0.0;
    mj["checksums"] = res.manifest.checksums;
    res.files.push_back(out.emit(c.label + "_manifest.json", mj.dump(2) + "\n"));
    return res;
}

// Two-time correlation surface of the Heisenberg perturbation in the initial
// state, written as a flat (t', t'', re, im) table.
inline RunResult run_correlation(const ExperimentConfig& c) {
    detail::resource_guard(c);
    const SpinParameters sp = SpinParameters::make(c.S);
    const AngularMomentumOps ops(sp);
    const UnperturbedPropagator u0(sp, c.top());
    Eigen::VectorXcd psi;
    std::vector<std::string> streams;
    if (c.state == StateKind::Coherent) {
        psi = coherent_state(sp, c.theta_star, c.phi_star).amps;
    } else {
        const std::string name = "member:0";
        Splitmix64 rng(stream_seed(c.seed, name));
        psi = random_state(sp, rng);
        streams.push_back(name);
    }
    const Eigen::MatrixXcd C = correlation_grid(ops, u0, psi, c.t_max);
    std::string csv = "t1, t2, re_C, im_C\n";
    for (long a = 0; a <= c.t_max; ++a)
        for (long b = 0; b <= c.t_max; ++b)
            csv += std::to_string(a) + ", " + std::to_string(b) + ", " +
                   detail::fmt17(C(a, b).real()) + ", " + detail::fmt17(C(a, b).imag()) +
                   "\n";
    RunResult res;
    OutputWriter out(std::filesystem::path(c.resolved_output_dir()));
    res.files.push_back(out.emit(c.label + "_correlation.csv", csv));
    res.summary["grid"] = c.t_max + 1;
    res.manifest.config_echo = json_of_config(c);
    res.manifest.rng_streams = streams;
    res.manifest.checksums = out.checksums();
    nlohmann::json mj;
    mj["config"] = res.manifest.config_echo;
    mj["code_version"] = res.manifest.code_version;
    mj["rng_streams"] = res.manifest.rng_streams;
    mj["wall_seconds"] = 0.0;
    mj["checksums"] = res.manifest.checksums;
    res.files.push_back(out.emit(c.label + "_manifest.json", mj.dump(2) + "\n"));
    return res;
}

inline const char* sweep_header() {
    return "value, flagged, plateau, plateau_points, t1, t2, t_coh_theory, t_coh_fit, "
           "t_r, resonances\n";
}

// One quantum run per axis value; each row reports the plateau estimate, the
// fitted Gaussian decay constant and the predicted recurrence times. Rows
// whose freeze window collapses (t2 <= 2 t1) are flagged and not fitted.
inline RunResult run_sweep(const ExperimentConfig& c) {
    if (c.sweep_axis.empty() || c.sweep_values.empty())
        throw ConfigError("sweep mode needs sweep_axis and sweep_values");
    std::string table = sweep_header();
    for (double v : c.sweep_values) {
        ExperimentConfig pt = c;
        pt.mode = RunMode::Quantum;
        if (c.sweep_axis == "delta") {
            // interpret values in the same unit the base config used
            if (c.delta_times_S) pt.delta_times_S = v;
            else pt.delta = v;
        } else if (c.sweep_axis == "S") {
            pt.S = static_cast<int>(v);
        } else {
            pt.seed = static_cast<uint64_t>(v);
        }
        detail::resource_guard(pt);
        const double delta = pt.resolved_delta();
        const SpinParameters sp = SpinParameters::make(pt.S);
        const TopParameters top = pt.top();
        const AngularMomentumOps ops(sp);
        const UnperturbedPropagator u0(sp, top);
        const KickPropagator kick(ops, delta);

        const double theta_for_bundle =
            pt.state == StateKind::Coherent ? pt.theta_star : 0.5 * M_PI;
        const TheoryBundle bundle = make_theory_bundle(sp, top, delta, theta_for_bundle,
                                                       pt.state,
                                                       static_cast<double>(pt.t_max));
        std::vector<long> times;
        Eigen::VectorXd F;
        if (pt.state == StateKind::Coherent) {
            const CoherentState cs = coherent_state(sp, pt.theta_star, pt.phi_star);
            const FidelityTrace tr = run_fidelity(cs.amps, u0, kick, pt.t_max, pt.stride);
            times = tr.times;
            F = tr.fidelity;
        } else {
            std::vector<std::string> streams;
            const Eigen::MatrixXcd states = detail::draw_members(sp, pt, streams);
            const EnsembleTrace tr =
                run_fidelity_ensemble(states, u0, kick, pt.t_max, pt.stride);
            times = tr.times;
            F = tr.mean_fidelity;
        }

        const bool collapsed = bundle.times.t2 <= (bundle.times.t1 ? 2.0 * *bundle.times.t1
                                                                   : 0.0);
        std::string row = detail::fmt17(v) + ", " + (collapsed ? "1" : "0") + ", ";
        if (collapsed) {
            row += "nan, 0, ";
        } else {
            const PlateauEstimate pe =
                plateau_estimate(times, F, bundle.times, bundle.resonances);
            row += (pe.valid ? detail::fmt17(pe.value) : "nan") + std::string(", ") +
                   std::to_string(pe.n_points) + ", ";
        }
        row += (bundle.times.t1 ? detail::fmt17(*bundle.times.t1) : "nan") +
               std::string(", ") + detail::fmt17(bundle.times.t2) + ", " +
               detail::fmt17(bundle.times.t_coh) + ", ";
        if (collapsed) {
            row += "nan, ";
        } else {
            const GaussianFit gf = fit_gaussian_decay(times, F, bundle.resonances);
            row += (gf.valid ? detail::fmt17(gf.t_coh) : "nan") + std::string(", ");
        }
        row += detail::fmt17(bundle.times.t_r) + ", ";
        std::string rl;
        for (const Resonance& r : bundle.resonances) {
            if (!rl.empty()) rl += ";";
            rl += detail::fmt17(r.time);
        }
        table += row + rl + "\n";
    }
    RunResult res;
    OutputWriter out(std::filesystem::path(c.resolved_output_dir()));
    res.files.push_back(out.emit(c.label + "_sweep.csv", table));
    res.summary["rows"] = c.sweep_values.size();
    res.manifest.config_echo = json_of_config(c);
    res.manifest.checksums = out.checksums();
    nlohmann::json mj;
    mj["config"] = res.manifest.config_echo;
    mj["code_version"] = res.manifest.code_version;
    mj["rng_streams"] = nlohmann::json::array();
    mj["wall_seconds"] = 0.0;
    mj["checksums"] = res.manifest.checksums;
    res.files.push_back(out.emit(c.label + "_manifest.json", mj.dump(2) + "\n"));
    return res;
}

inline RunResult run_experiment(const ExperimentConfig& c) {
    switch (c.mode) {
        case RunMode::Quantum: return run_quantum(c);
        case RunMode::Classical: return run_classical(c);
        case RunMode::Theory: return run_theory(c);
        case RunMode::Correlation: return run_correlation(c);
        case RunMode::Sweep: return run_sweep(c);
    }
    throw ConfigError("unhandled mode");
}

} // namespace echotop
