#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <sstream>

#include "convpinn/trainer.hpp"

namespace convpinn::cliio {

/// One experiment: problem, discretization, model shape, weighting, budget.
/// The [train] section mirrors trainer::TrainConfig; `weights` holds the
/// scheme string and empty means "the problem's default, filled on
/// normalize()".  A parsed config formats back to an identical normalized
/// text form.
struct RunConfig {
    std::string problem = "elliptic";
    int nh = 32, nw = 64;
    int channels = 4;
    int depth = 4;
    int fd = 8;
    std::string mode = "mrf"; // or fixed:<odd rf >= 3>
    std::string weights;
    std::string outdir = "runs/out";
    unsigned long seed = 0;

    int adam = 9000;
    double lr = 1e-4;
    int lbfgs = 500;
    int lbfgs_inner = 20;
    int history = 20;
    int cadence = 100;
    double divergence = 0.0; // 0 = problem default

    bool is_fixed_mode() const { return mode.rfind("fixed:", 0) == 0; }

    int fixed_rf() const {
        std::size_t used = 0;
        int rf = 0;
        try {
            rf = std::stoi(mode.substr(6), &used);
        } catch (const std::exception&) {
            throw ConfigError("bad receptive field in mode '" + mode + "'");
        }
        if (used != mode.size() - 6 || rf < 3 || rf % 2 == 0)
            throw ConfigError("fixed mode needs an odd receptive field >= 3");
        return rf;
    }

    /// Fill the problem-dependent blanks so that formatting is idempotent.
    void normalize() {
        problems::ProblemInstance pr;
        try {
            pr = problems::problem_by_name(problem);
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
        const bool ns = pr.kind == problems::ProblemInstance::Kind::ns;
        if (weights.empty()) {
            // Manufactured swirl problems supervise the analytic velocity as
            // a data term, so they need one more weight than the plain one.
            if (!ns)
                weights = "manual:1,1000";
            else
                weights = pr.ms ? "manual:16384,1,1" : "manual:16384,1";
        }
        weights = weighting::format_weight_scheme(
            weighting::parse_weight_scheme(weights));
        // The swirl grid spacing (~1e-4 m) puts even healthy initial losses
        // far above the linear-benchmark divergence default.
        if (divergence == 0.0) divergence = ns ? 1e30 : 1e12;
    }

    void validate() const {
        if (nh < 3 || nw < 3) throw ConfigError("resolution must be >= 3x3");
        if (channels < 1) throw ConfigError("channels must be >= 1");
        if (depth < 2) throw ConfigError("depth must be >= 2");
        if (mode != "mrf" && !is_fixed_mode())
            throw ConfigError("mode must be 'mrf' or 'fixed:<rf>'");
        if (is_fixed_mode()) fixed_rf();
        if (outdir.empty()) throw ConfigError("outdir must not be empty");
        try {
            problems::problem_by_name(problem);
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
        try {
            trainer::TrainConfig t = train_config();
            if (!weights.empty())
                t.scheme = weighting::parse_weight_scheme(weights);
            t.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError(e.what());
        }
    }

    /// The trainer-facing view ('weights' must be resolved first).
    trainer::TrainConfig train_config() const {
        trainer::TrainConfig t;
        t.epochs_adam = adam;
        t.lr = lr;
        t.epochs_lbfgs = lbfgs;
        t.lbfgs_inner = lbfgs_inner;
        t.lbfgs_history = history;
        t.acc_order = fd;
        t.seed = seed;
        t.eval_cadence = cadence;
        if (divergence > 0.0) t.divergence_threshold = divergence;
        if (!weights.empty())
            t.scheme = weighting::parse_weight_scheme(weights);
        return t;
    }
};

inline void parse_resolution(const std::string& s, int& nh, int& nw) {
    const auto xpos = s.find('x');
    if (xpos == std::string::npos || xpos == 0 || xpos + 1 >= s.size())
        throw ConfigError("resolution must look like <nh>x<nw>, got '" + s +
                          "'");
    std::size_t used = 0;
    try {
        nh = std::stoi(s.substr(0, xpos), &used);
        if (used != xpos) throw std::invalid_argument(s);
        nw = std::stoi(s.substr(xpos + 1), &used);
        if (used != s.size() - xpos - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw ConfigError("resolution must look like <nh>x<nw>, got '" + s +
                          "'");
    }
    if (nh < 1 || nw < 1) throw ConfigError("resolution parts must be positive");
}

namespace detail {

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline long to_long(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long out = 0;
    try {
        out = std::stol(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace detail

/// Apply one `key=value` override; keys are section-free and unique across
/// [run] and [train].  Unknown keys are configuration errors.
inline void apply_key(RunConfig& cfg, const std::string& key,
                      const std::string& value) {
    if (key == "problem")
        cfg.problem = value;
    else if (key == "resolution")
        parse_resolution(value, cfg.nh, cfg.nw);
    else if (key == "channels" || key == "ch")
        cfg.channels = int(detail::to_long(key, value));
    else if (key == "depth")
        cfg.depth = int(detail::to_long(key, value));
    else if (key == "fd")
        cfg.fd = int(detail::to_long(key, value));
    else if (key == "mode")
        cfg.mode = value;
    else if (key == "weights")
        cfg.weights = value;
    else if (key == "outdir" || key == "out")
        cfg.outdir = value;
    else if (key == "seed") {
        const long s = detail::to_long(key, value);
        if (s < 0) throw ConfigError("seed must be >= 0");
        cfg.seed = static_cast<unsigned long>(s);
    } else if (key == "adam")
        cfg.adam = int(detail::to_long(key, value));
    else if (key == "lr")
        cfg.lr = detail::to_double(key, value);
    else if (key == "lbfgs")
        cfg.lbfgs = int(detail::to_long(key, value));
    else if (key == "lbfgs_inner")
        cfg.lbfgs_inner = int(detail::to_long(key, value));
    else if (key == "history")
        cfg.history = int(detail::to_long(key, value));
    else if (key == "cadence")
        cfg.cadence = int(detail::to_long(key, value));
    else if (key == "divergence")
        cfg.divergence = detail::to_double(key, value);
    else
        throw ConfigError("unknown config key '" + key + "'");
}

/// Flat key=value text with [run] and [train] sections; '#' starts a
/// comment.  Duplicate keys are rejected to keep configs diff-friendly.
inline RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line, section;
    std::map<std::string, int> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            if (section != "run" && section != "train")
                throw ConfigError("unknown section [" + section + "] at line " +
                                  std::to_string(lineno));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " +
                              std::to_string(lineno));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("empty key at line " + std::to_string(lineno));
        if (seen[key]++)
            throw ConfigError("duplicate key '" + key + "' at line " +
                              std::to_string(lineno));
        apply_key(cfg, key, value);
    }
    cfg.normalize();
    cfg.validate();
    return cfg;
}

inline RunConfig parse_run_config_text(const std::string& text) {
    std::istringstream is(text);
    return parse_run_config(is);
}

/// Normalized text form: fixed key order, resolved defaults.  Formatting a
/// parsed config and re-parsing it yields the same text.
inline std::string format_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[run]\n";
    os << "problem = " << cfg.problem << '\n';
    os << "resolution = " << cfg.nh << 'x' << cfg.nw << '\n';
    os << "channels = " << cfg.channels << '\n';
    os << "depth = " << cfg.depth << '\n';
    os << "fd = " << cfg.fd << '\n';
    os << "mode = " << cfg.mode << '\n';
    os << "weights = " << cfg.weights << '\n';
    os << "outdir = " << cfg.outdir << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << '\n';
    os << "[train]\n";
    os << "adam = " << cfg.adam << '\n';
    os << "lr = " << detail::fmt_num(cfg.lr) << '\n';
    os << "lbfgs = " << cfg.lbfgs << '\n';
    os << "lbfgs_inner = " << cfg.lbfgs_inner << '\n';
    os << "history = " << cfg.history << '\n';
    os << "cadence = " << cfg.cadence << '\n';
    os << "divergence = " << detail::fmt_num(cfg.divergence) << '\n';
    return os.str();
}

} // namespace convpinn::cliio
