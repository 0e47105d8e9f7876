#pragma once

#include <optional>
#include <sstream>

#include "convpinn/problems.hpp"

namespace convpinn::weighting {

/// Per-term mean-squared losses and the node counts behind them.  pde has
/// one entry per governing equation (1 for a scalar PDE, 4 for the swirl
/// system); absent terms are 0 with count 0.
struct LossBreakdown {
    std::vector<double> pde;
    double bc = 0.0, ic = 0.0, data = 0.0;
    long n_interior = 0, n_boundary = 0, n_initial = 0, n_data = 0;
};

enum class Scheme { manual, dynamic, dimensional };

inline std::string scheme_name(Scheme s) {
    switch (s) {
    case Scheme::manual: return "manual";
    case Scheme::dynamic: return "dynamic";
    default: return "dimensional";
    }
}

struct LossWeights {
    Scheme scheme = Scheme::manual;
    std::vector<double> pde{1.0}; // one per governing equation
    double bc = 1.0, ic = 1.0, data = 1.0;

    void validate() const {
        auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (pde.empty()) throw InvalidInput("weights need a PDE entry");
        for (double v : pde)
            if (!ok(v)) throw InvalidInput("loss weights must be positive and finite");
        if (!ok(bc) || !ok(ic) || !ok(data))
            throw InvalidInput("loss weights must be positive and finite");
    }
};

/// Which terms a problem actually has (derived from its masks).
struct ActiveTerms {
    bool bc = true, ic = false, data = false;
    int count() const { return 1 + int(bc) + int(ic) + int(data); }
};

inline ActiveTerms active_terms(const problems::LossMasks& m) {
    ActiveTerms a;
    a.bc = m.n_boundary() > 0;
    a.ic = false; // steady problems only
    a.data = m.n_data() > 0;
    return a;
}

// ---------------------------------------------------------------------------
// Loss terms
// ---------------------------------------------------------------------------

namespace detail {
inline double mse(const std::vector<double>& v, const std::vector<std::size_t>& idx,
                  std::size_t offset, const std::vector<double>* target) {
    double s = 0.0, comp = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        double d = v[offset + idx[k]];
        if (target) d -= (*target)[k];
        const double term = d * d - comp;
        const double next = s + term;
        comp = (next - s) - term;
        s = next;
    }
    return idx.empty() ? 0.0 : s / double(idx.size());
}
} // namespace detail

/// Assemble the loss breakdown from a prediction, its residual field and
/// the node masks.  For problems with an axis-derivative condition,
/// `du_dr` must carry d(pred channel 0)/dr so its r = 0 row can join the
/// boundary term.
inline LossBreakdown loss_terms(const Field& pred, const Field& residuals,
                                const problems::LossMasks& m,
                                const Field* du_dr = nullptr) {
    if (!pred.grid.same_layout(residuals.grid))
        throw InvalidInput("prediction and residual grids differ");
    const std::size_t plane = std::size_t(pred.grid.nh) * pred.grid.nw;

    LossBreakdown b;
    b.n_interior = m.n_interior();
    b.n_boundary = m.n_boundary();
    b.n_data = m.n_data();
    for (int e = 0; e < residuals.channels; ++e)
        b.pde.push_back(detail::mse(residuals.data, m.interior, e * plane, nullptr));

    double bc_sse = 0.0;
    for (std::size_t k = 0; k < m.bc_idx.size(); ++k) {
        const double d = pred.data[m.bc_idx[k]] - m.bc_target[k];
        bc_sse += d * d;
    }
    if (m.axis_neumann_u) {
        if (!du_dr)
            throw InvalidInput("axis condition needs the radial derivative");
        if (!du_dr->grid.same_layout(pred.grid))
            throw InvalidInput("du_dr grid mismatch");
        for (int j = 0; j < pred.grid.nw; ++j) {
            const double d = du_dr->at(0, 0, j);
            bc_sse += d * d;
        }
    }
    b.bc = b.n_boundary > 0 ? bc_sse / double(b.n_boundary) : 0.0;
    b.data = detail::mse(pred.data, m.data_idx, 0, &m.data_target);
    return b;
}

/// Eq-13 weighted sum.
inline double total_loss(const LossBreakdown& b, const LossWeights& w) {
    if (w.pde.size() != b.pde.size())
        throw InvalidInput("per-equation weight count mismatch");
    w.validate();
    double s = 0.0;
    for (std::size_t e = 0; e < b.pde.size(); ++e) s += w.pde[e] * b.pde[e];
    return s + w.bc * b.bc + w.ic * b.ic + w.data * b.data;
}

// ---------------------------------------------------------------------------
// Weight schemes
// ---------------------------------------------------------------------------

/// Manual weights: one value per active term class, in the fixed order
/// pde, bc, ic, data.  A value aimed at an absent term is a config error.
inline LossWeights manual_weights(const std::vector<double>& values,
                                  const ActiveTerms& active,
                                  int pde_equations = 1) {
    if (int(values.size()) != active.count())
        throw ConfigError("manual weights: expected " +
                          std::to_string(active.count()) +
                          " values (one per active term), got " +
                          std::to_string(values.size()));
    LossWeights w;
    w.scheme = Scheme::manual;
    std::size_t at = 0;
    w.pde.assign(std::size_t(pde_equations), values[at++]);
    if (active.bc) w.bc = values[at++];
    if (active.ic) w.ic = values[at++];
    if (active.data) w.data = values[at++];
    w.validate();
    return w;
}

/// Gradient norms per term class; a disengaged optional marks a term the
/// problem does not have (no update, no warning).
struct GradNorms {
    double pde = 0.0;
    std::optional<double> bc, ic, data;
};

/// Eq 14-15: lambda_hat_T = |grad L_pde| / |grad L_T|, blended with the
/// previous weights at rate alpha; lambda_pde stays 1.  A zero norm skips
/// that term's update and records a warning.
inline LossWeights dynamic_weight_update(const GradNorms& n,
                                         const LossWeights& prev, double alpha,
                                         std::vector<std::string>* warnings = nullptr) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw InvalidInput("alpha must lie in (0, 1]");
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    LossWeights w = prev;
    w.scheme = Scheme::dynamic;
    std::fill(w.pde.begin(), w.pde.end(), 1.0);
    if (!(n.pde > 0.0)) {
        warn("dynamic weights: PDE gradient norm is zero; keeping previous weights");
        return w;
    }
    auto update = [&](const std::optional<double>& norm, double prev_v,
                      const char* name) {
        if (!norm) return prev_v;
        if (!(*norm > 0.0)) {
            warn(std::string("dynamic weights: zero gradient norm for ") + name +
                 "; keeping its previous weight");
            return prev_v;
        }
        return alpha * (n.pde / *norm) + (1.0 - alpha) * prev_v;
    };
    w.bc = update(n.bc, prev.bc, "bc");
    w.ic = update(n.ic, prev.ic, "ic");
    w.data = update(n.data, prev.data, "data");
    w.validate();
    return w;
}

namespace detail {
/// scale^(-exponent), exact (iterated multiplication) for integer
/// exponents so that scale covariance holds bitwise.
inline double inv_power(double scale, double exponent) {
    if (exponent == std::floor(exponent) && std::abs(exponent) <= 64) {
        double p = 1.0;
        for (int k = 0; k < int(std::abs(exponent)); ++k) p *= scale;
        return exponent >= 0 ? 1.0 / p : p;
    }
    return std::pow(scale, -exponent);
}
} // namespace detail

/// Eq 19: lambda_T = prod_v scale_v^(-exponent_T_v), computed once before
/// training.  `term_exponents` has one row per term in the order pde, bc,
/// ic, data; each row has one exponent per scale.
inline LossWeights
dimensional_balance_weights(const std::vector<double>& scales,
                            const std::vector<std::vector<double>>& term_exponents,
                            int pde_equations = 1) {
    if (term_exponents.size() != 4)
        throw InvalidInput("need exponent rows for pde, bc, ic, data");
    for (double s : scales)
        if (!(s > 0.0) || !std::isfinite(s))
            throw InvalidInput("characteristic scales must be positive");
    for (const auto& row : term_exponents)
        if (row.size() != scales.size())
            throw InvalidInput("exponent row length must match scale count");
    auto weight = [&](const std::vector<double>& row) {
        double w = 1.0;
        for (std::size_t v = 0; v < scales.size(); ++v)
            w *= detail::inv_power(scales[v], row[v]);
        return w;
    };
    LossWeights w;
    w.scheme = Scheme::dimensional;
    w.pde.assign(std::size_t(pde_equations), weight(term_exponents[0]));
    w.bc = weight(term_exponents[1]);
    w.ic = weight(term_exponents[2]);
    w.data = weight(term_exponents[3]);
    w.validate();
    return w;
}

// ---------------------------------------------------------------------------
// Scheme configuration parsing
// ---------------------------------------------------------------------------

struct WeightSchemeConfig {
    Scheme scheme = Scheme::manual;
    std::vector<double> manual_values; // manual
    double alpha = 0.1;                // dynamic
    int cadence = 10;                  // dynamic: epochs between updates
    std::vector<double> scales;        // dimensional
};

namespace detail {
inline std::vector<double> parse_number_list(const std::string& s,
                                             const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad number in ") + what + ": '" +
                              tok + "'");
        }
    }
    if (out.empty())
        throw ConfigError(std::string(what) + " needs at least one value");
    return out;
}
} // namespace detail

/// Parse `manual:<w1,...>` | `dynamic:<alpha>,<cadence>` |
/// `dimensional:<scale1,...>`.
inline WeightSchemeConfig parse_weight_scheme(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string rest =
        colon == std::string::npos ? std::string() : text.substr(colon + 1);
    WeightSchemeConfig cfg;
    if (head == "manual") {
        cfg.scheme = Scheme::manual;
        cfg.manual_values = detail::parse_number_list(rest, "manual weights");
        for (double v : cfg.manual_values)
            if (!(v > 0.0) || !std::isfinite(v))
                throw ConfigError("manual weights must be positive");
        return cfg;
    }
    if (head == "dynamic") {
        cfg.scheme = Scheme::dynamic;
        if (!rest.empty()) {
            const auto vals = detail::parse_number_list(rest, "dynamic params");
            if (vals.size() > 2)
                throw ConfigError("dynamic takes <alpha>[,<cadence>]");
            cfg.alpha = vals[0];
            if (vals.size() == 2) {
                cfg.cadence = int(vals[1]);
                if (cfg.cadence < 1 || double(cfg.cadence) != vals[1])
                    throw ConfigError("dynamic cadence must be a positive integer");
            }
        }
        if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0)
            throw ConfigError("dynamic alpha must lie in (0, 1]");
        return cfg;
    }
    if (head == "dimensional") {
        cfg.scheme = Scheme::dimensional;
        if (!rest.empty())
            cfg.scales = detail::parse_number_list(rest, "dimensional scales");
        for (double s : cfg.scales)
            if (!(s > 0.0) || !std::isfinite(s))
                throw ConfigError("dimensional scales must be positive");
        return cfg;
    }
    throw ConfigError("unknown weight scheme: '" + text + "'");
}

inline std::string format_weight_scheme(const WeightSchemeConfig& cfg) {
    auto join = [](const std::vector<double>& v) {
        std::string s;
        char buf[32];
        for (std::size_t k = 0; k < v.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", v[k]);
            if (k) s += ',';
            s += buf;
        }
        return s;
    };
    char buf[64];
    switch (cfg.scheme) {
    case Scheme::manual: return "manual:" + join(cfg.manual_values);
    case Scheme::dynamic:
        std::snprintf(buf, sizeof buf, "dynamic:%.17g,%d", cfg.alpha,
                      cfg.cadence);
        return buf;
    default:
        if (cfg.scales.empty()) return "dimensional:";
        return "dimensional:" + join(cfg.scales);
    }
}

} // namespace convpinn::weighting
