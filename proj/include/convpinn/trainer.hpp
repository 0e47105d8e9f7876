#pragma once

#include <chrono>
#include <iomanip>
#include <limits>
#include <optional>

#include "convpinn/model.hpp"
#include "convpinn/optim.hpp"
#include "convpinn/weighting.hpp"

namespace convpinn::trainer {

struct TrainConfig {
    int epochs_adam = 0;
    double lr = 1e-4;
    int epochs_lbfgs = 0;
    int lbfgs_inner = 20; // quasi-Newton iterations per L-BFGS epoch
    int lbfgs_history = 20;
    weighting::WeightSchemeConfig scheme; // manual / dynamic / dimensional
    int acc_order = 8;
    unsigned long seed = 0;
    int eval_cadence = 100;
    double divergence_threshold = 1e12;

    void validate() const {
        if (epochs_adam < 0 || epochs_lbfgs < 0)
            throw InvalidInput("epoch counts must be >= 0");
        if (!(lr > 0.0) || !std::isfinite(lr))
            throw InvalidInput("learning rate must be positive");
        if (lbfgs_history < 1) throw InvalidInput("history must be >= 1");
        if (lbfgs_inner < 1)
            throw InvalidInput("L-BFGS inner iteration count must be >= 1");
        if (acc_order != 2 && acc_order != 4 && acc_order != 6 && acc_order != 8)
            throw InvalidInput("accuracy order must be one of 2, 4, 6, 8");
        if (eval_cadence < 1) throw InvalidInput("eval cadence must be >= 1");
        if (!(divergence_threshold > 0.0))
            throw InvalidInput("divergence threshold must be positive");
    }
};

/// One report row.  Adam rows hold the loss at the epoch's start (the value
/// the step was taken from); L-BFGS rows close one epoch of `lbfgs_inner`
/// accepted steps and hold the loss after its last one.  `eps` is only
/// meaningful when `has_eps` is set.
struct EpochRecord {
    int epoch = 0;
    char phase = 'i'; // 'i' initial, 'a' adam, 'l' lbfgs
    double total = 0.0;
    std::vector<double> pde; // per equation
    double bc = 0.0, ic = 0.0, data = 0.0;
    double w_pde = 1.0, w_bc = 1.0, w_ic = 1.0, w_data = 1.0;
    bool has_eps = false;
    double eps = 0.0;
    int backwards = 0;
    double wall_ms = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> records;
    weighting::LossWeights weights_final;
    std::vector<std::string> branch_names;
    std::vector<double> branch_correlations;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    bool has_eps = false;
    double eps_final = 0.0;
    std::vector<double> eps_final_channel;
    double wall_adam_ms = 0.0, wall_lbfgs_ms = 0.0;
    long backwards_total = 0;
    int epochs_adam_run = 0, epochs_lbfgs_run = 0;
    bool diverged = false;
    bool lbfgs_aborted_nan = false;
    bool lbfgs_line_search_failed = false;
    std::vector<std::string> warnings;
};

using PhaseHook = std::function<void(const std::string&, const ad::ParamStore&)>;

namespace detail {

/// Per-term dimension exponents (rows pde, bc, ic, data) for the
/// dimensional-balance scheme.  The swirl system uses scales (U, L): the
/// momentum residual carries dimension U^2/L, so its squared loss carries
/// (4, -2); boundary and data mismatches carry velocity dimension (2, 0).
/// Linear benchmarks are dimensionless here: all exponents zero.
inline std::vector<std::vector<double>>
dimensional_exponents(const problems::ProblemInstance& pr, std::size_t n_scales) {
    std::vector<std::vector<double>> rows(4, std::vector<double>(n_scales, 0.0));
    if (pr.kind == problems::ProblemInstance::Kind::ns && n_scales >= 2) {
        rows[0][0] = 4.0;
        rows[0][1] = -2.0;
        rows[1][0] = 2.0;
        rows[3][0] = 2.0;
    }
    return rows;
}

struct GraphLosses {
    ad::Var pred;
    std::vector<ad::Var> pde_eq;
    ad::Var bc;
    std::optional<ad::Var> data;
    ad::Var total;

    weighting::LossBreakdown breakdown(const ad::Tape& t,
                                       const problems::LossMasks& m) const {
        weighting::LossBreakdown b;
        for (auto v : pde_eq) b.pde.push_back(t.scalar(v));
        b.bc = t.scalar(bc);
        if (data) b.data = t.scalar(*data);
        b.n_interior = m.n_interior();
        b.n_boundary = m.n_boundary();
        b.n_data = m.n_data();
        return b;
    }
};

} // namespace detail

/// Starting weights for each scheme; dynamic ones start flat and are
/// re-estimated from gradient norms as training proceeds.
inline weighting::LossWeights initial_weights(
    const weighting::WeightSchemeConfig& scheme,
    const problems::ProblemInstance& pr, const problems::LossMasks& masks,
    int n_eq) {
    weighting::LossWeights weights;
    switch (scheme.scheme) {
    case weighting::Scheme::manual:
        return weighting::manual_weights(scheme.manual_values,
                                         weighting::active_terms(masks), n_eq);
    case weighting::Scheme::dynamic:
        weights.scheme = weighting::Scheme::dynamic;
        weights.pde.assign(std::size_t(n_eq), 1.0);
        return weights;
    default:
        return weighting::dimensional_balance_weights(
            scheme.scales,
            detail::dimensional_exponents(pr, scheme.scales.size()), n_eq);
    }
}

/// The weighted physics-informed objective for one (problem, grid, model)
/// triple.  Everything tape-independent is computed once; `build` replays
/// the graph on a fresh tape per evaluation.  `weights` is owned here so
/// that schemes updated mid-training are picked up by the next build.
struct LossGraph {
    const problems::ProblemInstance* pr;
    Grid2D g;
    model::MRFModel* net;
    int acc_order;
    stencil::PaddingSpec spec;
    problems::LossMasks masks;
    Field input;
    std::optional<Field> forcing;
    std::vector<std::size_t> axis_idx;
    int n_eq;
    weighting::LossWeights weights;

    LossGraph(const problems::ProblemInstance& p, const Grid2D& grid,
              model::MRFModel& model, int acc, const Field* data = nullptr)
        : pr(&p), g(grid), net(&model), acc_order(acc),
          spec(stencil::PaddingSpec::for_accuracy(acc)),
          masks(problems::build_masks(p, grid, data)),
          input(problems::make_input_field(p, grid)),
          n_eq(p.channels() == 1 ? 1 : 4) {
        if (input.channels != net->in_channels())
            throw InvalidInput("model input channels do not match the problem");
        if (p.is_mms()) forcing = problems::manufactured_forcing(p, grid);
        if (masks.axis_neumann_u)
            for (int j = 0; j < g.nw; ++j) axis_idx.push_back(std::size_t(j));
    }

    detail::GraphLosses build(ad::Tape& t,
                              std::vector<ad::Var>* branch_outputs =
                                  nullptr) const {
        detail::GraphLosses L;
        ad::Var in = t.constant_field(input);
        L.pred = net->forward(t, in, branch_outputs);
        // Each equation's residual is a single-channel node, so the interior
        // plane indices address it directly.
        std::vector<ad::Var> eq_res;
        if (pr->kind == problems::ProblemInstance::Kind::linear) {
            eq_res.push_back(problems::linear_residual_graph(
                t, L.pred, pr->lin, g, acc_order, spec,
                forcing ? &*forcing : nullptr));
        } else {
            auto eqs = problems::ns_residuals_graph(t, L.pred, pr->ns, g,
                                                    acc_order, spec,
                                                    forcing ? &*forcing : nullptr);
            eq_res.assign(eqs.begin(), eqs.end());
        }
        const double inv_ni = 1.0 / double(masks.n_interior());
        for (ad::Var r : eq_res)
            L.pde_eq.push_back(t.scale(
                t.masked_sse(r, masks.interior,
                             std::vector<double>(masks.interior.size(), 0.0)),
                inv_ni));
        ad::Var bc_sse = t.masked_sse(L.pred, masks.bc_idx, masks.bc_target);
        if (masks.axis_neumann_u) {
            ad::Var u0 = t.slice_channel(L.pred, 0);
            ad::Var dudr = ad::derivative_graph(t, u0, 1, 1, acc_order, spec,
                                                g.d1);
            bc_sse = t.add(bc_sse,
                           t.masked_sse(dudr, axis_idx,
                                        std::vector<double>(axis_idx.size(), 0.0)));
        }
        L.bc = t.scale(bc_sse, 1.0 / double(masks.n_boundary()));
        if (masks.n_data() > 0)
            L.data = t.scale(t.masked_sse(L.pred, masks.data_idx, masks.data_target),
                             1.0 / double(masks.n_data()));

        std::vector<ad::Var> terms = L.pde_eq;
        std::vector<double> tw(weights.pde.begin(), weights.pde.end());
        terms.push_back(L.bc);
        tw.push_back(weights.bc);
        if (L.data) {
            terms.push_back(*L.data);
            tw.push_back(weights.data);
        }
        L.total = t.weighted_sum(terms, tw);
        return L;
    }
};

/// Full-batch training: input-field construction, weight estimation, Adam
/// epochs, then L-BFGS fine-tuning on the frozen weighted objective.
/// `reference` enables the relative-L2 error column; `data` supplies
/// measured-field supervision (manufactured problems default to their
/// analytic targets).
inline TrainReport train(const problems::ProblemInstance& pr, const Grid2D& g,
                         ad::ParamStore& store, model::MRFModel& net,
                         const TrainConfig& cfg, const Field* reference = nullptr,
                         const Field* data = nullptr,
                         const PhaseHook& phase_hook = nullptr) {
    using clock = std::chrono::steady_clock;
    cfg.validate();
    if (reference && (!reference->grid.same_layout(g) ||
                      reference->channels != pr.channels()))
        throw InvalidInput("reference field shape mismatch");

    LossGraph lg(pr, g, net, cfg.acc_order, data);
    const auto& masks = lg.masks;
    const int n_eq = lg.n_eq;

    TrainReport rep;

    auto& weights = lg.weights;
    weights = initial_weights(cfg.scheme, pr, masks, n_eq);

    auto build = [&](ad::Tape& t, std::vector<ad::Var>* branch_outputs =
                                      nullptr) { return lg.build(t, branch_outputs); };

    auto grad_l2 = [&](ad::Tape& t, ad::Var root) {
        store.zero_grad();
        t.backward(root);
        double s = 0.0;
        for (double v : store.grads_flat()) s += v * v;
        return std::sqrt(s);
    };

    auto eps_of = [&](const Field& pred) {
        return relative_l2_error(pred, *reference);
    };

    auto record_weights = [&](EpochRecord& r) {
        r.w_pde = weights.pde[0];
        r.w_bc = weights.bc;
        r.w_ic = weights.ic;
        r.w_data = weights.data;
    };

    // --- Initial evaluation (epoch 0, no backward) ---
    int epoch = 0;
    {
        ad::Tape t(&store);
        auto L = build(t);
        auto b = L.breakdown(t, masks);
        EpochRecord r;
        r.epoch = 0;
        r.phase = 'i';
        r.total = t.scalar(L.total);
        r.pde = b.pde;
        r.bc = b.bc;
        r.data = b.data;
        record_weights(r);
        if (reference) {
            r.has_eps = true;
            r.eps = eps_of(t.value_as_field(L.pred, g));
        }
        rep.records.push_back(std::move(r));
        if (!std::isfinite(rep.records.back().total) ||
            rep.records.back().total > cfg.divergence_threshold) {
            rep.diverged = true;
            rep.warnings.push_back("diverged at the initial evaluation");
            rep.final_loss = rep.records.back().total;
            rep.weights_final = weights;
            return rep;
        }
    }

    // --- Adam phase ---
    optim::AdamState adam(std::size_t(store.total_size()));
    std::vector<double> params = store.values_flat();
    const auto adam_start = clock::now();
    for (int e = 1; e <= cfg.epochs_adam; ++e) {
        const auto t0 = clock::now();
        ad::Tape t(&store);
        detail::GraphLosses L;
        try {
            L = build(t);
        } catch (const NumericalError& err) {
            rep.diverged = true;
            rep.warnings.push_back(std::string("diverged at epoch ") +
                                   std::to_string(e) + ": " + err.what());
            break;
        }

        if (cfg.scheme.scheme == weighting::Scheme::dynamic &&
            (e - 1) % cfg.scheme.cadence == 0) {
            // One backward per loss-term class (the +l of the l+1 contract).
            weighting::GradNorms norms;
            ad::Var pde_class = L.pde_eq.size() == 1
                                    ? L.pde_eq[0]
                                    : t.weighted_sum(L.pde_eq,
                                                     std::vector<double>(
                                                         L.pde_eq.size(), 1.0));
            norms.pde = grad_l2(t, pde_class);
            norms.bc = grad_l2(t, L.bc);
            if (L.data) norms.data = grad_l2(t, *L.data);
            weights = weighting::dynamic_weight_update(norms, weights,
                                                       cfg.scheme.alpha,
                                                       &rep.warnings);
            // Rebuild the total with the refreshed weights.
            std::vector<ad::Var> terms = L.pde_eq;
            std::vector<double> tw(weights.pde.begin(), weights.pde.end());
            terms.push_back(L.bc);
            tw.push_back(weights.bc);
            if (L.data) {
                terms.push_back(*L.data);
                tw.push_back(weights.data);
            }
            L.total = t.weighted_sum(terms, tw);
        }

        const double total = t.scalar(L.total);
        if (!std::isfinite(total) || total > cfg.divergence_threshold) {
            rep.diverged = true;
            rep.warnings.push_back("diverged at epoch " + std::to_string(e));
            break;
        }

        store.zero_grad();
        t.backward(L.total);
        params = store.values_flat();
        optim::adam_step(params, store.grads_flat(), adam, cfg.lr);
        store.set_values_flat(params);

        auto b = L.breakdown(t, masks);
        EpochRecord r;
        r.epoch = epoch = e;
        r.phase = 'a';
        r.total = total;
        r.pde = b.pde;
        r.bc = b.bc;
        r.data = b.data;
        record_weights(r);
        r.backwards = int(t.backward_calls());
        if (reference && (e % cfg.eval_cadence == 0 || e == cfg.epochs_adam)) {
            r.has_eps = true;
            r.eps = eps_of(t.value_as_field(L.pred, g));
        }
        r.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0)
                        .count();
        rep.backwards_total += r.backwards;
        rep.records.push_back(std::move(r));
        rep.epochs_adam_run = e;
    }
    rep.wall_adam_ms =
        std::chrono::duration<double, std::milli>(clock::now() - adam_start)
            .count();
    if (phase_hook) phase_hook("adam", store);

    // --- L-BFGS phase (weights frozen) ---
    if (!rep.diverged && cfg.epochs_lbfgs > 0) {
        const auto lbfgs_start = clock::now();
        Field last_pred(g, pr.channels());
        weighting::LossBreakdown last_b;
        long evals = 0;
        auto loss_fn = [&](const std::vector<double>& x,
                           std::vector<double>& grad) -> double {
            store.set_values_flat(x);
            double total;
            try {
                ad::Tape t(&store);
                auto L = build(t);
                total = t.scalar(L.total);
                store.zero_grad();
                t.backward(L.total);
                last_b = L.breakdown(t, masks);
                last_pred = t.value_as_field(L.pred, g);
            } catch (const NumericalError&) {
                return std::numeric_limits<double>::quiet_NaN();
            }
            ++evals;
            grad = store.grads_flat();
            return total;
        };

        auto t_prev = clock::now();
        long evals_prev = 0;
        auto push_row = [&](int outer, double loss, bool phase_end) {
            EpochRecord r;
            r.epoch = epoch = cfg.epochs_adam + outer;
            r.phase = 'l';
            r.total = loss;
            r.pde = last_b.pde;
            r.bc = last_b.bc;
            r.data = last_b.data;
            record_weights(r);
            r.backwards = int(evals - evals_prev);
            evals_prev = evals;
            if (reference && (outer % cfg.eval_cadence == 0 || phase_end)) {
                r.has_eps = true;
                r.eps = eps_of(last_pred);
            }
            const auto now = clock::now();
            r.wall_ms =
                std::chrono::duration<double, std::milli>(now - t_prev).count();
            t_prev = now;
            rep.backwards_total += r.backwards;
            rep.records.push_back(std::move(r));
            rep.epochs_lbfgs_run = outer;
        };
        auto on_step = [&](int it, double loss) {
            if (it % cfg.lbfgs_inner == 0)
                push_row(it / cfg.lbfgs_inner, loss,
                         it == cfg.epochs_lbfgs * cfg.lbfgs_inner);
        };

        params = store.values_flat();
        auto lrep = optim::lbfgs_finetune(params, loss_fn,
                                          cfg.epochs_lbfgs * cfg.lbfgs_inner,
                                          cfg.lbfgs_history, on_step);
        store.set_values_flat(params);
        if (!lrep.aborted_nan && lrep.iterations % cfg.lbfgs_inner != 0) {
            // Early termination mid-epoch: close the partial epoch from the
            // accepted parameters (the last evaluation may be a rejected trial).
            ad::Tape t(&store);
            auto L = build(t);
            last_b = L.breakdown(t, masks);
            last_pred = t.value_as_field(L.pred, g);
            push_row(lrep.iterations / cfg.lbfgs_inner + 1, t.scalar(L.total),
                     true);
        }
        rep.lbfgs_aborted_nan = lrep.aborted_nan;
        rep.lbfgs_line_search_failed = lrep.line_search_failed;
        if (lrep.aborted_nan)
            rep.warnings.push_back(
                "L-BFGS hit a non-finite loss; kept the Adam-phase parameters");
        rep.wall_lbfgs_ms =
            std::chrono::duration<double, std::milli>(clock::now() - lbfgs_start)
                .count();
    }
    if (phase_hook) phase_hook("lbfgs", store);

    if (rep.diverged) { // partial report; the last record tells the story
        rep.final_loss = rep.records.back().total;
        rep.weights_final = weights;
        return rep;
    }

    // --- Final evaluation: loss, error, branch correlations ---
    {
        ad::Tape t(&store);
        std::vector<ad::Var> branch_vars;
        auto L = build(t, &branch_vars);
        rep.final_loss = t.scalar(L.total);
        const Field pred = t.value_as_field(L.pred, g);
        if (reference) {
            rep.has_eps = true;
            rep.eps_final = eps_of(pred);
            for (int c = 0; c < pred.channels; ++c)
                rep.eps_final_channel.push_back(
                    relative_l2_error(pred.channel(c), reference->channel(c)));
        }
        for (std::size_t b = 0; b < branch_vars.size(); ++b) {
            rep.branch_names.push_back(net.branches()[b].name);
            rep.branch_correlations.push_back(
                correlation(t.value_as_field(branch_vars[b], g), pred));
        }
    }
    rep.weights_final = weights;
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

/// CSV, one row per recorded epoch.  Wall time is the last column so that
/// time-independent comparisons can strip it.
inline void write_report_csv(const TrainReport& rep, std::ostream& os) {
    const std::size_t n_eq = rep.records.empty() ? 1 : rep.records[0].pde.size();
    os << "epoch,phase,total";
    for (std::size_t e = 0; e < n_eq; ++e) os << ",pde" << e;
    os << ",bc,ic,data,w_pde,w_bc,w_ic,w_data,eps,backwards,wall_ms\n";
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (const auto& r : rep.records) {
        os << r.epoch << ',' << r.phase << ',';
        num(r.total);
        for (double v : r.pde) {
            os << ',';
            num(v);
        }
        os << ',';
        num(r.bc);
        os << ',';
        num(r.ic);
        os << ',';
        num(r.data);
        os << ',';
        num(r.w_pde);
        os << ',';
        num(r.w_bc);
        os << ',';
        num(r.w_ic);
        os << ',';
        num(r.w_data);
        os << ',';
        if (r.has_eps) num(r.eps);
        os << ',' << r.backwards << ',';
        num(r.wall_ms);
        os << '\n';
    }
}

inline std::string report_summary(const TrainReport& rep) {
    std::ostringstream os;
    os << "epochs_adam=" << rep.epochs_adam_run
       << " epochs_lbfgs=" << rep.epochs_lbfgs_run << '\n';
    os << "final_loss=" << std::setprecision(17) << rep.final_loss << '\n';
    if (rep.has_eps) {
        os << "eps=" << rep.eps_final << '\n';
        for (std::size_t c = 0; c < rep.eps_final_channel.size(); ++c)
            os << "eps_channel" << c << '=' << rep.eps_final_channel[c] << '\n';
    }
    for (std::size_t b = 0; b < rep.branch_correlations.size(); ++b)
        os << "R_" << rep.branch_names[b] << '=' << rep.branch_correlations[b]
           << '\n';
    os << "weights_scheme=" << weighting::scheme_name(rep.weights_final.scheme)
       << '\n';
    os << "w_pde=" << rep.weights_final.pde[0] << " w_bc=" << rep.weights_final.bc
       << " w_data=" << rep.weights_final.data << '\n';
    os << "backwards_total=" << rep.backwards_total << '\n';
    os << "wall_adam_ms=" << rep.wall_adam_ms
       << " wall_lbfgs_ms=" << rep.wall_lbfgs_ms << '\n';
    if (rep.diverged) os << "diverged=true\n";
    if (rep.lbfgs_aborted_nan) os << "lbfgs_aborted_nan=true\n";
    if (rep.lbfgs_line_search_failed) os << "lbfgs_line_search_failed=true\n";
    for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
    return os.str();
}

} // namespace convpinn::trainer
