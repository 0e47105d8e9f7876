#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "convpinn/checkpoint.hpp"
#include "convpinn/field_io.hpp"
#include "convpinn/oracle.hpp"
#include "convpinn/runconfig.hpp"

namespace convpinn::cliio {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct RunOutcome {
    int exit_code = kExitOk;
    std::string message;
    bool trained = false;           // report is meaningful
    trainer::TrainReport report;
    long long param_count = 0;
    long long flops_per_forward = 0;
};

namespace detail {

inline model::MRFModel make_model(const RunConfig& cfg,
                                  const problems::ProblemInstance& pr,
                                  const Grid2D& g, ad::ParamStore& store) {
    const int ch = pr.channels();
    if (cfg.is_fixed_mode())
        return model::MRFModel::fixed(store, cfg.fixed_rf(), ch, ch,
                                      cfg.channels, cfg.depth);
    return model::MRFModel(store, ch, ch, cfg.channels, cfg.depth, g.nh, g.nw);
}

inline Field predict(const problems::ProblemInstance& pr, const Grid2D& g,
                     ad::ParamStore& store, model::MRFModel& net) {
    ad::Tape t(&store);
    ad::Var in = t.constant_field(problems::make_input_field(pr, g));
    return t.value_as_field(net.forward(t, in), g);
}

} // namespace detail

/// Execute one configured run and leave its artifacts in cfg.outdir:
/// config.txt (normalized), oracle.fgrd (when a reference exists),
/// params-<phase>.mrfw checkpoints, report.csv, pred.fgrd, summary.txt.
/// Nothing is written for configuration errors; an existing non-empty
/// output directory is refused unless `force` is set.
inline RunOutcome run(RunConfig cfg, bool force = false) {
    namespace fs = std::filesystem;
    RunOutcome out;

    try {
        cfg.normalize();
        cfg.validate();
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfig;
        out.message = e.what();
        return out;
    }

    problems::ProblemInstance pr;
    std::optional<Grid2D> grid;
    ad::ParamStore store(cfg.seed);
    std::optional<model::MRFModel> net;
    std::optional<trainer::TrainConfig> tc;
    try {
        pr = problems::problem_by_name(cfg.problem);
        grid = problems::grid_for(pr, cfg.nh, cfg.nw);
        net.emplace(detail::make_model(cfg, pr, *grid, store));
        tc = cfg.train_config();
    } catch (const InvalidInput& e) {
        // Semantic config problems surface when the pieces are assembled
        // (e.g. a fixed receptive field that cannot fit the grid).
        out.exit_code = kExitConfig;
        out.message = e.what();
        return out;
    }
    const Grid2D& g = *grid;

    const fs::path dir(cfg.outdir);
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force) {
        out.exit_code = kExitConfig;
        out.message = "output directory '" + cfg.outdir +
                      "' already has contents (use force to overwrite)";
        return out;
    }
    fs::create_directories(dir, ec);
    if (ec) {
        out.exit_code = kExitConfig;
        out.message = "cannot create output directory '" + cfg.outdir +
                      "': " + ec.message();
        return out;
    }

    {
        std::ofstream os(dir / "config.txt");
        os << format_run_config(cfg);
    }
    auto fail_numerical = [&](const std::string& what) {
        out.exit_code = kExitNumerical;
        out.message = what;
        std::ofstream os(dir / "error.txt");
        os << what << '\n';
        return out;
    };

    std::optional<Field> reference;
    if (pr.kind == problems::ProblemInstance::Kind::linear || pr.is_mms()) {
        try {
            reference = oracle::reference_solution(pr, g);
        } catch (const NumericalError& e) {
            return fail_numerical(e.what());
        }
        write_fgrd(dir / "oracle.fgrd", *reference);
    }

    auto hook = [&](const std::string& phase, const ad::ParamStore& s) {
        save_checkpoint(dir / ("params-" + phase + ".mrfw"), s);
    };

    try {
        out.report = trainer::train(pr, g, store, *net, *tc,
                                    reference ? &*reference : nullptr, nullptr,
                                    hook);
    } catch (const NumericalError& e) {
        return fail_numerical(e.what());
    }
    out.trained = true;
    out.param_count = net->param_count();
    out.flops_per_forward = net->flop_estimate(g.nh, g.nw);

    {
        std::ofstream os(dir / "report.csv");
        trainer::write_report_csv(out.report, os);
    }
    write_fgrd(dir / "pred.fgrd", detail::predict(pr, g, store, *net));
    {
        std::ofstream os(dir / "summary.txt");
        os << "problem=" << cfg.problem << '\n'
           << "resolution=" << g.nh << 'x' << g.nw << '\n'
           << "mode=" << cfg.mode << '\n'
           << "params=" << out.param_count << '\n'
           << "flops_per_forward=" << out.flops_per_forward << '\n'
           << trainer::report_summary(out.report);
    }

    if (out.report.diverged)
        return fail_numerical("training diverged (loss " +
                              std::to_string(out.report.final_loss) + ")");
    out.message = out.report.has_eps
                      ? "eps=" + std::to_string(out.report.eps_final)
                      : "ok";
    return out;
}

// ---------------------------------------------------------------------------
// Experiment matrices
// ---------------------------------------------------------------------------

struct MatrixAxis {
    std::string key;
    std::vector<std::string> values;
};

namespace detail {

inline std::string sanitize_component(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ':' || c == ' ' || c == '\t')
            c = '_';
    return s;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

struct MatrixCell {
    std::vector<std::string> values; // one per axis, in axis order
    std::string label;
};

inline std::vector<MatrixCell> enumerate_cells(
    const std::vector<MatrixAxis>& axes) {
    std::vector<MatrixCell> cells(1);
    for (const auto& ax : axes) {
        std::vector<MatrixCell> next;
        for (const auto& cell : cells)
            for (const auto& v : ax.values) {
                MatrixCell c = cell;
                c.values.push_back(v);
                if (!c.label.empty()) c.label += "__";
                c.label += sanitize_component(ax.key + "=" + v);
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

} // namespace detail

/// One run per cell of the cross product of `axes` applied over `base`;
/// cell artifacts land in <outdir>/<cell label>/ and an aggregate
/// matrix.csv row records axes, status, ε per channel, wall time and
/// backward count.  A failing cell is recorded in its row and the matrix
/// carries on.  Cells run `jobs`-wide; each is an isolated run.
inline int matrix(const RunConfig& base, const std::vector<MatrixAxis>& axes,
                  const std::string& outdir, int jobs = 1, bool force = false,
                  std::string* error = nullptr) {
    namespace fs = std::filesystem;
    auto set_error = [&](const std::string& msg) {
        if (error) *error = msg;
        return kExitConfig;
    };
    if (axes.empty()) return set_error("matrix needs at least one axis");
    for (const auto& ax : axes)
        if (ax.values.empty())
            return set_error("axis '" + ax.key + "' has no values");

    const fs::path dir(outdir);
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force)
        return set_error("output directory '" + outdir +
                         "' already has contents (use force to overwrite)");

    const auto cells = detail::enumerate_cells(axes);
    struct Row {
        std::string status;
        std::vector<double> eps;
        double wall_s = 0.0;
        long long backwards = 0;
    };
    std::vector<Row> rows(cells.size());

    // Dry-run the per-cell configs so key typos fail the whole matrix
    // up front rather than one cell at a time.
    for (const auto& cell : cells) {
        RunConfig probe = base;
        try {
            for (std::size_t a = 0; a < axes.size(); ++a)
                apply_key(probe, axes[a].key, cell.values[a]);
        } catch (const ConfigError& e) {
            return set_error(e.what());
        }
    }
    fs::create_directories(dir, ec);
    if (ec)
        return set_error("cannot create output directory '" + outdir +
                         "': " + ec.message());

    auto run_cell = [&](std::size_t i) {
        using clock = std::chrono::steady_clock;
        RunConfig cfg = base;
        Row& row = rows[i];
        try {
            for (std::size_t a = 0; a < axes.size(); ++a)
                apply_key(cfg, axes[a].key, cells[i].values[a]);
            cfg.outdir = (dir / cells[i].label).string();
            const auto t0 = clock::now();
            RunOutcome rc = run(cfg, force);
            row.wall_s =
                std::chrono::duration<double>(clock::now() - t0).count();
            if (rc.exit_code != kExitOk) {
                row.status = "error(" + std::to_string(rc.exit_code) +
                             "): " + rc.message;
                if (rc.trained) row.backwards = rc.report.backwards_total;
                return;
            }
            row.status = "ok";
            row.backwards = rc.report.backwards_total;
            row.eps = rc.report.eps_final_channel;
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
    };

    if (jobs < 1) jobs = 1;
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int width = int(std::min<std::size_t>(std::size_t(jobs),
                                                    cells.size()));
        for (int w = 0; w < width; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells.size();
                     i = next.fetch_add(1))
                    run_cell(i);
            });
        for (auto& th : pool) th.join();
    }

    std::size_t n_eps = 0;
    for (const auto& row : rows) n_eps = std::max(n_eps, row.eps.size());

    std::ofstream os(dir / "matrix.csv");
    for (const auto& ax : axes) os << detail::csv_escape(ax.key) << ',';
    os << "status";
    for (std::size_t c = 0; c < n_eps; ++c) os << ",eps" << c;
    os << ",backwards,wall_s\n";
    char buf[40];
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (const auto& v : cells[i].values) os << detail::csv_escape(v) << ',';
        os << detail::csv_escape(rows[i].status);
        for (std::size_t c = 0; c < n_eps; ++c) {
            os << ',';
            if (c < rows[i].eps.size()) {
                std::snprintf(buf, sizeof buf, "%.17g", rows[i].eps[c]);
                os << buf;
            }
        }
        std::snprintf(buf, sizeof buf, "%.6g", rows[i].wall_s);
        os << ',' << rows[i].backwards << ',' << buf << '\n';
    }
    return kExitOk;
}

} // namespace convpinn::cliio
