#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "convpinn/runner.hpp"

using namespace convpinn;
namespace fs = std::filesystem;

namespace {

/// Flags shared by the verbs that assemble a RunConfig.  Values stay as
/// strings so one code path (apply_key) does all conversion/validation.
struct ConfigFlags {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;

    void attach(CLI::App& app, bool with_train) {
        app.add_option("--config", config_file,
                       "config file (key = value with [run]/[train] sections)");
        auto opt = [&](const std::string& flag, const std::string& key,
                       const std::string& help) {
            app.add_option_function<std::string>(
                flag,
                [this, key](const std::string& v) {
                    overrides.emplace_back(key, v);
                },
                help);
        };
        opt("--problem", "problem", "problem name (see README for the list)");
        opt("--resolution", "resolution", "grid size as <nh>x<nw>");
        opt("--channels", "channels", "hidden channels per conv layer");
        opt("--depth", "depth", "conv layers per branch");
        opt("--fd", "fd", "finite-difference accuracy order (2,4,6,8)");
        opt("--mode", "mode", "receptive-field mode: mrf or fixed:<n>");
        opt("--weights", "weights",
            "weight scheme: manual:<w,..> | dynamic[:a,c] | dimensional[:s,..]");
        opt("--seed", "seed", "parameter-init seed");
        opt("--adam", "adam", "Adam epochs");
        opt("--lr", "lr", "Adam learning rate");
        opt("--lbfgs", "lbfgs", "L-BFGS epochs");
        opt("--lbfgs-inner", "lbfgs_inner", "quasi-Newton iterations per epoch");
        opt("--history", "history", "L-BFGS history length");
        opt("--cadence", "cadence", "error-evaluation cadence (epochs)");
        opt("--divergence", "divergence", "divergence threshold on the loss");
    }

    cliio::RunConfig build() const {
        cliio::RunConfig cfg;
        if (!config_file.empty()) {
            std::ifstream is(config_file);
            if (!is)
                throw ConfigError("cannot open config file '" + config_file +
                                  "'");
            cfg = cliio::parse_run_config(is);
        }
        for (const auto& [key, value] : overrides)
            cliio::apply_key(cfg, key, value);
        return cfg;
    }
};

int cmd_solve(const ConfigFlags& flags, const std::string& out, bool force) {
    auto cfg = flags.build();
    if (!out.empty()) cfg.outdir = out;
    auto rc = cliio::run(cfg, force);
    if (rc.exit_code != cliio::kExitOk)
        std::cerr << "error: " << rc.message << '\n';
    else
        std::cout << rc.message << "\nartifacts in " << cfg.outdir << '\n';
    return rc.exit_code;
}

int cmd_matrix(const ConfigFlags& flags,
               const std::vector<std::string>& axis_specs,
               const std::string& out, int jobs, bool force) {
    auto base = flags.build();
    std::vector<cliio::MatrixAxis> axes;
    for (const auto& spec : axis_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("axis must look like key=v1,v2,... got '" +
                              spec + "'");
        cliio::MatrixAxis ax;
        ax.key = spec.substr(0, eq);
        std::stringstream ss(spec.substr(eq + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) ax.values.push_back(tok);
        axes.push_back(std::move(ax));
    }
    std::string err;
    const int rc = cliio::matrix(base, axes, out, jobs, force, &err);
    if (rc != cliio::kExitOk)
        std::cerr << "error: " << err << '\n';
    else
        std::cout << "matrix written to " << out << "/matrix.csv\n";
    return rc;
}

int cmd_oracle(const std::string& problem, const std::string& resolution,
               const std::string& out, bool force) {
    cliio::RunConfig cfg;
    cfg.problem = problem;
    cliio::parse_resolution(resolution, cfg.nh, cfg.nw);
    cfg.normalize();

    if (fs::exists(out) && !force)
        throw ConfigError("output file '" + out +
                          "' exists (use --force to overwrite)");
    const auto pr = problems::problem_by_name(problem);
    const auto g = problems::grid_for(pr, cfg.nh, cfg.nw);
    oracle::SolveInfo info;
    const Field ref = oracle::reference_solution(pr, g, &info);
    write_fgrd(out, ref);
    std::cout << "wrote " << out << " (" << ref.channels << " channel"
              << (ref.channels == 1 ? "" : "s") << ", " << g.nh << 'x' << g.nw
              << ")\n";
    if (!pr.is_mms())
        std::printf("direct solve residual %.3e (tolerance %.1e)\n",
                    info.residual_inf, info.tolerance);
    if (!info.warning.empty()) std::cout << "warning: " << info.warning << '\n';
    return cliio::kExitOk;
}

int cmd_inspect_stencil(int deriv, int acc, const std::string& resolution) {
    const auto rats = stencil::central_difference_rationals(deriv, acc);
    const auto kernel = stencil::central_difference_kernel(deriv, acc);
    std::cout << "central difference: derivative " << deriv << ", accuracy "
              << acc << ", radius " << kernel.radius() << '\n';
    std::cout << "taps (exact):";
    for (const auto& r : rats)
        std::cout << ' ' << r.numerator() << '/' << r.denominator();
    std::cout << "\ntaps (double):";
    for (double w : kernel.w) std::printf(" %.17g", w);
    const auto spec = stencil::PaddingSpec::for_accuracy(acc);
    std::cout << "\npadding: " << spec.n_virtual
              << " virtual node(s), fit degree " << spec.degree << ", "
              << spec.fit_points << " fit point(s)\n";

    if (!resolution.empty()) {
        int nh = 0, nw = 0;
        cliio::parse_resolution(resolution, nh, nw);
        std::cout << "branch dilations at " << nh << 'x' << nw << ":\n";
        std::cout << "  k  dilation  receptive_field\n";
        for (int k : model::kRatios) {
            const int d = model::dilation_for(nh, nw, k);
            std::printf("%3d %9d %16d\n", k, d, model::receptive_field(d));
        }
    }
    return cliio::kExitOk;
}

int cmd_grad_check(const ConfigFlags& flags, int samples, double eps,
                   double tol) {
    auto cfg = flags.build();
    cfg.normalize();
    cfg.validate();
    const auto pr = problems::problem_by_name(cfg.problem);
    const auto g = problems::grid_for(pr, cfg.nh, cfg.nw);
    ad::ParamStore store(cfg.seed);
    auto net = cliio::detail::make_model(cfg, pr, g, store);
    trainer::LossGraph lg(pr, g, net, cfg.fd);
    lg.weights = trainer::initial_weights(cfg.train_config().scheme, pr,
                                          lg.masks, lg.n_eq);
    const auto res = ad::grad_check(
        store, [&](ad::Tape& t) { return lg.build(t).total; }, eps, samples,
        cfg.seed);
    std::printf("checked %d parameter(s): max relative error %.3e\n",
                res.checked, res.max_rel_err);
    if (!(res.max_rel_err <= tol)) {
        std::cerr << "error: exceeds tolerance " << tol << '\n';
        return cliio::kExitNumerical;
    }
    return cliio::kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"convolutional physics-informed PDE solver"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "train one configured run");
    ConfigFlags solve_flags;
    solve_flags.attach(*solve, true);
    std::string solve_out;
    bool solve_force = false;
    solve->add_option("--out", solve_out, "output directory")->required();
    solve->add_flag("--force", solve_force, "overwrite an existing directory");

    // matrix
    auto* matrix = app.add_subcommand("matrix", "run an experiment matrix");
    ConfigFlags matrix_flags;
    matrix_flags.attach(*matrix, true);
    std::vector<std::string> axis_specs;
    std::string matrix_out;
    int jobs = 1;
    bool matrix_force = false;
    matrix->add_option("--axis", axis_specs, "sweep axis as key=v1,v2,...")
        ->required();
    matrix->add_option("--out", matrix_out, "output directory")->required();
    matrix->add_option("--jobs", jobs, "parallel cells")->default_val(1);
    matrix->add_flag("--force", matrix_force, "overwrite existing directories");

    // oracle
    auto* oracle_cmd =
        app.add_subcommand("oracle", "write the reference solution as FGRD");
    std::string oracle_problem = "elliptic", oracle_res = "32x64", oracle_out;
    bool oracle_force = false;
    oracle_cmd->add_option("--problem", oracle_problem, "problem name");
    oracle_cmd->add_option("--resolution", oracle_res, "grid size <nh>x<nw>");
    oracle_cmd->add_option("--out", oracle_out, "output file")->required();
    oracle_cmd->add_flag("--force", oracle_force, "overwrite an existing file");

    // inspect-stencil
    auto* inspect = app.add_subcommand(
        "inspect-stencil", "print difference kernels and dilation tables");
    int deriv = 2, acc = 8;
    std::string inspect_res;
    inspect->add_option("--deriv", deriv, "derivative order (1 or 2)");
    inspect->add_option("--acc", acc, "accuracy order (2,4,6,8)");
    inspect->add_option("--resolution", inspect_res,
                        "also print branch dilations for this grid");

    // grad-check
    auto* gc = app.add_subcommand(
        "grad-check", "compare analytic gradients with finite differences");
    ConfigFlags gc_flags;
    gc_flags.attach(*gc, false);
    int gc_samples = 120;
    double gc_eps = 1e-6, gc_tol = 1e-5;
    gc->add_option("--samples", gc_samples, "parameters to sample");
    gc->add_option("--eps", gc_eps, "finite-difference step");
    gc->add_option("--tol", gc_tol, "max relative error to accept");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : cliio::kExitConfig;
    }

    try {
        if (solve->parsed()) return cmd_solve(solve_flags, solve_out, solve_force);
        if (matrix->parsed())
            return cmd_matrix(matrix_flags, axis_specs, matrix_out, jobs,
                              matrix_force);
        if (oracle_cmd->parsed())
            return cmd_oracle(oracle_problem, oracle_res, oracle_out,
                              oracle_force);
        if (inspect->parsed())
            return cmd_inspect_stencil(deriv, acc, inspect_res);
        if (gc->parsed()) return cmd_grad_check(gc_flags, gc_samples, gc_eps, gc_tol);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cliio::kExitConfig;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cliio::kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cliio::kExitNumerical;
    }
    return cliio::kExitConfig;
}
