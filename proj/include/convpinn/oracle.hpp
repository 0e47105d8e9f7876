#pragma once

#include <filesystem>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "convpinn/field_io.hpp"
#include "convpinn/problems.hpp"

namespace convpinn::oracle {

/// Assembled finite-difference system over the unknown (non-Dirichlet)
/// nodes; Dirichlet values are eliminated into the right-hand side.
struct SparseSystem {
    int n = 0;
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs;
    std::vector<std::ptrdiff_t> unknown_of_node; // plane index -> unknown or -1
    std::vector<double> dirichlet;               // plane index -> value (0 if free)
};

struct SolveInfo {
    double residual_inf = 0.0;
    double tolerance = 1e-10;
    std::string warning; // set when the relaxed hyperbolic tolerance is in use
};

namespace detail {

inline problems::ProblemInstance wrap_linear(const problems::LinearPDEProblem& p) {
    problems::ProblemInstance pr;
    pr.name = p.name;
    pr.kind = problems::ProblemInstance::Kind::linear;
    pr.lin = p;
    return pr;
}

} // namespace detail

/// Second-order FD assembly of  a u_xx + b u_xy + c u_yy + d u_x + e u_y
/// + f u = g.  Edges without boundary data (the parabolic case) close with
/// second-order one-sided first derivatives; such problems must not carry
/// transverse second-derivative or cross terms toward that edge.
inline SparseSystem assemble_linear(const problems::LinearPDEProblem& prob,
                                    const Grid2D& g,
                                    const Field* forcing = nullptr) {
    if (forcing && (!forcing->grid.same_layout(g) || forcing->channels != 1))
        throw InvalidInput("forcing shape mismatch");
    const auto pr = detail::wrap_linear(prob);
    const auto masks = problems::build_masks(pr, g);
    const std::size_t plane = std::size_t(g.nh) * g.nw;

    SparseSystem sys;
    sys.unknown_of_node.assign(plane, -2); // -2 free, -1 dirichlet
    sys.dirichlet.assign(plane, 0.0);
    for (std::size_t k = 0; k < masks.bc_idx.size(); ++k) {
        sys.unknown_of_node[masks.bc_idx[k]] = -1;
        sys.dirichlet[masks.bc_idx[k]] = masks.bc_target[k];
    }
    for (std::size_t k = 0; k < plane; ++k)
        if (sys.unknown_of_node[k] == -2) sys.unknown_of_node[k] = sys.n++;
    sys.rhs = Eigen::VectorXd::Zero(sys.n);

    const double inv_d1 = 1.0 / g.d1, inv_d2 = 1.0 / g.d2;
    const double inv_d1sq = inv_d1 * inv_d1, inv_d2sq = inv_d2 * inv_d2;

    for (int i = 0; i < g.nh; ++i) {
        for (int j = 0; j < g.nw; ++j) {
            const std::size_t k = std::size_t(i) * g.nw + j;
            const std::ptrdiff_t row = sys.unknown_of_node[k];
            if (row < 0) continue;

            auto add = [&](int ii, int jj, double coeff) {
                if (coeff == 0.0) return;
                const std::size_t kk = std::size_t(ii) * g.nw + jj;
                const std::ptrdiff_t col = sys.unknown_of_node[kk];
                if (col >= 0)
                    sys.triplets.emplace_back(int(row), int(col), coeff);
                else
                    sys.rhs[row] -= coeff * sys.dirichlet[kk];
            };

            const bool open_lo1 = i == 0, open_hi1 = i == g.nh - 1;
            const bool open_lo2 = j == 0, open_hi2 = j == g.nw - 1;
            const bool open_1 = open_lo1 || open_hi1;
            const bool open_2 = open_lo2 || open_hi2;
            if ((open_1 && (prob.a != 0.0 || prob.b != 0.0)) ||
                (open_2 && (prob.c != 0.0 || prob.b != 0.0)))
                throw InvalidInput(
                    "open-edge closure supports first-derivative terms only");

            if (prob.a != 0.0) {
                add(i - 1, j, prob.a * inv_d1sq);
                add(i, j, -2.0 * prob.a * inv_d1sq);
                add(i + 1, j, prob.a * inv_d1sq);
            }
            if (prob.c != 0.0) {
                add(i, j - 1, prob.c * inv_d2sq);
                add(i, j, -2.0 * prob.c * inv_d2sq);
                add(i, j + 1, prob.c * inv_d2sq);
            }
            if (prob.b != 0.0) {
                const double q = 0.25 * prob.b * inv_d1 * inv_d2;
                add(i + 1, j + 1, q);
                add(i - 1, j - 1, q);
                add(i + 1, j - 1, -q);
                add(i - 1, j + 1, -q);
            }
            if (prob.d != 0.0) {
                if (open_lo1) {
                    add(i, j, -1.5 * prob.d * inv_d1);
                    add(i + 1, j, 2.0 * prob.d * inv_d1);
                    add(i + 2, j, -0.5 * prob.d * inv_d1);
                } else if (open_hi1) {
                    add(i, j, 1.5 * prob.d * inv_d1);
                    add(i - 1, j, -2.0 * prob.d * inv_d1);
                    add(i - 2, j, 0.5 * prob.d * inv_d1);
                } else {
                    add(i + 1, j, 0.5 * prob.d * inv_d1);
                    add(i - 1, j, -0.5 * prob.d * inv_d1);
                }
            }
            if (prob.e != 0.0) {
                if (open_lo2) {
                    add(i, j, -1.5 * prob.e * inv_d2);
                    add(i, j + 1, 2.0 * prob.e * inv_d2);
                    add(i, j + 2, -0.5 * prob.e * inv_d2);
                } else if (open_hi2) {
                    add(i, j, 1.5 * prob.e * inv_d2);
                    add(i, j - 1, -2.0 * prob.e * inv_d2);
                    add(i, j - 2, 0.5 * prob.e * inv_d2);
                } else {
                    add(i, j + 1, 0.5 * prob.e * inv_d2);
                    add(i, j - 1, -0.5 * prob.e * inv_d2);
                }
            }
            if (prob.f != 0.0) add(i, j, prob.f);

            sys.rhs[row] += forcing ? forcing->data[k] : prob.g;
        }
    }
    return sys;
}

/// Direct sparse solve of the assembled system; the returned field carries
/// the Dirichlet values on the boundary.  The accepted residual is
/// ||Ax - b||_inf <= 1e-10 (1e-8 with a warning for the hyperbolic class);
/// anything worse throws NumericalError after iterative refinement stalls.
inline Field solve_linear_direct(const problems::LinearPDEProblem& prob,
                                 const Grid2D& g, const Field* forcing = nullptr,
                                 SolveInfo* info = nullptr) {
    auto sys = assemble_linear(prob, g, forcing);

    Eigen::SparseMatrix<double> A(sys.n, sys.n);
    A.setFromTriplets(sys.triplets.begin(), sys.triplets.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw NumericalError("sparse factorization failed for " + prob.name);
    Eigen::VectorXd x = lu.solve(sys.rhs);

    SolveInfo local;
    const bool hyperbolic = prob.classification() == 'h';
    local.tolerance = hyperbolic ? 1e-8 : 1e-10;
    if (hyperbolic)
        local.warning = "hyperbolic system: residual tolerance relaxed to 1e-8";
    auto residual = [&] { return (A * x - sys.rhs).lpNorm<Eigen::Infinity>(); };
    local.residual_inf = residual();
    for (int pass = 0; pass < 5 && local.residual_inf > local.tolerance; ++pass) {
        x += lu.solve(sys.rhs - A * x);
        const double r = residual();
        if (r >= local.residual_inf) break; // refinement stalled at its floor
        local.residual_inf = r;
    }
    if (local.residual_inf > local.tolerance) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "direct solve of %s did not reach tolerance: residual %.3e",
                      prob.name.c_str(), local.residual_inf);
        throw NumericalError(msg);
    }
    if (info) *info = local;

    Field out(g, 1);
    for (std::size_t k = 0; k < sys.unknown_of_node.size(); ++k)
        out.data[k] = sys.unknown_of_node[k] >= 0 ? x[sys.unknown_of_node[k]]
                                                  : sys.dirichlet[k];
    return out;
}

/// Reference field for any benchmark problem: analytic for manufactured
/// solutions, direct FD solve for the linear benchmarks.  The swirl system
/// has no reference solver.
inline Field reference_solution(const problems::ProblemInstance& pr,
                                const Grid2D& g, SolveInfo* info = nullptr) {
    if (pr.is_mms()) return problems::analytic_field(pr, g);
    if (pr.kind != problems::ProblemInstance::Kind::linear)
        throw InvalidInput("no reference solver for the swirl system");
    return solve_linear_direct(pr.lin, g, nullptr, info);
}

/// Stable cache key: problem name, resolution and coefficient digest.
inline std::string cache_key(const problems::ProblemInstance& pr,
                             const Grid2D& g) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix(pr.name.data(), pr.name.size());
    if (pr.kind == problems::ProblemInstance::Kind::linear) {
        const double coeffs[] = {pr.lin.a,  pr.lin.b,  pr.lin.c,  pr.lin.d,
                                 pr.lin.e,  pr.lin.f,  pr.lin.g,  pr.lin.x0,
                                 pr.lin.x1, pr.lin.y0, pr.lin.y1};
        mix(coeffs, sizeof coeffs);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s-%dx%d-%016llx", pr.name.c_str(), g.nh,
                  g.nw, static_cast<unsigned long long>(h));
    std::string key = buf;
    for (char& c : key)
        if (c == ':') c = '_';
    return key;
}

/// Cached reference lookup: loads `<dir>/<key>.fgrd` when present,
/// otherwise solves and writes it.
inline Field cached_reference(const problems::ProblemInstance& pr,
                              const Grid2D& g,
                              const std::filesystem::path& cache_dir,
                              SolveInfo* info = nullptr) {
    const auto path = cache_dir / (cache_key(pr, g) + ".fgrd");
    if (std::filesystem::exists(path)) {
        Field f = read_fgrd(path);
        if (!f.grid.same_layout(g))
            throw InvalidInput("cached oracle has a different layout: " +
                               path.string());
        return f;
    }
    Field f = reference_solution(pr, g, info);
    std::filesystem::create_directories(cache_dir);
    write_fgrd(path, f);
    return f;
}

} // namespace convpinn::oracle
