#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "convpinn/oracle.hpp"

using namespace convpinn;

namespace {

double mms_u(double x, double y) { return std::sin(M_PI * x) * std::exp(-0.5 * y); }

} // namespace

TEST_CASE("oracle: zero data gives the zero solution exactly", "[oracle]") {
    problems::LinearPDEProblem p;
    p.a = 1;
    p.c = 1;
    p.f = 1;
    p.g = 0;
    for (int e = 0; e < 4; ++e) p.bc[e] = [](double) { return 0.0; };
    Grid2D g = Grid2D::from_extent(17, 33, 0, 1, 0, 2);
    oracle::SolveInfo info;
    Field u = oracle::solve_linear_direct(p, g, nullptr, &info);
    for (double v : u.data) REQUIRE(v == 0.0);
    REQUIRE(info.residual_inf <= 1e-10);
    REQUIRE(info.warning.empty());
}

TEST_CASE("oracle: assembled system shape", "[oracle]") {
    auto sys = oracle::assemble_linear(problems::elliptic_problem(),
                                       Grid2D::from_extent(9, 17, 0, 1, 0, 2));
    REQUIRE(sys.n == 7 * 15);
    REQUIRE(sys.rhs.size() == sys.n);
    std::vector<bool> has_diag(std::size_t(sys.n), false);
    for (const auto& t : sys.triplets) {
        REQUIRE(t.row() >= 0);
        REQUIRE(t.row() < sys.n);
        REQUIRE(t.col() >= 0);
        REQUIRE(t.col() < sys.n);
        if (t.row() == t.col()) has_diag[std::size_t(t.row())] = true;
    }
    for (bool d : has_diag) REQUIRE(d);

    // Parabolic: the open y-edge nodes are unknowns too.
    auto psys = oracle::assemble_linear(problems::parabolic_problem(),
                                        Grid2D::from_extent(9, 17, 0, 1, 0, 2));
    REQUIRE(psys.n == 7 * 15 + 7);
}

TEST_CASE("oracle: manufactured elliptic solve converges at second order",
          "[oracle]") {
    auto pr = problems::problem_by_name("mms:lin-trig");
    double eps[2];
    int k = 0;
    for (int nh : {33, 65}) {
        Grid2D g = problems::grid_for(pr, nh, 2 * nh - 1);
        Field forcing = problems::manufactured_forcing(pr, g);
        oracle::SolveInfo info;
        Field u = oracle::solve_linear_direct(pr.lin, g, &forcing, &info);
        REQUIRE(info.residual_inf <= 1e-10);
        eps[k++] = relative_l2_error(u, problems::analytic_field(pr, g));
    }
    const double order = std::log2(eps[0] / eps[1]);
    REQUIRE(order > 1.4);
    REQUIRE(order < 2.6);
}

TEST_CASE("oracle: one-sided closure on the open parabolic edge converges",
          "[oracle]") {
    problems::LinearPDEProblem p;
    p.name = "parabolic-mms";
    p.a = 1;
    p.d = -2;
    p.e = -2;
    p.f = 4;
    p.bc[int(Edge::low1)] = [](double y) { return mms_u(0.0, y); };
    p.bc[int(Edge::high1)] = [](double y) { return mms_u(1.0, y); };
    p.bc[int(Edge::low2)] = [](double x) { return mms_u(x, 0.0); };
    // forcing = a u_xx + d u_x + e u_y + f u for u* = sin(pi x) exp(-y/2)
    auto force_at = [](double x, double y) {
        const double u = mms_u(x, y);
        return (5.0 - M_PI * M_PI) * u -
               2.0 * M_PI * std::cos(M_PI * x) * std::exp(-0.5 * y);
    };
    double eps[2];
    int k = 0;
    for (int nh : {17, 33}) {
        Grid2D g = Grid2D::from_extent(nh, 2 * nh - 1, 0, 1, 0, 2);
        Field forcing(g, 1);
        Field truth(g, 1);
        for (int i = 0; i < g.nh; ++i)
            for (int j = 0; j < g.nw; ++j) {
                forcing.at(0, i, j) = force_at(g.coord1(i), g.coord2(j));
                truth.at(0, i, j) = mms_u(g.coord1(i), g.coord2(j));
            }
        Field u = oracle::solve_linear_direct(p, g, &forcing);
        eps[k++] = relative_l2_error(u, truth);
    }
    const double order = std::log2(eps[0] / eps[1]);
    REQUIRE(order > 1.4);
    REQUIRE(order < 2.6);
}

TEST_CASE("oracle: discrete maximum principle for the Laplace configuration",
          "[oracle]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    Grid2D g = Grid2D::from_extent(17, 33, 0, 1, 0, 2);
    for (int trial = 0; trial < 5; ++trial) {
        problems::LinearPDEProblem p;
        p.a = 1;
        p.c = 1;
        // Random boundary data, evaluated by nearest-node lookup so the
        // assembly sees well-defined edge values.
        auto table_bc = [&](int n, double origin, double step) {
            auto t = std::make_shared<std::vector<double>>(std::size_t(n));
            for (auto& v : *t) v = val(rng);
            return [t, origin, step](double s) {
                const int k = int(std::lround((s - origin) / step));
                return (*t)[std::size_t(std::clamp(k, 0, int(t->size()) - 1))];
            };
        };
        p.bc[int(Edge::low1)] = table_bc(g.nw, 0.0, g.d2);
        p.bc[int(Edge::high1)] = table_bc(g.nw, 0.0, g.d2);
        p.bc[int(Edge::low2)] = table_bc(g.nh, 0.0, g.d1);
        p.bc[int(Edge::high2)] = table_bc(g.nh, 0.0, g.d1);

        Field u = oracle::solve_linear_direct(p, g);
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < g.nh; ++i)
            for (int j = 0; j < g.nw; ++j)
                if (i == 0 || i == g.nh - 1 || j == 0 || j == g.nw - 1) {
                    lo = std::min(lo, u.at(0, i, j));
                    hi = std::max(hi, u.at(0, i, j));
                }
        for (int i = 1; i < g.nh - 1; ++i)
            for (int j = 1; j < g.nw - 1; ++j) {
                REQUIRE(u.at(0, i, j) >= lo - 1e-12);
                REQUIRE(u.at(0, i, j) <= hi + 1e-12);
            }
    }
}

TEST_CASE("oracle: elliptic benchmark is grid-independent under refinement",
          "[oracle]") {
    auto pr = problems::problem_by_name("elliptic");
    Grid2D gc = problems::grid_for(pr, 100, 200);
    Grid2D gf = problems::grid_for(pr, 199, 399); // halves both spacings
    Field uc = oracle::solve_linear_direct(pr.lin, gc);
    Field uf = oracle::solve_linear_direct(pr.lin, gf);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < gc.nh; ++i)
        for (int j = 0; j < gc.nw; ++j) {
            const double d = uc.at(0, i, j) - uf.at(0, 2 * i, 2 * j);
            num += d * d;
            den += uc.at(0, i, j) * uc.at(0, i, j);
        }
    REQUIRE(std::sqrt(num / den) <= 1e-3);
}

TEST_CASE("oracle: solved field satisfies the PDE stencil in the interior",
          "[oracle]") {
    auto pr = problems::problem_by_name("elliptic");
    Grid2D g = problems::grid_for(pr, 32, 64);
    Field u = oracle::solve_linear_direct(pr.lin, g);
    Field res = problems::linear_residual(u, pr.lin, 2,
                                          stencil::PaddingSpec::for_accuracy(2));
    double worst = 0.0;
    for (int i = 1; i < g.nh - 1; ++i)
        for (int j = 1; j < g.nw - 1; ++j)
            worst = std::max(worst, std::abs(res.at(0, i, j)));
    REQUIRE(worst <= 1e-8);
}

TEST_CASE("oracle: hyperbolic class solves with the relaxed tolerance",
          "[oracle]") {
    auto pr = problems::problem_by_name("hyperbolic");
    Grid2D g = problems::grid_for(pr, 32, 64);
    oracle::SolveInfo info;
    Field u = oracle::solve_linear_direct(pr.lin, g, nullptr, &info);
    REQUIRE_FALSE(info.warning.empty());
    REQUIRE(info.tolerance == 1e-8);
    REQUIRE(info.residual_inf <= 1e-8);
    for (double v : u.data) REQUIRE(std::isfinite(v));
}

TEST_CASE("oracle: resonant hyperbolic grid is reported, not silently solved",
          "[oracle]") {
    // With d1 == d2 the discrete wave operator on the 1 x 2 box is singular
    // (modes n = 2m align); 17 x 33 gives exactly that spacing.
    auto pr = problems::problem_by_name("hyperbolic");
    Grid2D g = problems::grid_for(pr, 17, 33);
    REQUIRE_THROWS_AS(oracle::solve_linear_direct(pr.lin, g), NumericalError);
}

TEST_CASE("oracle: reference_solution dispatch", "[oracle]") {
    auto mms = problems::problem_by_name("mms:ns-poly");
    Grid2D g = problems::grid_for(mms, 9, 17);
    Field ref = oracle::reference_solution(mms, g);
    Field ana = problems::analytic_field(mms, g);
    REQUIRE(ref.data == ana.data);

    auto swirl = problems::problem_by_name("ns-swirl");
    REQUIRE_THROWS_AS(
        oracle::reference_solution(swirl, problems::grid_for(swirl, 9, 17)),
        InvalidInput);
}

TEST_CASE("oracle: cached reference round-trips through FGRD", "[oracle]") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() / "convpinn-oracle-cache-test";
    fs::remove_all(dir);
    auto pr = problems::problem_by_name("elliptic");
    Grid2D g = problems::grid_for(pr, 17, 33);
    Field first = oracle::cached_reference(pr, g, dir);
    const auto key = oracle::cache_key(pr, g);
    REQUIRE(fs::exists(dir / (key + ".fgrd")));
    Field second = oracle::cached_reference(pr, g, dir);
    REQUIRE(first.data == second.data);

    // Different resolution, different key.
    Grid2D g2 = problems::grid_for(pr, 18, 33);
    REQUIRE(oracle::cache_key(pr, g2) != key);
    fs::remove_all(dir);
}
