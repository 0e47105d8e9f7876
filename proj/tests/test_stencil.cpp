#include <catch2/catch_amalgamated.hpp>

#include "convpinn/stencil.hpp"
#include "testutil.hpp"

using namespace convpinn;
using namespace convpinn::stencil;
using testutil::sample;

namespace {
Rational R(long long n, long long d = 1) { return {n, d}; }
}

TEST_CASE("central-difference kernels match the classical tables exactly") {
    using V = std::vector<Rational>;
    const struct {
        int deriv, acc;
        V expect;
    } cases[] = {
        {1, 2, {R(-1, 2), R(0), R(1, 2)}},
        {1, 4, {R(1, 12), R(-2, 3), R(0), R(2, 3), R(-1, 12)}},
        {1, 6, {R(-1, 60), R(3, 20), R(-3, 4), R(0), R(3, 4), R(-3, 20), R(1, 60)}},
        {1, 8,
         {R(1, 280), R(-4, 105), R(1, 5), R(-4, 5), R(0), R(4, 5), R(-1, 5),
          R(4, 105), R(-1, 280)}},
        {2, 2, {R(1), R(-2), R(1)}},
        {2, 4, {R(-1, 12), R(4, 3), R(-5, 2), R(4, 3), R(-1, 12)}},
        {2, 6,
         {R(1, 90), R(-3, 20), R(3, 2), R(-49, 18), R(3, 2), R(-3, 20), R(1, 90)}},
        {2, 8,
         {R(-1, 560), R(8, 315), R(-1, 5), R(8, 5), R(-205, 72), R(8, 5),
          R(-1, 5), R(8, 315), R(-1, 560)}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.deriv, c.acc);
        REQUIRE(central_difference_rationals(c.deriv, c.acc) == c.expect);
    }
}

TEST_CASE("kernel moment conditions hold exactly in rational arithmetic") {
    for (int deriv : {1, 2}) {
        for (int acc : {2, 4, 6, 8}) {
            CAPTURE(deriv, acc);
            const auto c = central_difference_rationals(deriv, acc);
            const int r = acc / 2;
            long long fact = 1;
            for (int p = 0; p <= acc + deriv - 1; ++p) {
                if (p > 0) fact *= p;
                Rational sum(0);
                for (int k = -r; k <= r; ++k) {
                    long long kp = 1;
                    for (int q = 0; q < p; ++q) kp *= k;
                    sum += c[k + r] * Rational(kp);
                }
                CAPTURE(p);
                REQUIRE(sum == (p == deriv ? Rational(fact) : Rational(0)));
            }
        }
    }
}

TEST_CASE("unsupported kernel orders are rejected") {
    REQUIRE_THROWS_AS(central_difference_kernel(3, 2), InvalidInput);
    REQUIRE_THROWS_AS(central_difference_kernel(0, 2), InvalidInput);
    REQUIRE_THROWS_AS(central_difference_kernel(1, 3), InvalidInput);
    REQUIRE_THROWS_AS(central_difference_kernel(1, 10), InvalidInput);
}

TEST_CASE("padding a constant line keeps it constant") {
    const std::vector<double> line = {5.0, 5.0, 5.0, 5.0};
    const auto spec = PaddingSpec::for_accuracy(4); // n_virtual 2, degree 2
    for (auto side : {PadSide::low, PadSide::high}) {
        const auto v = taylor_pad_line(line, spec, side);
        REQUIRE(v.size() == 2);
        CHECK(v[0] == Catch::Approx(5.0).margin(1e-13));
        CHECK(v[1] == Catch::Approx(5.0).margin(1e-13));
    }
}

TEST_CASE("padding extrapolates a ramp linearly") {
    const std::vector<double> line = {0.0, 1.0, 2.0, 3.0};
    const auto spec = PaddingSpec::for_accuracy(2); // n_virtual 1, degree 2, fit 2
    const auto lo = taylor_pad_line(line, spec, PadSide::low);
    CHECK(lo[0] == Catch::Approx(-1.0).margin(1e-13));
    const auto hi = taylor_pad_line(line, spec, PadSide::high);
    CHECK(hi[0] == Catch::Approx(4.0).margin(1e-13));
}

TEST_CASE("degree-3 padding reproduces a cubic exactly") {
    // u(n) = n^3 sampled at n = 0..5; virtual values must be (-m)^3.
    std::vector<double> line(6);
    for (int n = 0; n < 6; ++n) line[n] = double(n) * n * n;
    const auto spec = PaddingSpec::for_accuracy(6, 3); // n_virtual 3, fit 3
    const auto v = taylor_pad_line(line, spec, PadSide::low);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == Catch::Approx(-1.0).margin(1e-10));
    CHECK(v[1] == Catch::Approx(-8.0).margin(1e-10));
    CHECK(v[2] == Catch::Approx(-27.0).margin(1e-10));
}

TEST_CASE("padding reproduces polynomials up to the fit degree") {
    testutil::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const int degree = rng.integer(1, 4);
        const int fit = degree + rng.integer(0, 2); // exercises both fit paths
        PaddingSpec spec{rng.integer(1, 4), degree, fit};
        auto poly_coeff = rng.vec(std::size_t(degree) + 1);
        auto poly = [&](double x) {
            double acc = 0.0;
            for (int q = degree; q >= 0; --q) acc = acc * x + poly_coeff[q];
            return acc;
        };
        std::vector<double> line(std::size_t(fit) + 3);
        for (std::size_t n = 0; n < line.size(); ++n) line[n] = poly(double(n));
        const auto v = taylor_pad_line(line, spec, PadSide::low);
        for (int m = 1; m <= spec.n_virtual; ++m) {
            CAPTURE(trial, degree, fit, m);
            CHECK(v[m - 1] == Catch::Approx(poly(-double(m))).margin(1e-9));
        }
    }
}

TEST_CASE("over-determined fits use all requested points") {
    // degree 2 over 4 points on an exact quadratic -> still exact
    std::vector<double> line(6);
    for (int n = 0; n < 6; ++n) line[n] = 2.0 + 0.5 * n - 0.25 * n * n;
    PaddingSpec spec{2, 2, 4};
    const auto v = taylor_pad_line(line, spec, PadSide::low);
    CHECK(v[0] == Catch::Approx(2.0 - 0.5 - 0.25).margin(1e-9));
    CHECK(v[1] == Catch::Approx(2.0 - 1.0 - 1.0).margin(1e-9));
}

TEST_CASE("padding rejects bad specs and short lines") {
    REQUIRE_THROWS_AS((PaddingSpec{0, 2, 2}.validate()), InvalidInput);
    REQUIRE_THROWS_AS((PaddingSpec{1, 0, 2}.validate()), InvalidInput);
    REQUIRE_THROWS_AS((PaddingSpec{1, 3, 2}.validate()), InvalidInput);
    const std::vector<double> two = {1.0, 2.0};
    REQUIRE_THROWS_AS(taylor_pad_line(two, PaddingSpec{1, 2, 2}, PadSide::low),
                      InvalidInput);
}

TEST_CASE("derivative of a quadratic is exact everywhere") {
    const Grid2D g(9, 13, 0.25, 0.125);
    const auto f = sample(g, [](double x, double) { return x * x; });
    const auto exact = sample(g, [](double x, double) { return 2.0 * x; });
    for (int acc : {2, 4, 6, 8}) {
        CAPTURE(acc);
        const auto d = stencil::derivative(f, 1, 1, acc);
        CHECK(testutil::max_abs_diff(d, exact) < 1e-12);
    }
}

TEST_CASE("derivative of a constant field is exactly zero") {
    const Grid2D g(10, 10, 0.1, 0.2);
    Field f(g, 2, 3.75);
    for (int axis : {1, 2})
        for (int deriv : {1, 2}) {
            const auto d = stencil::derivative(f, axis, deriv, 8);
            for (double v : d.data) {
                CAPTURE(axis, deriv);
                REQUIRE(v == 0.0);
            }
        }
}

TEST_CASE("derivative acts along the requested axis only") {
    const Grid2D g(12, 15, 0.05, 0.07);
    const auto f = sample(g, [](double x, double y) { return 3.0 * x + 7.0 * y; });
    const auto d1 = stencil::derivative(f, 1, 1, 4);
    const auto d2 = stencil::derivative(f, 2, 1, 4);
    for (double v : d1.data) REQUIRE(v == Catch::Approx(3.0).margin(1e-11));
    for (double v : d2.data) REQUIRE(v == Catch::Approx(7.0).margin(1e-11));
}

namespace {
double interior_order(int deriv, int acc, int n_coarse) {
    auto err = [&](int n) {
        const Grid2D g(n, 3, 1.0 / (n - 1), 1.0);
        const double w = 2.0 * M_PI;
        const auto f = sample(g, [&](double x, double) { return std::sin(w * x); });
        Field exact(g, 1);
        for (int i = 0; i < g.nh; ++i)
            for (int j = 0; j < g.nw; ++j) {
                const double x = g.coord1(i);
                exact.at(0, i, j) = deriv == 1 ? w * std::cos(w * x)
                                               : -w * w * std::sin(w * x);
            }
        const auto d = stencil::derivative(f, 1, deriv, acc);
        return testutil::max_abs_diff_interior(d, exact, acc / 2, 0);
    };
    return std::log2(err(n_coarse) / err(2 * n_coarse - 1));
}
} // namespace

TEST_CASE("interior truncation error converges at the formal order") {
    // Grid pairs with matched spacing halving; interior excludes nodes
    // whose stencils touch virtual values.
    CHECK(interior_order(1, 2, 65) == Catch::Approx(2.0).margin(0.25));
    CHECK(interior_order(1, 4, 65) == Catch::Approx(4.0).margin(0.4));
    CHECK(interior_order(2, 4, 65) == Catch::Approx(4.0).margin(0.4));
    CHECK(interior_order(1, 8, 49) == Catch::Approx(8.0).margin(0.6));
    CHECK(interior_order(2, 8, 25) == Catch::Approx(8.0).margin(1.5));
}

TEST_CASE("derivative is linear in the field") {
    testutil::Rng rng(7);
    const Grid2D g(14, 11, 0.3, 0.45);
    Field f(g, 1), h(g, 1);
    for (auto& v : f.data) v = rng.uniform();
    for (auto& v : h.data) v = rng.uniform();
    Field combo(g, 1);
    for (std::size_t k = 0; k < combo.data.size(); ++k)
        combo.data[k] = 2.5 * f.data[k] - 1.25 * h.data[k];
    const auto dc = stencil::derivative(combo, 2, 2, 6);
    const auto df = stencil::derivative(f, 2, 2, 6);
    const auto dh = stencil::derivative(h, 2, 2, 6);
    for (std::size_t k = 0; k < combo.data.size(); ++k) {
        const double want = 2.5 * df.data[k] - 1.25 * dh.data[k];
        REQUIRE(dc.data[k] == Catch::Approx(want).margin(1e-10));
    }
}

TEST_CASE("derivative validates its inputs") {
    const Grid2D g(6, 6, 1.0, 1.0);
    Field f(g, 1, 1.0);
    REQUIRE_THROWS_AS(stencil::derivative(f, 3, 1, 2), InvalidInput);
    REQUIRE_THROWS_AS(
        stencil::derivative(f, 1, 1, 4, PaddingSpec::for_accuracy(2)),
        InvalidInput);
    const Grid2D tiny(2, 6, 1.0, 1.0);
    Field tf(tiny, 1, 1.0);
    REQUIRE_THROWS_AS(
        stencil::derivative(tf, 1, 1, 2, PaddingSpec{1, 2, 4}), InvalidInput);
}
