#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "convpinn/optim.hpp"

using namespace convpinn;
using namespace convpinn::optim;

TEST_CASE("adam_step: zero gradient leaves fresh parameters unchanged",
          "[optim]") {
    std::vector<double> p{1.0, -2.5, 0.75};
    const auto before = p;
    AdamState s(p.size());
    adam_step(p, {0.0, 0.0, 0.0}, s, 1e-4);
    REQUIRE(p == before);
    REQUIRE(s.t == 1);
}

TEST_CASE("adam_step: first scalar update is about -lr", "[optim]") {
    std::vector<double> p{0.0};
    AdamState s(1);
    adam_step(p, {1.0}, s, 1e-4);
    // m_hat = v_hat = 1 after bias correction, so delta = -lr/(1 + eps).
    REQUIRE_THAT(p[0], Catch::Matchers::WithinRel(-1e-4, 1e-7));
    REQUIRE(p[0] > -1e-4); // eps shaves the magnitude slightly
}

TEST_CASE("adam_step: constant gradient drives the step toward lr * sign",
          "[optim]") {
    std::vector<double> p{0.0, 0.0};
    AdamState s(2);
    double prev0 = 0.0, prev1 = 0.0, step0 = 0.0, step1 = 0.0;
    for (int t = 0; t < 500; ++t) {
        adam_step(p, {3.0, -0.02}, s, 1e-4);
        step0 = p[0] - prev0;
        step1 = p[1] - prev1;
        prev0 = p[0];
        prev1 = p[1];
    }
    REQUIRE_THAT(step0, Catch::Matchers::WithinRel(-1e-4, 1e-3));
    REQUIRE_THAT(step1, Catch::Matchers::WithinRel(1e-4, 1e-3));
}

TEST_CASE("adam_step: matches an independent reference implementation",
          "[optim]") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist(0.0, 1.0);
    const std::size_t n = 11;
    std::vector<double> p(n), pref(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = pref[i] = dist(rng);

    AdamState s(n);
    std::vector<double> m(n, 0.0), v(n, 0.0);
    const double lr = 3e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int t = 1; t <= 25; ++t) {
        std::vector<double> g(n);
        for (auto& gi : g) gi = dist(rng);
        adam_step(p, g, s, lr);
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(b1, t));
            const double vh = v[i] / (1 - std::pow(b2, t));
            pref[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE_THAT(p[i], Catch::Matchers::WithinRel(pref[i], 1e-13));
}

TEST_CASE("adam_step: input validation", "[optim]") {
    std::vector<double> p{0.0};
    AdamState s(1);
    REQUIRE_THROWS_AS(adam_step(p, {1.0, 2.0}, s, 1e-4), InvalidInput);
    REQUIRE_THROWS_AS(adam_step(p, {1.0}, s, 0.0), InvalidInput);
    REQUIRE_THROWS_AS(adam_step(p, {1.0}, s, -1.0), InvalidInput);
    AdamState wrong(3);
    REQUIRE_THROWS_AS(adam_step(p, {1.0}, wrong, 1e-4), InvalidInput);
}

namespace {

/// f(x) = 0.5 (x-c)' A (x-c) with SPD A = L L'; grad = A (x-c).
struct Quadratic {
    std::vector<std::vector<double>> A;
    std::vector<double> c;

    static Quadratic make5() {
        Quadratic q;
        const std::size_t n = 5;
        std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> u(0.2, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) L[i][j] = 0.3 * u(rng);
            L[i][i] = 1.0 + double(i) * 0.8; // condition number ~ 20
        }
        q.A.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    q.A[i][j] += L[i][k] * L[j][k];
        q.c = {1.0, -2.0, 0.5, 3.0, -0.25};
        return q;
    }

    double operator()(const std::vector<double>& x, std::vector<double>& g) const {
        const std::size_t n = c.size();
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - c[i];
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = 0.0;
            for (std::size_t j = 0; j < n; ++j) g[i] += A[i][j] * d[j];
            f += 0.5 * d[i] * g[i];
        }
        return f;
    }
};

} // namespace

TEST_CASE("lbfgs_finetune: convex quadratic converges to the minimizer",
          "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x(5, 0.0);
    auto rep = lbfgs_finetune(
        x, [&](const std::vector<double>& p, std::vector<double>& g) { return q(p, g); },
        20, 20);
    for (std::size_t i = 0; i < 5; ++i)
        REQUIRE_THAT(x[i], Catch::Matchers::WithinAbs(q.c[i], 1e-10));
    REQUIRE(rep.final_loss <= 1e-18);
    REQUIRE_FALSE(rep.aborted_nan);
    REQUIRE(rep.iterations <= 20);
}

TEST_CASE("lbfgs_finetune: short memory still converges on the quadratic",
          "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x(5, 0.0);
    auto rep = lbfgs_finetune(
        x, [&](const std::vector<double>& p, std::vector<double>& g) { return q(p, g); },
        40, 3);
    for (std::size_t i = 0; i < 5; ++i)
        REQUIRE_THAT(x[i], Catch::Matchers::WithinAbs(q.c[i], 1e-8));
    REQUIRE(rep.final_loss <= rep.initial_loss);
}

TEST_CASE("lbfgs_finetune: start at the minimum takes zero steps", "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x = q.c;
    const auto before = x;
    auto rep = lbfgs_finetune(
        x, [&](const std::vector<double>& p, std::vector<double>& g) { return q(p, g); },
        20, 20);
    REQUIRE(rep.iterations == 0);
    REQUIRE(rep.converged);
    REQUIRE(x == before);
    REQUIRE(rep.loss_history.empty());
}

TEST_CASE("lbfgs_finetune: accepted steps never increase the loss", "[optim]") {
    // Rosenbrock: a classic non-quadratic with a curved valley.
    auto rosen = [](const std::vector<double>& x, std::vector<double>& g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    std::vector<double> x{-1.2, 1.0};
    auto rep = lbfgs_finetune(x, rosen, 60, 10);
    REQUIRE(rep.final_loss <= rep.initial_loss);
    double prev = rep.initial_loss;
    for (double v : rep.loss_history) {
        REQUIRE(v <= prev);
        prev = v;
    }
    REQUIRE(rep.final_loss < 1e-8); // reaches the (1,1) minimum
}

TEST_CASE("lbfgs_finetune: NaN during line search restores entry parameters",
          "[optim]") {
    auto f = [](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = -1.0;
        if (x[0] > 2.0) return std::numeric_limits<double>::quiet_NaN();
        return -x[0];
    };
    std::vector<double> x{1.9};
    const auto entry = x;
    auto rep = lbfgs_finetune(x, f, 10, 5);
    REQUIRE(rep.aborted_nan);
    REQUIRE(x == entry);
    REQUIRE(rep.final_loss == rep.initial_loss);
}

TEST_CASE("lbfgs_finetune: unbounded descent fails the line search cleanly",
          "[optim]") {
    auto f = [](const std::vector<double>& x, std::vector<double>& g) {
        g[0] = 1.0;
        return x[0];
    };
    std::vector<double> x{0.0};
    auto rep = lbfgs_finetune(x, f, 10, 5);
    REQUIRE(rep.line_search_failed);
    REQUIRE(rep.iterations == 0);
    REQUIRE(x[0] == 0.0);
    REQUIRE_FALSE(rep.aborted_nan);
}

TEST_CASE("lbfgs_finetune: epochs 0 only evaluates", "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x(5, 1.0);
    const auto before = x;
    int calls = 0;
    auto rep = lbfgs_finetune(
        x,
        [&](const std::vector<double>& p, std::vector<double>& g) {
            ++calls;
            return q(p, g);
        },
        0, 20);
    REQUIRE(x == before);
    REQUIRE(calls == 1);
    REQUIRE(rep.iterations == 0);
    REQUIRE(rep.initial_loss == rep.final_loss);
}

TEST_CASE("lbfgs_finetune: step callback sees every accepted step", "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x(5, 0.0);
    std::vector<std::pair<int, double>> seen;
    auto rep = lbfgs_finetune(
        x, [&](const std::vector<double>& p, std::vector<double>& g) { return q(p, g); },
        20, 20, [&](int it, double loss) { seen.emplace_back(it, loss); });
    REQUIRE(int(seen.size()) == rep.iterations);
    for (std::size_t k = 0; k < seen.size(); ++k) {
        REQUIRE(seen[k].first == int(k) + 1);
        REQUIRE(seen[k].second == rep.loss_history[k]);
    }
}

TEST_CASE("lbfgs_finetune: argument validation", "[optim]") {
    auto f = [](const std::vector<double>&, std::vector<double>& g) {
        g[0] = 0.0;
        return 0.0;
    };
    std::vector<double> x{0.0};
    REQUIRE_THROWS_AS(lbfgs_finetune(x, f, -1, 5), InvalidInput);
    REQUIRE_THROWS_AS(lbfgs_finetune(x, f, 5, 0), InvalidInput);
}

TEST_CASE("lbfgs_finetune: deterministic across repeated runs", "[optim]") {
    auto q = Quadratic::make5();
    std::vector<double> x1(5, 0.25), x2(5, 0.25);
    auto f = [&](const std::vector<double>& p, std::vector<double>& g) {
        return q(p, g);
    };
    auto r1 = lbfgs_finetune(x1, f, 12, 8);
    auto r2 = lbfgs_finetune(x2, f, 12, 8);
    REQUIRE(x1 == x2);
    REQUIRE(r1.final_loss == r2.final_loss);
    REQUIRE(r1.loss_history == r2.loss_history);
}
