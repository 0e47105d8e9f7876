#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "convpinn/common.hpp"

namespace convpinn::optim {

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& s, double lr) {
    if (params.size() != grads.size() || params.size() != s.m.size() ||
        s.m.size() != s.v.size())
        throw InvalidInput("adam_step: size mismatch");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw InvalidInput("adam_step: learning rate must be positive");
    s.t += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, double(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, double(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

/// Loss callback: fills `grad` (same size as x) and returns the loss.
using LossFn =
    std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct LBFGSReport {
    int iterations = 0;              // accepted steps
    bool line_search_failed = false; // stopped early, last accepted params kept
    bool aborted_nan = false;        // NaN during search, entry params restored
    bool converged = false;          // gradient vanished
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_history; // loss after each accepted step
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s = std::max(s, std::abs(v));
    return s;
}

struct WolfeResult {
    double alpha = 0.0, phi = 0.0;
    bool ok = false, saw_nan = false;
};

/// Strong-Wolfe line search (bracket + zoom with quadratic interpolation);
/// c1 = 1e-4, c2 = 0.9.  `x`, `grad` hold the point/gradient at the accepted
/// step on success.
inline WolfeResult wolfe_search(const LossFn& f, std::vector<double>& x,
                                std::vector<double>& grad,
                                const std::vector<double>& x0,
                                const std::vector<double>& dir, double phi0,
                                double dphi0, double alpha_init) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    constexpr int max_evals = 40;
    WolfeResult r;

    auto eval = [&](double alpha, double& phi, double& dphi) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + alpha * dir[i];
        phi = f(x, grad);
        if (!std::isfinite(phi)) return false;
        dphi = dot(grad, dir);
        return std::isfinite(dphi);
    };

    auto zoom = [&](double lo, double phi_lo, double dphi_lo, double hi,
                    double phi_hi, int evals_left) {
        for (int k = 0; k < evals_left; ++k) {
            // Quadratic interpolation off the low end, guarded to the interior.
            double alpha = lo - 0.5 * dphi_lo * (hi - lo) * (hi - lo) /
                                    (phi_hi - phi_lo - dphi_lo * (hi - lo));
            const double width = std::abs(hi - lo);
            const double a_min = std::min(lo, hi) + 0.1 * width;
            const double a_max = std::max(lo, hi) - 0.1 * width;
            if (!std::isfinite(alpha) || alpha < a_min || alpha > a_max)
                alpha = 0.5 * (lo + hi);
            double phi, dphi;
            if (!eval(alpha, phi, dphi)) {
                r.saw_nan = true;
                return;
            }
            if (phi > phi0 + c1 * alpha * dphi0 || phi >= phi_lo) {
                hi = alpha;
                phi_hi = phi;
            } else {
                if (std::abs(dphi) <= -c2 * dphi0) {
                    r.ok = true;
                    r.alpha = alpha;
                    r.phi = phi;
                    return;
                }
                if (dphi * (hi - lo) >= 0.0) {
                    hi = lo;
                    phi_hi = phi_lo;
                }
                lo = alpha;
                phi_lo = phi;
                dphi_lo = dphi;
            }
            if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) return;
        }
    };

    double prev_alpha = 0.0, prev_phi = phi0, prev_dphi = dphi0;
    double alpha = alpha_init;
    for (int i = 0; i < max_evals; ++i) {
        double phi, dphi;
        if (!eval(alpha, phi, dphi)) {
            r.saw_nan = true;
            return r;
        }
        if (phi > phi0 + c1 * alpha * dphi0 || (i > 0 && phi >= prev_phi)) {
            zoom(prev_alpha, prev_phi, prev_dphi, alpha, phi, max_evals - i - 1);
            return r;
        }
        if (std::abs(dphi) <= -c2 * dphi0) {
            r.ok = true;
            r.alpha = alpha;
            r.phi = phi;
            return r;
        }
        if (dphi >= 0.0) {
            zoom(alpha, phi, dphi, prev_alpha, prev_phi, max_evals - i - 1);
            return r;
        }
        prev_alpha = alpha;
        prev_phi = phi;
        prev_dphi = dphi;
        alpha *= 2.0;
        if (alpha > 1e12) return r;
    }
    return r;
}

} // namespace detail

/// Two-loop L-BFGS with strong-Wolfe steps.  Accepted steps never increase
/// the loss.  A failed line search keeps the last accepted parameters; a NaN
/// during the search restores the entry parameters and sets `aborted_nan`.
inline LBFGSReport lbfgs_finetune(std::vector<double>& params, const LossFn& f,
                                  int epochs, int history,
                                  const std::function<void(int, double)>& on_step =
                                      nullptr) {
    if (epochs < 0) throw InvalidInput("lbfgs_finetune: epochs must be >= 0");
    if (history < 1) throw InvalidInput("lbfgs_finetune: history must be >= 1");

    const std::size_t n = params.size();
    const std::vector<double> entry = params;
    LBFGSReport rep;

    std::vector<double> grad(n, 0.0);
    double loss = f(params, grad);
    rep.initial_loss = rep.final_loss = loss;
    if (!std::isfinite(loss)) {
        params = entry;
        rep.aborted_nan = true;
        return rep;
    }

    std::vector<std::vector<double>> S, Y;
    std::vector<double> rho;
    std::vector<double> dir(n), x_try(n), grad_try(n);

    for (int it = 0; it < epochs; ++it) {
        const double gnorm = detail::inf_norm(grad);
        if (gnorm <= 1e-14 * std::max(1.0, detail::inf_norm(params))) {
            rep.converged = true;
            break;
        }

        // Two-loop recursion for dir = -H grad.
        dir = grad;
        std::vector<double> a(S.size());
        for (int k = int(S.size()) - 1; k >= 0; --k) {
            a[k] = rho[k] * detail::dot(S[k], dir);
            for (std::size_t i = 0; i < n; ++i) dir[i] -= a[k] * Y[k][i];
        }
        if (!S.empty()) {
            const double gamma =
                detail::dot(S.back(), Y.back()) / detail::dot(Y.back(), Y.back());
            for (double& v : dir) v *= gamma;
        }
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double b = rho[k] * detail::dot(Y[k], dir);
            for (std::size_t i = 0; i < n; ++i) dir[i] += (a[k] - b) * S[k][i];
        }
        for (double& v : dir) v = -v;

        double dphi0 = detail::dot(grad, dir);
        if (!(dphi0 < 0.0)) { // not a descent direction: restart from steepest
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
            dphi0 = detail::dot(grad, dir);
            if (!(dphi0 < 0.0)) {
                rep.converged = true;
                break;
            }
        }

        const double alpha0 =
            S.empty() ? std::min(1.0, 1.0 / std::max(1e-12, detail::inf_norm(grad)))
                      : 1.0;
        x_try = params;
        grad_try = grad;
        auto w = detail::wolfe_search(f, x_try, grad_try, params, dir, loss, dphi0,
                                      alpha0);
        if (w.saw_nan) {
            params = entry;
            rep.aborted_nan = true;
            rep.final_loss = rep.initial_loss;
            return rep;
        }
        if (!w.ok) {
            rep.line_search_failed = true;
            break;
        }

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_try[i] - params[i];
            y[i] = grad_try[i] - grad[i];
        }
        const double sy = detail::dot(s, y);
        if (sy > 1e-12 * std::sqrt(detail::dot(s, s)) * std::sqrt(detail::dot(y, y))) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (int(S.size()) > history) {
                S.erase(S.begin());
                Y.erase(Y.begin());
                rho.erase(rho.begin());
            }
        }

        params = x_try;
        grad = grad_try;
        loss = w.phi;
        rep.iterations += 1;
        rep.final_loss = loss;
        rep.loss_history.push_back(loss);
        if (on_step) on_step(rep.iterations, loss);
    }
    return rep;
}

} // namespace convpinn::optim
