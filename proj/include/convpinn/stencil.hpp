#pragma once

#include <boost/rational.hpp>
#include <cmath>
#include <span>
#include <vector>

#include "convpinn/grid.hpp"

namespace convpinn::stencil {

using Rational = boost::rational<long long>;

/// Solve the square system A x = b exactly over rationals
/// (Gaussian elimination with nonzero pivoting).
inline std::vector<Rational> solve_rational(std::vector<std::vector<Rational>> A,
                                            std::vector<Rational> b) {
    const int n = int(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        for (int r = col; r < n; ++r)
            if (A[r][col] != Rational(0)) { piv = r; break; }
        if (piv < 0) throw NumericalError("singular rational system");
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const Rational f = A[r][col] / A[col][col];
            if (f == Rational(0)) continue;
            for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<Rational> x(n);
    for (int r = 0; r < n; ++r) x[r] = b[r] / A[r][r];
    return x;
}

/// Exact central-difference coefficients for d^deriv/dx^deriv with formal
/// accuracy order acc: acc+1 symmetric taps at offsets -acc/2 .. acc/2,
/// determined by the moment conditions
///   sum_k c_k k^p = p! * [p == deriv],   p = 0 .. acc + deriv - 1 (even part).
inline std::vector<Rational> central_difference_rationals(int deriv, int acc) {
    if (deriv != 1 && deriv != 2)
        throw InvalidInput("derivative order must be 1 or 2");
    if (acc != 2 && acc != 4 && acc != 6 && acc != 8)
        throw InvalidInput("accuracy order must be one of 2, 4, 6, 8");
    const int r = acc / 2;
    const int n = 2 * r + 1;
    std::vector<std::vector<Rational>> A(n, std::vector<Rational>(n));
    std::vector<Rational> b(n, Rational(0));
    long long fact = 1;
    for (int p = 0; p < n; ++p) {
        if (p > 0) fact *= p;
        for (int k = -r; k <= r; ++k) {
            long long kp = 1;
            for (int q = 0; q < p; ++q) kp *= k;
            A[p][k + r] = Rational(kp);
        }
        if (p == deriv) b[p] = Rational(fact);
    }
    return solve_rational(std::move(A), std::move(b));
}

/// Central-difference kernel with taps converted to double; apply as
/// out[i] = (1/d^deriv) * sum_k w[k] * line[i - radius + k].
struct StencilKernel {
    int deriv = 1;
    int acc = 2;
    std::vector<double> w;
    int radius() const { return acc / 2; }
};

inline StencilKernel central_difference_kernel(int deriv, int acc) {
    StencilKernel k{deriv, acc, {}};
    for (const Rational& c : central_difference_rationals(deriv, acc))
        k.w.push_back(boost::rational_cast<double>(c));
    return k;
}

/// Taylor extrapolation setup for virtual nodes beyond a boundary:
/// fit a degree-`degree` polynomial through the boundary node and the
/// first `fit_points` inward neighbours, then evaluate it at the
/// `n_virtual` mirror offsets outside the domain.
struct PaddingSpec {
    int n_virtual = 1;
    int degree = 2;
    int fit_points = 2;

    static PaddingSpec for_accuracy(int acc, int degree = 2, int fit_points = -1) {
        PaddingSpec s;
        s.n_virtual = acc / 2;
        s.degree = degree;
        s.fit_points = fit_points < 0 ? degree : fit_points;
        s.validate();
        return s;
    }
    void validate() const {
        if (n_virtual < 1) throw InvalidInput("padding needs n_virtual >= 1");
        if (degree < 1) throw InvalidInput("padding degree must be >= 1");
        if (fit_points < degree)
            throw InvalidInput("padding needs fit_points >= degree");
    }
};

namespace detail {

/// Solve the square system A x = b in doubles with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> A,
                                       std::vector<double> b) {
    const int n = int(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (A[piv][col] == 0.0) throw NumericalError("singular padding system");
        std::swap(A[col], A[piv]);
        std::swap(b[col], b[piv]);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = A[r][col] / A[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int r = 0; r < n; ++r) x[r] = b[r] / A[r][r];
    return x;
}

} // namespace detail

/// Coefficient table for the virtual nodes: row m-1 (m = 1..n_virtual) holds
/// fit_points+1 weights over [u(0), u(1), ..., u(fit_points)]; counting node
/// indices inward from the boundary node u(0), the virtual value is
///   u(-m) = sum_j coeff[m-1][j] * u(j).
/// Square fits (fit_points == degree) solve the Taylor system exactly;
/// over-determined fits use a ridge-regularised (1e-12) least-squares
/// pseudo-inverse.
inline std::vector<std::vector<double>> pad_coefficients(const PaddingSpec& s) {
    s.validate();
    const int F = s.fit_points, D = s.degree;
    // M[n-1][q-1] = n^q / q! maps Taylor coefficients to u(n) - u(0).
    std::vector<std::vector<double>> M(F, std::vector<double>(D));
    for (int n = 1; n <= F; ++n) {
        double fact = 1.0, npow = 1.0;
        for (int q = 1; q <= D; ++q) {
            fact *= q;
            npow *= n;
            M[n - 1][q - 1] = npow / fact;
        }
    }
    // P = pseudo-inverse of M (D x F): exact inverse when square.
    std::vector<std::vector<double>> P(D, std::vector<double>(F));
    if (F == D) {
        for (int col = 0; col < F; ++col) {
            std::vector<double> e(F, 0.0);
            e[col] = 1.0;
            auto x = detail::solve_dense(M, e);
            for (int q = 0; q < D; ++q) P[q][col] = x[q];
        }
    } else {
        std::vector<std::vector<double>> G(D, std::vector<double>(D, 0.0));
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) {
                for (int n = 0; n < F; ++n) G[a][b] += M[n][a] * M[n][b];
                if (a == b) G[a][b] += 1e-12;
            }
        std::vector<std::vector<double>> Ginv(D, std::vector<double>(D));
        for (int col = 0; col < D; ++col) {
            std::vector<double> e(D, 0.0);
            e[col] = 1.0;
            auto x = detail::solve_dense(G, e);
            for (int q = 0; q < D; ++q) Ginv[q][col] = x[q];
        }
        for (int q = 0; q < D; ++q)
            for (int n = 0; n < F; ++n) {
                double v = 0.0;
                for (int a = 0; a < D; ++a) v += Ginv[q][a] * M[n][a];
                P[q][n] = v;
            }
    }
    std::vector<std::vector<double>> coeff(s.n_virtual,
                                           std::vector<double>(F + 1, 0.0));
    for (int m = 1; m <= s.n_virtual; ++m) {
        // t[q-1] = (-m)^q / q!
        std::vector<double> t(D);
        double fact = 1.0, mpow = 1.0;
        for (int q = 1; q <= D; ++q) {
            fact *= q;
            mpow *= -double(m);
            t[q - 1] = mpow / fact;
        }
        double w0 = 1.0;
        for (int n = 0; n < F; ++n) {
            double wn = 0.0;
            for (int q = 0; q < D; ++q) wn += t[q] * P[q][n];
            coeff[m - 1][n + 1] = wn;
            w0 -= wn;
        }
        coeff[m - 1][0] = w0;
    }
    return coeff;
}

enum class PadSide { low, high };

/// Virtual node values beyond one end of a sampled line, ordered by
/// distance from the boundary (result[m-1] = value m steps outside).
inline std::vector<double> taylor_pad_line(std::span<const double> line,
                                           const PaddingSpec& s, PadSide side) {
    if (int(line.size()) < s.fit_points + 1)
        throw InvalidInput("line too short for padding fit");
    const auto coeff = pad_coefficients(s);
    const int L = int(line.size());
    std::vector<double> out(s.n_virtual);
    for (int m = 1; m <= s.n_virtual; ++m) {
        double v = 0.0;
        for (int j = 0; j <= s.fit_points; ++j) {
            const double u = side == PadSide::low ? line[j] : line[L - 1 - j];
            v += coeff[m - 1][j] * u;
        }
        out[m - 1] = v;
    }
    return out;
}

namespace detail {

/// Compensated (Kahan) dot product of kernel and window.
inline double kahan_conv(const double* win, const double* w, int n) {
    double sum = 0.0, comp = 0.0;
    for (int k = 0; k < n; ++k) {
        const double term = w[k] * win[k] - comp;
        const double next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    return sum;
}

inline void derivative_line(const double* line, int L, double* out,
                            const std::vector<double>& w, int radius,
                            const std::vector<std::vector<double>>& pad,
                            int fit_points, double inv_dpow,
                            std::vector<double>& scratch) {
    const int nv = radius;
    scratch.resize(std::size_t(L) + 2 * nv);
    // Work on line - line[0]: padding rows sum to 1 and the kernel sums to
    // 0, so the shift cancels in exact arithmetic; in floats it keeps
    // constant lines at exactly zero and trims cancellation error.
    const double base = line[0];
    for (int i = 0; i < L; ++i) scratch[std::size_t(nv) + i] = line[i] - base;
    for (int m = 1; m <= nv; ++m) {
        double lo = 0.0, hi = 0.0;
        for (int j = 0; j <= fit_points; ++j) {
            lo += pad[m - 1][j] * scratch[std::size_t(nv) + j];
            hi += pad[m - 1][j] * scratch[std::size_t(nv) + L - 1 - j];
        }
        scratch[nv - m] = lo;
        scratch[std::size_t(nv) + L - 1 + m] = hi;
    }
    const int n = 2 * radius + 1;
    for (int i = 0; i < L; ++i)
        out[i] = inv_dpow * kahan_conv(scratch.data() + i, w.data(), n);
}

} // namespace detail

/// Per-channel finite-difference derivative of a field along a grid axis
/// (axis 1 = rows, axis 2 = columns), using the central-difference kernel
/// of the given orders and Taylor padding at both ends of every line.
inline Field derivative(const Field& f, int axis, int deriv, int acc,
                        const PaddingSpec& spec) {
    if (axis != 1 && axis != 2) throw InvalidInput("axis must be 1 or 2");
    if (spec.n_virtual != acc / 2)
        throw InvalidInput("padding n_virtual must equal acc/2");
    const auto kernel = central_difference_kernel(deriv, acc);
    const auto pad = pad_coefficients(spec);
    const Grid2D& g = f.grid;
    const int L = axis == 1 ? g.nh : g.nw;
    if (L < spec.fit_points + 1)
        throw InvalidInput("grid too small along axis for padding fit");
    const double d = axis == 1 ? g.d1 : g.d2;
    const double inv_dpow = 1.0 / std::pow(d, deriv);

    Field out(g, f.channels);
    std::vector<double> line(L), dline(L), scratch;
    for (int c = 0; c < f.channels; ++c) {
        const int other = axis == 1 ? g.nw : g.nh;
        for (int t = 0; t < other; ++t) {
            if (axis == 1)
                for (int i = 0; i < L; ++i) line[i] = f.at(c, i, t);
            else
                for (int j = 0; j < L; ++j) line[j] = f.at(c, t, j);
            detail::derivative_line(line.data(), L, dline.data(), kernel.w,
                                    kernel.radius(), pad, spec.fit_points,
                                    inv_dpow, scratch);
            if (axis == 1)
                for (int i = 0; i < L; ++i) out.at(c, i, t) = dline[i];
            else
                for (int j = 0; j < L; ++j) out.at(c, t, j) = dline[j];
        }
    }
    return out;
}

inline Field derivative(const Field& f, int axis, int deriv, int acc) {
    return derivative(f, axis, deriv, acc, PaddingSpec::for_accuracy(acc));
}

} // namespace convpinn::stencil
