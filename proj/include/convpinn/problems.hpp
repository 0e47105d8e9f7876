#pragma once

#include <array>
#include <functional>
#include <optional>

#include "convpinn/autodiff.hpp"
#include "convpinn/grid.hpp"
#include "convpinn/stencil.hpp"

namespace convpinn::problems {

/// General second-order linear PDE on a rectangle:
///   a u_xx + b u_xy + c u_yy + d u_x + e u_y + f u = g
/// with x along grid axis 1 and y along axis 2.  Dirichlet data is given
/// per edge as a function of the coordinate running along that edge; edges
/// without a condition stay empty.
struct LinearPDEProblem {
    std::string name = "custom";
    double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0, g = 0;
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 2.0;
    std::array<std::optional<std::function<double(double)>>, 4> bc;

    char classification() const {
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return 'e';
        if (disc == 0.0) return 'p';
        return 'h';
    }
};

inline LinearPDEProblem elliptic_problem() {
    LinearPDEProblem p;
    p.name = "elliptic";
    p.a = 1; p.b = 0; p.c = 1; p.d = 2; p.e = 2; p.f = 4; p.g = 4;
    p.bc[int(Edge::low1)] = [](double y) { return -std::sin(M_PI * y); };
    p.bc[int(Edge::high1)] = [](double y) { return std::sin(M_PI * y); };
    p.bc[int(Edge::low2)] = [](double x) { return std::sin(2.0 * M_PI * x); };
    p.bc[int(Edge::high2)] = [](double x) { return -std::sin(2.0 * M_PI * x); };
    return p;
}

/// Parabolic instance: one characteristic line; no condition on the y=2
/// edge (the state there follows from marching in +y).
inline LinearPDEProblem parabolic_problem() {
    LinearPDEProblem p;
    p.name = "parabolic";
    p.a = 1; p.b = 0; p.c = 0; p.d = -2; p.e = -2; p.f = 4; p.g = 4;
    p.bc[int(Edge::low1)] = [](double y) { return -std::sin(M_PI * y); };
    p.bc[int(Edge::high1)] = [](double y) { return std::sin(M_PI * y); };
    p.bc[int(Edge::low2)] = [](double x) { return std::sin(2.0 * M_PI * x); };
    return p;
}

inline LinearPDEProblem hyperbolic_problem() {
    LinearPDEProblem p;
    p.name = "hyperbolic";
    p.a = 1; p.b = 0; p.c = -1; p.d = 0; p.e = 0; p.f = 0; p.g = 0;
    p.bc[int(Edge::low1)] = [](double) { return 0.0; };
    p.bc[int(Edge::high1)] = [](double) { return 0.0; };
    p.bc[int(Edge::low2)] = [](double x) { return std::sin(2.0 * M_PI * x); };
    p.bc[int(Edge::high2)] = [](double x) { return std::sin(2.0 * M_PI * x); };
    return p;
}

/// Axisymmetric swirl flow in cylindrical (r, z) coordinates; channels are
/// (u, v, w, p) = (axial, radial, azimuthal velocity, pressure).  The
/// source text quotes lengths in mm; extents here are in metres so that
/// rho, nu and the velocities stay in SI units.
struct NavierStokesProblem {
    double rho = 1.1614;       // kg/m^3
    double nu = 1.5895;        // m^2/s (quoted verbatim)
    double r_max = 0.0015;     // m
    double z_max = 0.018;      // m
    double inlet_speed = 5.88; // m/s, u and w on the inlet band
    double band_lo = 0.0003;   // m, inlet band in r at z=0
    double band_hi = 0.0007;   // m
};

/// Analytic scalar field with closed-form partial derivatives along grid
/// axes 1 and 2 (x,y for linear problems; r,z for the swirl system).
struct ScalarField2D {
    std::function<double(double, double)> f, d1, d2, d11, d22, d12;
};

struct ManufacturedSolution {
    std::string name;
    std::vector<ScalarField2D> fields; // one per channel
};

struct ProblemInstance {
    std::string name;
    enum class Kind { linear, ns } kind = Kind::linear;
    LinearPDEProblem lin;
    NavierStokesProblem ns;
    std::optional<ManufacturedSolution> ms;
    InitMode init_mode = InitMode::all_boundaries;
    Edge upstream_edge = Edge::low2;

    int channels() const { return kind == Kind::linear ? 1 : 4; }
    bool is_mms() const { return ms.has_value(); }
};

inline Grid2D grid_for(const ProblemInstance& pr, int nh, int nw) {
    if (pr.kind == ProblemInstance::Kind::linear)
        return Grid2D::from_extent(nh, nw, pr.lin.x0, pr.lin.x1, pr.lin.y0,
                                   pr.lin.y1);
    return Grid2D::from_extent(nh, nw, 0.0, pr.ns.r_max, 0.0, pr.ns.z_max,
                               Geometry::axisymmetric(1));
}

// ---------------------------------------------------------------------------
// Residual evaluators
// ---------------------------------------------------------------------------

/// Residual of the general linear PDE at every node, derivatives by padded
/// central differences.  When `forcing` is given it replaces the constant g
/// (manufactured-solution right-hand side).
inline Field linear_residual(const Field& u, const LinearPDEProblem& prob,
                             int acc, const stencil::PaddingSpec& spec,
                             const Field* forcing = nullptr) {
    if (u.channels != 1)
        throw InvalidInput("linear_residual expects a single channel");
    if (forcing && !forcing->grid.same_layout(u.grid))
        throw InvalidInput("forcing grid mismatch");
    const Grid2D& g = u.grid;
    Field res(g, 1);
    const Field ux = stencil::derivative(u, 1, 1, acc, spec);
    const Field uy = stencil::derivative(u, 2, 1, acc, spec);
    Field uxx, uyy, uxy;
    if (prob.a != 0.0) uxx = stencil::derivative(u, 1, 2, acc, spec);
    if (prob.c != 0.0) uyy = stencil::derivative(u, 2, 2, acc, spec);
    if (prob.b != 0.0) uxy = stencil::derivative(uy, 1, 1, acc, spec);
    for (std::size_t k = 0; k < res.data.size(); ++k) {
        double r = prob.d * ux.data[k] + prob.e * uy.data[k] +
                   prob.f * u.data[k] -
                   (forcing ? forcing->data[k] : prob.g);
        if (prob.a != 0.0) r += prob.a * uxx.data[k];
        if (prob.c != 0.0) r += prob.c * uyy.data[k];
        if (prob.b != 0.0) r += prob.b * uxy.data[k];
        res.data[k] = r;
    }
    return res;
}

/// Graph form of linear_residual (same discretization, differentiable).
inline ad::Var linear_residual_graph(ad::Tape& t, ad::Var u,
                                     const LinearPDEProblem& prob,
                                     const Grid2D& g, int acc,
                                     const stencil::PaddingSpec& spec,
                                     const Field* forcing = nullptr) {
    using ad::Var;
    auto d = [&](Var x, int axis, int deriv) {
        return ad::derivative_graph(t, x, axis, deriv, acc, spec,
                                    axis == 1 ? g.d1 : g.d2);
    };
    Var uy = d(u, 2, 1);
    Var acc_v = t.scale(d(u, 1, 1), prob.d);
    acc_v = t.add(acc_v, t.scale(uy, prob.e));
    acc_v = t.add(acc_v, t.scale(u, prob.f));
    if (prob.a != 0.0) acc_v = t.add(acc_v, t.scale(d(u, 1, 2), prob.a));
    if (prob.c != 0.0) acc_v = t.add(acc_v, t.scale(d(u, 2, 2), prob.c));
    if (prob.b != 0.0) acc_v = t.add(acc_v, t.scale(d(uy, 1, 1), prob.b));
    if (forcing) {
        acc_v = t.sub(acc_v, t.constant_field(*forcing));
    } else if (prob.g != 0.0) {
        acc_v = t.add(acc_v, t.constant({1, g.nh, g.nw},
                                        std::vector<double>(
                                            std::size_t(g.nh) * g.nw, -prob.g)));
    }
    return acc_v;
}

namespace detail {
/// 1/r per node; exactly 0 on the axis row so that axis entries stay
/// finite (they are boundary nodes and never enter the PDE loss).
inline Field inverse_radius(const Grid2D& g) {
    Field rinv(g, 1);
    for (int i = 0; i < g.nh; ++i)
        for (int j = 0; j < g.nw; ++j) {
            const double r = g.radius(i, j);
            rinv.at(0, i, j) = r == 0.0 ? 0.0 : 1.0 / r;
        }
    return rinv;
}
} // namespace detail

/// Residuals of the axisymmetric swirl system, channels
/// (continuity, z-momentum, r-momentum, theta-momentum):
///   u_z + v_r + v/r
///   u u_z + v u_r + (1/rho) p_z - nu (u_zz + u_rr + u_r/r)
///   u v_z + v v_r - w^2/r + (1/rho) p_r - nu (v_zz + v_rr + v_r/r - v/r^2)
///   u w_z + v w_r - v w/r - nu (w_zz + w_rr + w_r/r - w/r^2)
/// Axis-row (r = 0) entries are set to 0: those are boundary nodes and the
/// system is not evaluated there.  When `forcing` is given it is
/// subtracted channelwise (manufactured right-hand side).
inline Field ns_residuals(const Field& uvwp, const NavierStokesProblem& prob,
                          int acc, const stencil::PaddingSpec& spec,
                          const Field* forcing = nullptr) {
    const Grid2D& g = uvwp.grid;
    if (uvwp.channels != 4)
        throw InvalidInput("ns_residuals expects channels (u, v, w, p)");
    if (g.geometry.kind != GeometryKind::axisymmetric ||
        g.geometry.radial_axis != 1)
        throw InvalidInput("ns_residuals needs an axisymmetric grid, radial axis 1");
    if (forcing && (!forcing->grid.same_layout(g) || forcing->channels != 4))
        throw InvalidInput("forcing shape mismatch");
    const Field u = uvwp.channel(0), v = uvwp.channel(1), w = uvwp.channel(2),
                p = uvwp.channel(3);
    auto d = [&](const Field& x, int axis, int deriv) {
        return stencil::derivative(x, axis, deriv, acc, spec);
    };
    const Field ur = d(u, 1, 1), uz = d(u, 2, 1), urr = d(u, 1, 2), uzz = d(u, 2, 2);
    const Field vr = d(v, 1, 1), vz = d(v, 2, 1), vrr = d(v, 1, 2), vzz = d(v, 2, 2);
    const Field wr = d(w, 1, 1), wz = d(w, 2, 1), wrr = d(w, 1, 2), wzz = d(w, 2, 2);
    const Field pr = d(p, 1, 1), pz = d(p, 2, 1);
    const double inv_rho = 1.0 / prob.rho, nu = prob.nu;
    Field res(g, 4);
    for (int i = 0; i < g.nh; ++i)
        for (int j = 0; j < g.nw; ++j) {
            const double r = g.radius(i, j);
            if (r == 0.0) continue; // axis row stays zero
            const std::size_t k = std::size_t(i) * g.nw + j;
            const double ri = 1.0 / r;
            res.at(0, i, j) = uz.data[k] + vr.data[k] + v.data[k] * ri;
            res.at(1, i, j) =
                u.data[k] * uz.data[k] + v.data[k] * ur.data[k] +
                inv_rho * pz.data[k] -
                nu * (uzz.data[k] + urr.data[k] + ur.data[k] * ri);
            res.at(2, i, j) =
                u.data[k] * vz.data[k] + v.data[k] * vr.data[k] -
                w.data[k] * w.data[k] * ri + inv_rho * pr.data[k] -
                nu * (vzz.data[k] + vrr.data[k] + vr.data[k] * ri -
                      v.data[k] * ri * ri);
            res.at(3, i, j) =
                u.data[k] * wz.data[k] + v.data[k] * wr.data[k] -
                v.data[k] * w.data[k] * ri -
                nu * (wzz.data[k] + wrr.data[k] + wr.data[k] * ri -
                      w.data[k] * ri * ri);
        }
    if (forcing)
        for (std::size_t k = 0; k < res.data.size(); ++k)
            res.data[k] -= forcing->data[k];
    // forcing may carry nonzero axis entries; re-zero the axis rows
    for (int c = 0; c < 4; ++c)
        for (int j = 0; j < g.nw; ++j) res.at(c, 0, j) = 0.0;
    return res;
}

/// Residual vector at one node.  The axis row carries boundary
/// conditions, not the PDE, so evaluation at r = 0 is a caller error.
inline std::array<double, 4> ns_residual_at(const Field& res, int i, int j) {
    if (res.channels != 4)
        throw InvalidInput("ns_residual_at expects 4 residual channels");
    if (res.grid.radius(i, j) == 0.0)
        throw InvalidInput("the swirl system is not evaluated at r = 0 "
                           "(axis nodes carry boundary conditions)");
    return {res.at(0, i, j), res.at(1, i, j), res.at(2, i, j),
            res.at(3, i, j)};
}

/// Graph form of ns_residuals; returns the four residual planes.
inline std::array<ad::Var, 4>
ns_residuals_graph(ad::Tape& t, ad::Var uvwp, const NavierStokesProblem& prob,
                   const Grid2D& g, int acc, const stencil::PaddingSpec& spec,
                   const Field* forcing = nullptr) {
    using ad::Var;
    if (t.shape(uvwp).c != 4)
        throw InvalidInput("ns_residuals_graph expects 4 channels");
    if (g.geometry.kind != GeometryKind::axisymmetric ||
        g.geometry.radial_axis != 1)
        throw InvalidInput("ns_residuals_graph needs an axisymmetric grid");
    const Field rinv_f = detail::inverse_radius(g);
    Var rinv = t.constant_field(rinv_f);
    Field rinv2_f = rinv_f;
    for (auto& x : rinv2_f.data) x *= x;
    Var rinv2 = t.constant_field(rinv2_f);
    Var u = t.slice_channel(uvwp, 0);
    Var v = t.slice_channel(uvwp, 1);
    Var w = t.slice_channel(uvwp, 2);
    Var p = t.slice_channel(uvwp, 3);
    auto d = [&](Var x, int axis, int deriv) {
        return ad::derivative_graph(t, x, axis, deriv, acc, spec,
                                    axis == 1 ? g.d1 : g.d2);
    };
    const double inv_rho = 1.0 / prob.rho, nu = prob.nu;
    Var ur = d(u, 1, 1), uz = d(u, 2, 1);
    Var vr = d(v, 1, 1), vz = d(v, 2, 1);
    Var wr = d(w, 1, 1), wz = d(w, 2, 1);

    Var cont = t.add(t.add(uz, vr), t.mul(v, rinv));

    Var visc_u = t.add(t.add(d(u, 2, 2), d(u, 1, 2)), t.mul(ur, rinv));
    Var mz = t.add(t.mul(u, uz), t.mul(v, ur));
    mz = t.add(mz, t.scale(d(p, 2, 1), inv_rho));
    mz = t.sub(mz, t.scale(visc_u, nu));

    Var visc_v = t.add(t.add(d(v, 2, 2), d(v, 1, 2)), t.mul(vr, rinv));
    visc_v = t.sub(visc_v, t.mul(v, rinv2));
    Var mr = t.add(t.mul(u, vz), t.mul(v, vr));
    mr = t.sub(mr, t.mul(t.mul(w, w), rinv));
    mr = t.add(mr, t.scale(d(p, 1, 1), inv_rho));
    mr = t.sub(mr, t.scale(visc_v, nu));

    Var visc_w = t.add(t.add(d(w, 2, 2), d(w, 1, 2)), t.mul(wr, rinv));
    visc_w = t.sub(visc_w, t.mul(w, rinv2));
    Var mt = t.add(t.mul(u, wz), t.mul(v, wr));
    mt = t.sub(mt, t.mul(t.mul(v, w), rinv));
    mt = t.sub(mt, t.scale(visc_w, nu));

    std::array<ad::Var, 4> out{cont, mz, mr, mt};
    if (forcing) {
        for (int c = 0; c < 4; ++c)
            out[c] = t.sub(out[c], t.constant_field(forcing->channel(c)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manufactured solutions
// ---------------------------------------------------------------------------

inline Field analytic_field(const ManufacturedSolution& ms, const Grid2D& g) {
    Field out(g, int(ms.fields.size()));
    for (int c = 0; c < out.channels; ++c)
        for (int i = 0; i < g.nh; ++i)
            for (int j = 0; j < g.nw; ++j)
                out.at(c, i, j) = ms.fields[c].f(g.coord1(i), g.coord2(j));
    return out;
}

/// Exact left-hand side of the governing equations evaluated from the
/// analytic derivatives, so that residual(analytic) - forcing -> 0 under
/// refinement.
inline Field manufactured_forcing(const LinearPDEProblem& prob,
                                  const ManufacturedSolution& ms,
                                  const Grid2D& g) {
    if (ms.fields.size() != 1)
        throw InvalidInput("linear forcing needs a single-channel solution");
    const auto& s = ms.fields[0];
    Field out(g, 1);
    for (int i = 0; i < g.nh; ++i)
        for (int j = 0; j < g.nw; ++j) {
            const double x = g.coord1(i), y = g.coord2(j);
            out.at(0, i, j) = prob.a * s.d11(x, y) + prob.b * s.d12(x, y) +
                              prob.c * s.d22(x, y) + prob.d * s.d1(x, y) +
                              prob.e * s.d2(x, y) + prob.f * s.f(x, y);
        }
    return out;
}

inline Field manufactured_forcing(const NavierStokesProblem& prob,
                                  const ManufacturedSolution& ms,
                                  const Grid2D& g) {
    if (ms.fields.size() != 4)
        throw InvalidInput("swirl forcing needs 4 channels");
    const auto& U = ms.fields[0];
    const auto& V = ms.fields[1];
    const auto& W = ms.fields[2];
    const auto& P = ms.fields[3];
    const double inv_rho = 1.0 / prob.rho, nu = prob.nu;
    Field out(g, 4);
    for (int i = 0; i < g.nh; ++i)
        for (int j = 0; j < g.nw; ++j) {
            const double r = g.coord1(i), z = g.coord2(j);
            if (r == 0.0) continue; // axis row excluded
            const double ri = 1.0 / r;
            const double u = U.f(r, z), ur = U.d1(r, z), uz = U.d2(r, z);
            const double urr = U.d11(r, z), uzz = U.d22(r, z);
            const double v = V.f(r, z), vr = V.d1(r, z), vz = V.d2(r, z);
            const double vrr = V.d11(r, z), vzz = V.d22(r, z);
            const double w = W.f(r, z), wr = W.d1(r, z), wz = W.d2(r, z);
            const double wrr = W.d11(r, z), wzz = W.d22(r, z);
            const double pr = P.d1(r, z), pz = P.d2(r, z);
            out.at(0, i, j) = uz + vr + v * ri;
            out.at(1, i, j) =
                u * uz + v * ur + inv_rho * pz - nu * (uzz + urr + ur * ri);
            out.at(2, i, j) = u * vz + v * vr - w * w * ri + inv_rho * pr -
                              nu * (vzz + vrr + vr * ri - v * ri * ri);
            out.at(3, i, j) = u * wz + v * wr - v * w * ri -
                              nu * (wzz + wrr + wr * ri - w * ri * ri);
        }
    return out;
}

namespace detail {

/// sin(pi x) * exp(-y/2): a smooth non-polynomial single-channel field.
inline ManufacturedSolution lin_trig_solution() {
    const double pi = M_PI;
    ScalarField2D s;
    s.f = [pi](double x, double y) { return std::sin(pi * x) * std::exp(-y / 2); };
    s.d1 = [pi](double x, double y) {
        return pi * std::cos(pi * x) * std::exp(-y / 2);
    };
    s.d2 = [pi](double x, double y) {
        return -0.5 * std::sin(pi * x) * std::exp(-y / 2);
    };
    s.d11 = [pi](double x, double y) {
        return -pi * pi * std::sin(pi * x) * std::exp(-y / 2);
    };
    s.d22 = [pi](double x, double y) {
        return 0.25 * std::sin(pi * x) * std::exp(-y / 2);
    };
    s.d12 = [pi](double x, double y) {
        return -0.5 * pi * std::cos(pi * x) * std::exp(-y / 2);
    };
    return {"lin-trig", {s}};
}

/// Low-degree polynomial swirl fields (v, w vanish like r^2 at the axis;
/// du/dr = 0 at r = 0).
inline ManufacturedSolution ns_poly_solution(const NavierStokesProblem& ns) {
    const double R2 = ns.r_max * ns.r_max, Z = ns.z_max;
    ManufacturedSolution ms;
    ms.name = "ns-poly";
    ScalarField2D u;
    u.f = [=](double r, double z) { return 1.0 + r * r * z / (R2 * Z); };
    u.d1 = [=](double r, double z) { return 2.0 * r * z / (R2 * Z); };
    u.d2 = [=](double r, double) { return r * r / (R2 * Z); };
    u.d11 = [=](double, double z) { return 2.0 * z / (R2 * Z); };
    u.d22 = [=](double, double) { return 0.0; };
    u.d12 = [=](double r, double) { return 2.0 * r / (R2 * Z); };
    ScalarField2D v;
    v.f = [=](double r, double z) { return r * r * (1.0 - z / Z) / R2; };
    v.d1 = [=](double r, double z) { return 2.0 * r * (1.0 - z / Z) / R2; };
    v.d2 = [=](double r, double) { return -r * r / (R2 * Z); };
    v.d11 = [=](double, double z) { return 2.0 * (1.0 - z / Z) / R2; };
    v.d22 = [=](double, double) { return 0.0; };
    v.d12 = [=](double r, double) { return -2.0 * r / (R2 * Z); };
    ScalarField2D w;
    w.f = [=](double r, double z) { return r * r * (0.5 + z / Z) / R2; };
    w.d1 = [=](double r, double z) { return 2.0 * r * (0.5 + z / Z) / R2; };
    w.d2 = [=](double r, double) { return r * r / (R2 * Z); };
    w.d11 = [=](double, double z) { return 2.0 * (0.5 + z / Z) / R2; };
    w.d22 = [=](double, double) { return 0.0; };
    w.d12 = [=](double r, double) { return 2.0 * r / (R2 * Z); };
    ScalarField2D p;
    p.f = [=](double r, double z) {
        const double q = 1.0 - z / Z;
        return 2.0 * r * r * q * q / R2;
    };
    p.d1 = [=](double r, double z) {
        const double q = 1.0 - z / Z;
        return 4.0 * r * q * q / R2;
    };
    p.d2 = [=](double r, double z) {
        return -4.0 * r * r * (1.0 - z / Z) / (R2 * Z);
    };
    p.d11 = [=](double, double z) {
        const double q = 1.0 - z / Z;
        return 4.0 * q * q / R2;
    };
    p.d22 = [=](double r, double) { return 4.0 * r * r / (R2 * Z * Z); };
    p.d12 = [=](double r, double z) {
        return -8.0 * r * (1.0 - z / Z) / (R2 * Z);
    };
    ms.fields = {u, v, w, p};
    return ms;
}

/// Smooth trigonometric swirl fields with the same axis behaviour.
inline ManufacturedSolution ns_trig_solution(const NavierStokesProblem& ns) {
    const double R = ns.r_max, Z = ns.z_max;
    const double al = M_PI / (2.0 * R); // u radial wavenumber
    const double b = M_PI / Z;          // axial wavenumber
    const double be = M_PI / R;         // p radial wavenumber
    const double ga = M_PI / (2.0 * Z); // p axial wavenumber
    ManufacturedSolution ms;
    ms.name = "ns-trig";
    ScalarField2D u;
    u.f = [=](double r, double z) {
        return std::cos(al * r) * (1.0 + 0.5 * std::sin(b * z));
    };
    u.d1 = [=](double r, double z) {
        return -al * std::sin(al * r) * (1.0 + 0.5 * std::sin(b * z));
    };
    u.d2 = [=](double r, double z) {
        return std::cos(al * r) * 0.5 * b * std::cos(b * z);
    };
    u.d11 = [=](double r, double z) {
        return -al * al * std::cos(al * r) * (1.0 + 0.5 * std::sin(b * z));
    };
    u.d22 = [=](double r, double z) {
        return -std::cos(al * r) * 0.5 * b * b * std::sin(b * z);
    };
    u.d12 = [=](double r, double z) {
        return -al * std::sin(al * r) * 0.5 * b * std::cos(b * z);
    };
    ScalarField2D v; // (r^2/R^2 - r^3/R^3) sin(b z)
    const double R2 = R * R, R3 = R * R * R;
    v.f = [=](double r, double z) {
        return (r * r / R2 - r * r * r / R3) * std::sin(b * z);
    };
    v.d1 = [=](double r, double z) {
        return (2.0 * r / R2 - 3.0 * r * r / R3) * std::sin(b * z);
    };
    v.d2 = [=](double r, double z) {
        return (r * r / R2 - r * r * r / R3) * b * std::cos(b * z);
    };
    v.d11 = [=](double r, double z) {
        return (2.0 / R2 - 6.0 * r / R3) * std::sin(b * z);
    };
    v.d22 = [=](double r, double z) {
        return -(r * r / R2 - r * r * r / R3) * b * b * std::sin(b * z);
    };
    v.d12 = [=](double r, double z) {
        return (2.0 * r / R2 - 3.0 * r * r / R3) * b * std::cos(b * z);
    };
    ScalarField2D w; // (r^2/R^2)(0.5 + 0.5 cos(b z))
    w.f = [=](double r, double z) {
        return r * r / R2 * (0.5 + 0.5 * std::cos(b * z));
    };
    w.d1 = [=](double r, double z) {
        return 2.0 * r / R2 * (0.5 + 0.5 * std::cos(b * z));
    };
    w.d2 = [=](double r, double z) {
        return -r * r / R2 * 0.5 * b * std::sin(b * z);
    };
    w.d11 = [=](double, double z) {
        return 2.0 / R2 * (0.5 + 0.5 * std::cos(b * z));
    };
    w.d22 = [=](double r, double z) {
        return -r * r / R2 * 0.5 * b * b * std::cos(b * z);
    };
    w.d12 = [=](double r, double z) {
        return -2.0 * r / R2 * 0.5 * b * std::sin(b * z);
    };
    ScalarField2D p; // cos(be r) cos(ga z)
    p.f = [=](double r, double z) { return std::cos(be * r) * std::cos(ga * z); };
    p.d1 = [=](double r, double z) {
        return -be * std::sin(be * r) * std::cos(ga * z);
    };
    p.d2 = [=](double r, double z) {
        return -ga * std::cos(be * r) * std::sin(ga * z);
    };
    p.d11 = [=](double r, double z) {
        return -be * be * std::cos(be * r) * std::cos(ga * z);
    };
    p.d22 = [=](double r, double z) {
        return -ga * ga * std::cos(be * r) * std::cos(ga * z);
    };
    p.d12 = [=](double r, double z) {
        return be * ga * std::sin(be * r) * std::sin(ga * z);
    };
    ms.fields = {u, v, w, p};
    return ms;
}

} // namespace detail

inline Field analytic_field(const ProblemInstance& pr, const Grid2D& g) {
    if (!pr.ms) throw InvalidInput("problem has no analytic solution");
    return analytic_field(*pr.ms, g);
}

inline Field manufactured_forcing(const ProblemInstance& pr, const Grid2D& g) {
    if (!pr.ms) throw InvalidInput("problem has no manufactured forcing");
    if (pr.kind == ProblemInstance::Kind::linear)
        return manufactured_forcing(pr.lin, *pr.ms, g);
    return manufactured_forcing(pr.ns, *pr.ms, g);
}

// ---------------------------------------------------------------------------
// Problem registry
// ---------------------------------------------------------------------------

inline ProblemInstance problem_by_name(const std::string& name) {
    ProblemInstance pr;
    pr.name = name;
    if (name == "elliptic") {
        pr.lin = elliptic_problem();
        return pr;
    }
    if (name == "parabolic") {
        pr.lin = parabolic_problem();
        pr.init_mode = InitMode::upstream; // only three edges carry data
        pr.upstream_edge = Edge::low2;
        return pr;
    }
    if (name == "hyperbolic") {
        pr.lin = hyperbolic_problem();
        return pr;
    }
    if (name == "ns-swirl") {
        pr.kind = ProblemInstance::Kind::ns;
        pr.init_mode = InitMode::upstream;
        pr.upstream_edge = Edge::low2; // inlet z = 0
        return pr;
    }
    if (name == "mms:lin-trig") {
        pr.kind = ProblemInstance::Kind::linear;
        pr.lin = elliptic_problem();
        pr.lin.name = "mms:lin-trig";
        pr.ms = detail::lin_trig_solution();
        const auto& s = pr.ms->fields[0];
        const auto& lp = pr.lin; // extents
        pr.lin.bc[int(Edge::low1)] = [s, lp](double y) { return s.f(lp.x0, y); };
        pr.lin.bc[int(Edge::high1)] = [s, lp](double y) { return s.f(lp.x1, y); };
        pr.lin.bc[int(Edge::low2)] = [s, lp](double x) { return s.f(x, lp.y0); };
        pr.lin.bc[int(Edge::high2)] = [s, lp](double x) { return s.f(x, lp.y1); };
        return pr;
    }
    if (name == "mms:ns-poly" || name == "mms:ns-trig") {
        pr.kind = ProblemInstance::Kind::ns;
        pr.init_mode = InitMode::upstream;
        pr.upstream_edge = Edge::low2;
        pr.ms = name == "mms:ns-poly" ? detail::ns_poly_solution(pr.ns)
                                      : detail::ns_trig_solution(pr.ns);
        return pr;
    }
    throw ConfigError("unknown problem: " + name);
}

// ---------------------------------------------------------------------------
// Boundary data, input field, loss masks
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> edge_coords(const Grid2D& g, Edge e) {
    const int n = edge_length(g, e);
    std::vector<double> out(n);
    const bool along2 = (e == Edge::low1 || e == Edge::high1);
    for (int k = 0; k < n; ++k)
        out[k] = along2 ? g.coord2(k) : g.coord1(k);
    return out;
}

/// NS Dirichlet boundary table: list of (edge, channel, values).  `ms`
/// switches the targets from the preset conditions to analytic traces.
struct EdgeClaim {
    Edge edge;
    int channel;
    std::vector<double> values;
};

inline std::vector<EdgeClaim> ns_dirichlet_claims(const NavierStokesProblem& ns,
                                                  const ManufacturedSolution* ms,
                                                  const Grid2D& g) {
    auto trace = [&](int channel, Edge e) {
        const int n = edge_length(g, e);
        std::vector<double> out(n);
        for (int k = 0; k < n; ++k) {
            const double r = (e == Edge::low1)    ? 0.0
                             : (e == Edge::high1) ? ns.r_max
                                                  : g.coord1(k);
            const double z = (e == Edge::low2)    ? 0.0
                             : (e == Edge::high2) ? ns.z_max
                                                  : g.coord2(k);
            out[k] = ms->fields[channel].f(r, z);
        }
        return out;
    };
    std::vector<EdgeClaim> claims;
    auto add = [&](Edge e, int c, std::vector<double> v) {
        claims.push_back({e, c, std::move(v)});
    };
    if (ms) {
        // axis: v = w = 0 (analytic traces are 0 there by construction)
        add(Edge::low1, 1, trace(1, Edge::low1));
        add(Edge::low1, 2, trace(2, Edge::low1));
        for (int c : {0, 1, 2}) add(Edge::high1, c, trace(c, Edge::high1));
        for (int c : {0, 1, 2}) add(Edge::low2, c, trace(c, Edge::low2));
        add(Edge::high2, 3, trace(3, Edge::high2));
        return claims;
    }
    const int nh = g.nh, nw = g.nw;
    // axis r=0: v = w = 0 (u handled by the derivative condition)
    add(Edge::low1, 1, std::vector<double>(nw, 0.0));
    add(Edge::low1, 2, std::vector<double>(nw, 0.0));
    // wall r=r_max: no slip
    for (int c : {0, 1, 2}) add(Edge::high1, c, std::vector<double>(nw, 0.0));
    // inlet z=0: u = w = inlet_speed on the r-band, 0 elsewhere; v = 0
    std::vector<double> band(nh, 0.0);
    for (int i = 0; i < nh; ++i) {
        const double r = g.coord1(i);
        if (r > ns.band_lo && r < ns.band_hi) band[i] = ns.inlet_speed;
    }
    add(Edge::low2, 0, band);
    add(Edge::low2, 1, std::vector<double>(nh, 0.0));
    add(Edge::low2, 2, band);
    // outlet z=z_max: p = 0
    add(Edge::high2, 3, std::vector<double>(nh, 0.0));
    return claims;
}

inline void edge_node(const Grid2D& g, Edge e, int k, int& i, int& j) {
    switch (e) {
    case Edge::low1: i = 0; j = k; break;
    case Edge::high1: i = g.nh - 1; j = k; break;
    case Edge::low2: i = k; j = 0; break;
    case Edge::high2: i = k; j = g.nw - 1; break;
    }
}

} // namespace detail

/// Boundary values used to build the network input field.
inline BoundaryValues input_boundary_values(const ProblemInstance& pr,
                                            const Grid2D& g) {
    BoundaryValues bv(pr.channels());
    if (pr.kind == ProblemInstance::Kind::linear) {
        if (pr.init_mode == InitMode::upstream) {
            const Edge e = pr.upstream_edge;
            if (!pr.lin.bc[int(e)])
                throw InvalidInput("upstream edge carries no boundary data");
            const auto coords = detail::edge_coords(g, e);
            std::vector<double> vals(coords.size());
            for (std::size_t k = 0; k < coords.size(); ++k)
                vals[k] = (*pr.lin.bc[int(e)])(coords[k]);
            bv.set(g, e, 0, vals);
            return bv;
        }
        for (int e = 0; e < 4; ++e) {
            if (!pr.lin.bc[e])
                throw InvalidInput("all-boundaries init needs all four edges");
            const auto coords = detail::edge_coords(g, Edge(e));
            std::vector<double> vals(coords.size());
            for (std::size_t k = 0; k < coords.size(); ++k)
                vals[k] = (*pr.lin.bc[e])(coords[k]);
            bv.set(g, Edge(e), 0, vals);
        }
        return bv;
    }
    // swirl system: sweep from the inlet edge; channel values at z = 0
    const Edge e = pr.upstream_edge;
    const int n = edge_length(g, e);
    for (int c = 0; c < 4; ++c) {
        std::vector<double> vals(n, 0.0);
        if (pr.ms) {
            for (int k = 0; k < n; ++k)
                vals[k] = pr.ms->fields[c].f(g.coord1(k), 0.0);
        } else if (c == 0 || c == 2) {
            for (int k = 0; k < n; ++k) {
                const double r = g.coord1(k);
                if (r > pr.ns.band_lo && r < pr.ns.band_hi)
                    vals[k] = pr.ns.inlet_speed;
            }
        }
        bv.set(g, e, c, vals);
    }
    return bv;
}

inline Field make_input_field(const ProblemInstance& pr, const Grid2D& g) {
    return init_input_field(g, input_boundary_values(pr, g), pr.init_mode);
}

/// Node roles for the loss terms.  interior indexes one residual plane
/// (row-major); bc/data index the flattened (channels, nh, nw) prediction.
struct LossMasks {
    std::vector<std::size_t> interior;
    std::vector<std::size_t> bc_idx;
    std::vector<double> bc_target;
    bool axis_neumann_u = false; // du/dr = 0 rows at r=0 join the BC term
    long axis_rows = 0;
    std::vector<std::size_t> data_idx;
    std::vector<double> data_target;

    long n_interior() const { return long(interior.size()); }
    long n_boundary() const { return long(bc_idx.size()) + axis_rows; }
    long n_data() const { return long(data_idx.size()); }
};

/// Build the interior/boundary/data masks for a problem on a grid.  `data`
/// supplies supervision targets for the swirl system (channels u, v at all
/// interior nodes); mms problems default to their analytic fields.
inline LossMasks build_masks(const ProblemInstance& pr, const Grid2D& g,
                             const Field* data = nullptr) {
    LossMasks m;
    const std::size_t plane = std::size_t(g.nh) * g.nw;
    for (int i = 1; i < g.nh - 1; ++i)
        for (int j = 1; j < g.nw - 1; ++j)
            m.interior.push_back(std::size_t(i) * g.nw + j);

    if (pr.kind == ProblemInstance::Kind::linear) {
        std::vector<char> claimed(plane, 0);
        for (Edge e : {Edge::low1, Edge::high1, Edge::low2, Edge::high2}) {
            if (!pr.lin.bc[int(e)]) continue;
            const auto coords = detail::edge_coords(g, e);
            for (int k = 0; k < int(coords.size()); ++k) {
                int i = 0, j = 0;
                detail::edge_node(g, e, k, i, j);
                const std::size_t idx = std::size_t(i) * g.nw + j;
                if (claimed[idx]) continue;
                claimed[idx] = 1;
                m.bc_idx.push_back(idx);
                m.bc_target.push_back((*pr.lin.bc[int(e)])(coords[k]));
            }
        }
        return m;
    }

    // swirl system
    std::array<std::vector<char>, 4> claimed;
    for (auto& c : claimed) c.assign(plane, 0);
    for (const auto& claim :
         detail::ns_dirichlet_claims(pr.ns, pr.ms ? &*pr.ms : nullptr, g)) {
        for (int k = 0; k < edge_length(g, claim.edge); ++k) {
            int i = 0, j = 0;
            detail::edge_node(g, claim.edge, k, i, j);
            const std::size_t idx = std::size_t(i) * g.nw + j;
            if (claimed[claim.channel][idx]) continue;
            claimed[claim.channel][idx] = 1;
            m.bc_idx.push_back(claim.channel * plane + idx);
            m.bc_target.push_back(claim.values[k]);
        }
    }
    m.axis_neumann_u = true;
    m.axis_rows = g.nw;

    std::optional<Field> analytic;
    if (!data && pr.ms) {
        analytic = analytic_field(pr, g);
        data = &*analytic;
    }
    if (data) {
        if (!data->grid.same_layout(g) || data->channels != 4)
            throw InvalidInput("data field shape mismatch");
        for (int c : {0, 1})
            for (std::size_t k : m.interior) {
                m.data_idx.push_back(c * plane + k);
                m.data_target.push_back(data->data[c * plane + k]);
            }
    }
    return m;
}

} // namespace convpinn::problems
