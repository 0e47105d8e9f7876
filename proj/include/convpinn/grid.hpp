#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convpinn/common.hpp"

namespace convpinn {

enum class GeometryKind { cartesian, axisymmetric };

/// Coordinate system of a grid.  For axisymmetric grids `radial_axis`
/// names which grid axis (1 = rows, 2 = columns) carries the radial
/// coordinate r; the grid origin along that axis must sit exactly on r = 0.
struct Geometry {
    GeometryKind kind = GeometryKind::cartesian;
    int radial_axis = 0;

    static Geometry cartesian() { return {GeometryKind::cartesian, 0}; }
    static Geometry axisymmetric(int radial_axis) {
        if (radial_axis != 1 && radial_axis != 2)
            throw InvalidInput("radial_axis must be 1 or 2");
        return {GeometryKind::axisymmetric, radial_axis};
    }

    bool operator==(const Geometry& o) const {
        return kind == o.kind && radial_axis == o.radial_axis;
    }

    std::string token() const {
        if (kind == GeometryKind::cartesian) return "cartesian";
        return "axisymmetric:" + std::to_string(radial_axis);
    }
    static Geometry from_token(const std::string& tok) {
        if (tok == "cartesian") return cartesian();
        if (tok == "axisymmetric:1") return axisymmetric(1);
        if (tok == "axisymmetric:2") return axisymmetric(2);
        throw InvalidInput("unknown geometry token: " + tok);
    }
};

/// Uniform structured 2-D grid: nh node rows (axis 1) by nw node columns
/// (axis 2) with spacings d1, d2 and a physical origin at node (0, 0).
struct Grid2D {
    int nh = 0, nw = 0;
    double d1 = 0.0, d2 = 0.0;
    Geometry geometry = Geometry::cartesian();
    double origin1 = 0.0, origin2 = 0.0;

    Grid2D() = default;
    Grid2D(int nh_, int nw_, double d1_, double d2_,
           Geometry geom = Geometry::cartesian(),
           double origin1_ = 0.0, double origin2_ = 0.0)
        : nh(nh_), nw(nw_), d1(d1_), d2(d2_), geometry(geom),
          origin1(origin1_), origin2(origin2_) {
        if (nh < 2 || nw < 2)
            throw InvalidInput("grid needs at least 2 nodes per axis");
        if (!(d1 > 0.0) || !(d2 > 0.0))
            throw InvalidInput("grid spacings must be positive");
        if (geometry.kind == GeometryKind::axisymmetric) {
            const double r0 = geometry.radial_axis == 1 ? origin1 : origin2;
            if (r0 != 0.0)
                throw InvalidInput("axisymmetric grid must start exactly on r = 0");
        }
    }

    /// Cartesian grid spanning [x0,x1] x [y0,y1] with nh x nw nodes
    /// (axis 1 <-> x, axis 2 <-> y).
    static Grid2D from_extent(int nh, int nw, double x0, double x1,
                              double y0, double y1,
                              Geometry geom = Geometry::cartesian()) {
        return Grid2D(nh, nw, (x1 - x0) / (nh - 1), (y1 - y0) / (nw - 1),
                      geom, x0, y0);
    }

    std::int64_t nodes() const { return std::int64_t(nh) * nw; }
    double coord1(int i) const { return origin1 + d1 * i; }
    double coord2(int j) const { return origin2 + d2 * j; }

    /// Radius at a node of an axisymmetric grid.
    double radius(int i, int j) const {
        if (geometry.kind != GeometryKind::axisymmetric)
            throw InvalidInput("radius() requires an axisymmetric grid");
        return geometry.radial_axis == 1 ? coord1(i) : coord2(j);
    }

    bool same_layout(const Grid2D& o) const {
        return nh == o.nh && nw == o.nw && d1 == o.d1 && d2 == o.d2 &&
               geometry == o.geometry;
    }
};

/// Multi-channel nodal field on a Grid2D.  Storage is channel-major,
/// then row-major: data[(c*nh + i)*nw + j].
struct Field {
    Grid2D grid;
    int channels = 0;
    std::vector<double> data;

    Field() = default;
    Field(const Grid2D& g, int ch, double fill = 0.0)
        : grid(g), channels(ch),
          data(std::size_t(ch) * g.nh * g.nw, fill) {
        if (ch < 1) throw InvalidInput("field needs at least one channel");
    }

    std::size_t index(int c, int i, int j) const {
        return (std::size_t(c) * grid.nh + i) * grid.nw + j;
    }
    double& at(int c, int i, int j) { return data[index(c, i, j)]; }
    double at(int c, int i, int j) const { return data[index(c, i, j)]; }
    std::size_t size() const { return data.size(); }

    /// Copy of one channel as a single-channel field.
    Field channel(int c) const {
        if (c < 0 || c >= channels) throw InvalidInput("channel out of range");
        Field out(grid, 1);
        std::copy(data.begin() + std::size_t(c) * grid.nh * grid.nw,
                  data.begin() + std::size_t(c + 1) * grid.nh * grid.nw,
                  out.data.begin());
        return out;
    }
};

/// Edges of a grid, named by the axis-1 / axis-2 index they pin.
enum class Edge { low1 = 0, high1 = 1, low2 = 2, high2 = 3 };

inline int edge_length(const Grid2D& g, Edge e) {
    return (e == Edge::low1 || e == Edge::high1) ? g.nw : g.nh;
}

/// Prescribed per-channel values along grid edges.  An absent edge means
/// "no condition here" (e.g. an open outflow side).
struct BoundaryValues {
    int channels = 1;
    // values[edge][channel] -> vector over the nodes of that edge
    std::array<std::vector<std::vector<double>>, 4> values;

    explicit BoundaryValues(int ch = 1) : channels(ch) {}

    bool has(Edge e) const { return !values[int(e)].empty(); }

    void set(const Grid2D& g, Edge e, int channel,
             const std::vector<double>& v) {
        if (int(v.size()) != edge_length(g, e))
            throw InvalidInput("boundary value length does not match edge");
        auto& slot = values[int(e)];
        if (slot.empty()) slot.resize(channels);
        slot[channel] = v;
    }

    const std::vector<double>& get(Edge e, int channel) const {
        if (!has(e)) throw InvalidInput("edge has no boundary values");
        return values[int(e)][channel];
    }
};

namespace detail {

/// One smoothing step of the length-3 mean filter with replicated ends.
inline std::vector<double> mean3(const std::vector<double>& line) {
    const int n = int(line.size());
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) {
        const double a = line[k > 0 ? k - 1 : 0];
        const double b = line[k];
        const double c = line[k + 1 < n ? k + 1 : n - 1];
        out[k] = (a + b + c) / 3.0;
    }
    return out;
}

/// Fill a single-channel array by sweeping the filter inward from one edge.
inline std::vector<double> sweep_from_edge(const Grid2D& g, Edge e,
                                           const std::vector<double>& edge_vals) {
    std::vector<double> out(std::size_t(g.nh) * g.nw, 0.0);
    auto put_line = [&](int step, const std::vector<double>& line) {
        switch (e) {
        case Edge::low1:
            for (int j = 0; j < g.nw; ++j) out[std::size_t(step) * g.nw + j] = line[j];
            break;
        case Edge::high1:
            for (int j = 0; j < g.nw; ++j)
                out[std::size_t(g.nh - 1 - step) * g.nw + j] = line[j];
            break;
        case Edge::low2:
            for (int i = 0; i < g.nh; ++i) out[std::size_t(i) * g.nw + step] = line[i];
            break;
        case Edge::high2:
            for (int i = 0; i < g.nh; ++i)
                out[std::size_t(i) * g.nw + (g.nw - 1 - step)] = line[i];
            break;
        }
    };
    const int steps = (e == Edge::low1 || e == Edge::high1) ? g.nh : g.nw;
    std::vector<double> line = edge_vals;
    put_line(0, line);
    for (int s = 1; s < steps; ++s) {
        line = mean3(line);
        put_line(s, line);
    }
    return out;
}

} // namespace detail

enum class InitMode { all_boundaries, upstream };

/// Build the network input field from boundary data by repeated mean-3
/// smoothing sweeps.  all_boundaries: sweep inward from each of the four
/// edges and average the four fills.  upstream: sweep across the whole
/// domain from the single prescribed edge.
inline Field init_input_field(const Grid2D& g, const BoundaryValues& bv,
                              InitMode mode) {
    Field out(g, bv.channels);
    const std::size_t plane = std::size_t(g.nh) * g.nw;
    if (mode == InitMode::all_boundaries) {
        for (int e = 0; e < 4; ++e)
            if (!bv.has(Edge(e)))
                throw InvalidInput("all-boundaries init needs all four edges");
        for (int c = 0; c < bv.channels; ++c) {
            std::vector<double> acc(plane, 0.0);
            for (int e = 0; e < 4; ++e) {
                auto fill = detail::sweep_from_edge(g, Edge(e), bv.get(Edge(e), c));
                for (std::size_t k = 0; k < plane; ++k) acc[k] += fill[k];
            }
            for (std::size_t k = 0; k < plane; ++k)
                out.data[c * plane + k] = acc[k] / 4.0;
        }
    } else {
        int found = -1;
        for (int e = 0; e < 4; ++e) {
            if (bv.has(Edge(e))) {
                if (found >= 0)
                    throw InvalidInput("upstream init needs exactly one edge");
                found = e;
            }
        }
        if (found < 0) throw InvalidInput("upstream init needs exactly one edge");
        for (int c = 0; c < bv.channels; ++c) {
            auto fill = detail::sweep_from_edge(g, Edge(found), bv.get(Edge(found), c));
            std::copy(fill.begin(), fill.end(), out.data.begin() + c * plane);
        }
    }
    return out;
}

/// Relative L2 error ||pred - ref||_2 / ||ref||_2 over one channel
/// (channel < 0: all channels).
inline double relative_l2_error(const Field& pred, const Field& ref,
                                int channel = -1) {
    if (!pred.grid.same_layout(ref.grid) || pred.channels != ref.channels)
        throw InvalidInput("relative_l2_error: field shapes differ");
    const std::size_t plane = std::size_t(pred.grid.nh) * pred.grid.nw;
    std::size_t lo = 0, hi = pred.data.size();
    if (channel >= 0) {
        if (channel >= pred.channels) throw InvalidInput("channel out of range");
        lo = channel * plane;
        hi = lo + plane;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
        const double d = pred.data[k] - ref.data[k];
        num += d * d;
        den += ref.data[k] * ref.data[k];
    }
    if (den == 0.0)
        throw std::domain_error("relative_l2_error: reference has zero norm");
    return std::sqrt(num / den);
}

/// Correlation magnitude |a . b| / (||a|| ||b||) over flattened entries.
inline double correlation(const std::vector<double>& a,
                          const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw InvalidInput("correlation: size mismatch or empty input");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("correlation: zero-norm input");
    return std::abs(dot) / (std::sqrt(na) * std::sqrt(nb));
}

inline double correlation(const Field& a, const Field& b) {
    if (!a.grid.same_layout(b.grid) || a.channels != b.channels)
        throw InvalidInput("correlation: field shapes differ");
    return correlation(a.data, b.data);
}

} // namespace convpinn
