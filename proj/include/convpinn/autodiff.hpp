#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "convpinn/stencil.hpp"

namespace convpinn::ad {

struct TensorShape {
    int c = 1, h = 1, w = 1;
    std::int64_t size() const { return std::int64_t(c) * h * w; }
    bool is_scalar() const { return c == 1 && h == 1 && w == 1; }
    bool operator==(const TensorShape& o) const {
        return c == o.c && h == o.h && w == o.w;
    }
};

struct ParamInit {
    enum class Kind { zeros, constant, uniform } kind = Kind::zeros;
    double value = 0.0; // constant fill or uniform half-width
    static ParamInit zeros() { return {Kind::zeros, 0.0}; }
    static ParamInit constant(double v) { return {Kind::constant, v}; }
    static ParamInit uniform(double half_width) {
        return {Kind::uniform, half_width};
    }
};

/// Named parameter tensors with gradient accumulators.  Random
/// initialisation draws from one seeded stream in registration order, so a
/// store rebuilt with the same seed and the same add() sequence is
/// bit-identical.
class ParamStore {
  public:
    struct Param {
        std::string name;
        std::vector<int> dims;
        std::vector<double> value, grad;
    };

    explicit ParamStore(std::uint64_t seed) : seed_(seed), rng_(seed) {}

    int add(const std::string& name, std::vector<int> dims,
            const ParamInit& init) {
        if (find(name) >= 0) throw InvalidInput("duplicate parameter: " + name);
        std::int64_t n = 1;
        for (int d : dims) {
            if (d < 1) throw InvalidInput("parameter dims must be positive");
            n *= d;
        }
        Param p{name, std::move(dims), std::vector<double>(n, 0.0),
                std::vector<double>(n, 0.0)};
        switch (init.kind) {
        case ParamInit::Kind::zeros: break;
        case ParamInit::Kind::constant:
            std::fill(p.value.begin(), p.value.end(), init.value);
            break;
        case ParamInit::Kind::uniform: {
            std::uniform_real_distribution<double> dist(-init.value, init.value);
            for (auto& v : p.value) v = dist(rng_);
            break;
        }
        }
        params_.push_back(std::move(p));
        return int(params_.size()) - 1;
    }

    Param& at(int i) { return params_.at(i); }
    const Param& at(int i) const { return params_.at(i); }
    int find(const std::string& name) const {
        for (int i = 0; i < int(params_.size()); ++i)
            if (params_[i].name == name) return i;
        return -1;
    }
    int count() const { return int(params_.size()); }
    std::int64_t total_size() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += std::int64_t(p.value.size());
        return n;
    }
    std::uint64_t seed() const { return seed_; }

    void zero_grad() {
        for (auto& p : params_)
            std::fill(p.grad.begin(), p.grad.end(), 0.0);
    }

    std::vector<double> values_flat() const {
        std::vector<double> out;
        out.reserve(total_size());
        for (const auto& p : params_)
            out.insert(out.end(), p.value.begin(), p.value.end());
        return out;
    }
    std::vector<double> grads_flat() const {
        std::vector<double> out;
        out.reserve(total_size());
        for (const auto& p : params_)
            out.insert(out.end(), p.grad.begin(), p.grad.end());
        return out;
    }
    void set_values_flat(std::span<const double> flat) {
        if (std::int64_t(flat.size()) != total_size())
            throw InvalidInput("flat parameter size mismatch");
        std::size_t off = 0;
        for (auto& p : params_) {
            std::copy(flat.begin() + off, flat.begin() + off + p.value.size(),
                      p.value.begin());
            off += p.value.size();
        }
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 rng_;
    std::vector<Param> params_;
};

struct Var {
    int id = -1;
};

/// Reverse-mode tape.  Nodes are appended in evaluation order (inputs of a
/// node always have smaller ids, so the graph is acyclic by construction);
/// forward values are computed eagerly on creation.  backward() zeroes node
/// adjoints, seeds the scalar root with 1 and sweeps in reverse id order;
/// leaf nodes add their adjoints into the ParamStore gradients, so repeated
/// backward() calls accumulate there.
class Tape {
  public:
    explicit Tape(ParamStore* params = nullptr) : params_(params) {}

    void clear() { nodes_.clear(); }
    long backward_calls() const { return backward_calls_; }
    std::size_t node_count() const { return nodes_.size(); }
    ParamStore* params() { return params_; }

    const TensorShape& shape(Var v) const { return node(v).shape; }
    const std::vector<double>& value(Var v) const { return node(v).val; }
    double scalar(Var v) const {
        if (!node(v).shape.is_scalar())
            throw InvalidInput("scalar() on non-scalar node");
        return node(v).val[0];
    }

    Var constant(TensorShape s, std::vector<double> data) {
        if (std::int64_t(data.size()) != s.size())
            throw InvalidInput("constant data does not match its shape");
        return make(s, std::move(data));
    }
    Var constant_scalar(double v) { return make({1, 1, 1}, {v}); }
    Var constant_field(const Field& f) {
        return constant({f.channels, f.grid.nh, f.grid.nw}, f.data);
    }

    /// Leaf view of a parameter (value snapshot at creation time).
    Var param(int param_index, TensorShape view) {
        if (!params_) throw InvalidInput("tape has no parameter store");
        auto& p = params_->at(param_index);
        if (view.size() != std::int64_t(p.value.size()))
            throw InvalidInput("parameter view size mismatch: " + p.name);
        Var v = make(view, p.value);
        node(v).back = [this, v, param_index] {
            auto& grad = params_->at(param_index).grad;
            const auto& g = node(v).grad;
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k];
        };
        return v;
    }

    Var add(Var a, Var b) { return binary_elementwise(a, b, /*subtract=*/false); }
    Var sub(Var a, Var b) { return binary_elementwise(a, b, /*subtract=*/true); }

    Var mul(Var a, Var b) {
        require_same_shape(a, b, "mul");
        const auto& va = node(a).val;
        const auto& vb = node(b).val;
        std::vector<double> out(va.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = va[k] * vb[k];
        Var y = make(node(a).shape, std::move(out));
        node(y).back = [this, a, b, y] {
            const auto& g = node(y).grad;
            const auto& va2 = node(a).val;
            const auto& vb2 = node(b).val;
            auto& ga = node(a).grad;
            auto& gb = node(b).grad;
            for (std::size_t k = 0; k < g.size(); ++k) {
                ga[k] += g[k] * vb2[k];
                gb[k] += g[k] * va2[k];
            }
        };
        return y;
    }

    Var scale(Var a, double s) {
        std::vector<double> out(node(a).val);
        for (auto& v : out) v *= s;
        Var y = make(node(a).shape, std::move(out));
        node(y).back = [this, a, y, s] {
            const auto& g = node(y).grad;
            auto& ga = node(a).grad;
            for (std::size_t k = 0; k < g.size(); ++k) ga[k] += s * g[k];
        };
        return y;
    }

    Var tanh_(Var a) {
        std::vector<double> out(node(a).val);
        for (auto& v : out) v = std::tanh(v);
        Var y = make(node(a).shape, std::move(out));
        node(y).back = [this, a, y] {
            const auto& g = node(y).grad;
            const auto& vy = node(y).val;
            auto& ga = node(a).grad;
            for (std::size_t k = 0; k < g.size(); ++k)
                ga[k] += g[k] * (1.0 - vy[k] * vy[k]);
        };
        return y;
    }

    /// out = x * vec[index]; used for the learnable superposition.
    Var scale_by_entry(Var x, Var vec, int index) {
        const auto& vv = node(vec).val;
        if (index < 0 || index >= int(vv.size()))
            throw InvalidInput("scale_by_entry index out of range");
        const double s = vv[index];
        std::vector<double> out(node(x).val);
        for (auto& v : out) v *= s;
        Var y = make(node(x).shape, std::move(out));
        node(y).back = [this, x, vec, index, y, s] {
            const auto& g = node(y).grad;
            const auto& vx = node(x).val;
            auto& gx = node(x).grad;
            double acc = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) {
                gx[k] += s * g[k];
                acc += g[k] * vx[k];
            }
            node(vec).grad[index] += acc;
        };
        return y;
    }

    /// 3x3 convolution with equal dilation and zero padding (size
    /// preserving).  weight is a flat leaf of dims [c_out, c_in, 3, 3],
    /// bias of dims [c_out].
    Var conv2d_dilated(Var x, Var weight, Var bias, int c_out, int dilation) {
        const TensorShape xs = node(x).shape;
        const int c_in = xs.c, h = xs.h, w = xs.w;
        if (node(weight).val.size() != std::size_t(c_out) * c_in * 9)
            throw InvalidInput("conv weight size mismatch");
        if (node(bias).val.size() != std::size_t(c_out))
            throw InvalidInput("conv bias size mismatch");
        if (dilation < 1) throw InvalidInput("dilation must be >= 1");
        const std::size_t plane = std::size_t(h) * w;
        std::vector<double> out(std::size_t(c_out) * plane);
        const auto& vin = node(x).val;
        const auto& vw = node(weight).val;
        const auto& vb = node(bias).val;
        for (int co = 0; co < c_out; ++co)
            std::fill_n(out.begin() + co * plane, plane, vb[co]);
        for (int co = 0; co < c_out; ++co)
            for (int ci = 0; ci < c_in; ++ci)
                for (int t = 0; t < 9; ++t) {
                    const double wt = vw[(std::size_t(co) * c_in + ci) * 9 + t];
                    if (wt == 0.0) continue;
                    const int dy = (t / 3 - 1) * dilation;
                    const int dx = (t % 3 - 1) * dilation;
                    const int i0 = std::max(0, -dy), i1 = std::min(h, h - dy);
                    const int j0 = std::max(0, -dx), j1 = std::min(w, w - dx);
                    for (int i = i0; i < i1; ++i) {
                        double* o = out.data() + co * plane + std::size_t(i) * w;
                        const double* in = vin.data() + ci * plane +
                                           std::size_t(i + dy) * w + dx;
                        for (int j = j0; j < j1; ++j) o[j] += wt * in[j];
                    }
                }
        Var y = make({c_out, h, w}, std::move(out));
        node(y).back = [this, x, weight, bias, y, c_out, c_in, h, w, dilation] {
            const std::size_t plane = std::size_t(h) * w;
            const auto& g = node(y).grad;
            const auto& vin = node(x).val;
            const auto& vw = node(weight).val;
            auto& gx = node(x).grad;
            auto& gw = node(weight).grad;
            auto& gb = node(bias).grad;
            for (int co = 0; co < c_out; ++co) {
                double acc = 0.0;
                for (std::size_t k = 0; k < plane; ++k) acc += g[co * plane + k];
                gb[co] += acc;
            }
            for (int co = 0; co < c_out; ++co)
                for (int ci = 0; ci < c_in; ++ci)
                    for (int t = 0; t < 9; ++t) {
                        const std::size_t wi = (std::size_t(co) * c_in + ci) * 9 + t;
                        const double wt = vw[wi];
                        const int dy = (t / 3 - 1) * dilation;
                        const int dx = (t % 3 - 1) * dilation;
                        const int i0 = std::max(0, -dy), i1 = std::min(h, h - dy);
                        const int j0 = std::max(0, -dx), j1 = std::min(w, w - dx);
                        double wacc = 0.0;
                        for (int i = i0; i < i1; ++i) {
                            const double* go = g.data() + co * plane +
                                               std::size_t(i) * w;
                            const double* in = vin.data() + ci * plane +
                                               std::size_t(i + dy) * w + dx;
                            double* gi = gx.data() + ci * plane +
                                         std::size_t(i + dy) * w + dx;
                            for (int j = j0; j < j1; ++j) {
                                gi[j] += wt * go[j];
                                wacc += go[j] * in[j];
                            }
                        }
                        gw[wi] += wacc;
                    }
        };
        return y;
    }

    Var slice_channel(Var x, int c) {
        const TensorShape xs = node(x).shape;
        if (c < 0 || c >= xs.c) throw InvalidInput("slice_channel out of range");
        const std::size_t plane = std::size_t(xs.h) * xs.w;
        std::vector<double> out(node(x).val.begin() + c * plane,
                                node(x).val.begin() + (c + 1) * plane);
        Var y = make({1, xs.h, xs.w}, std::move(out));
        node(y).back = [this, x, y, c, plane] {
            const auto& g = node(y).grad;
            auto& gx = node(x).grad;
            for (std::size_t k = 0; k < plane; ++k) gx[c * plane + k] += g[k];
        };
        return y;
    }

    /// Taylor padding along one axis: extends every line by n_virtual
    /// extrapolated values at each end (per channel).
    Var fd_pad(Var x, int axis, const stencil::PaddingSpec& spec) {
        if (axis != 1 && axis != 2) throw InvalidInput("axis must be 1 or 2");
        const auto coeff = stencil::pad_coefficients(spec);
        const TensorShape xs = node(x).shape;
        const int L = axis == 1 ? xs.h : xs.w;
        if (L < spec.fit_points + 1)
            throw InvalidInput("line too short for padding fit");
        const int nv = spec.n_virtual, F = spec.fit_points;
        const TensorShape os = axis == 1
                                   ? TensorShape{xs.c, xs.h + 2 * nv, xs.w}
                                   : TensorShape{xs.c, xs.h, xs.w + 2 * nv};
        const auto& vin = node(x).val;
        std::vector<double> out(os.size());
        auto xin = [&](int c, int i, int j) {
            return vin[(std::size_t(c) * xs.h + i) * xs.w + j];
        };
        for (int c = 0; c < xs.c; ++c)
            for (int io = 0; io < os.h; ++io)
                for (int jo = 0; jo < os.w; ++jo) {
                    const int p = axis == 1 ? io : jo; // position along padded line
                    const int q = p - nv;              // original index
                    const int tr = axis == 1 ? jo : io; // transverse index
                    double v;
                    if (q >= 0 && q < L) {
                        v = axis == 1 ? xin(c, q, tr) : xin(c, tr, q);
                    } else {
                        const int m = q < 0 ? -q : q - (L - 1);
                        const bool low = q < 0;
                        v = 0.0;
                        for (int n = 0; n <= F; ++n) {
                            const int src = low ? n : L - 1 - n;
                            v += coeff[m - 1][n] *
                                 (axis == 1 ? xin(c, src, tr) : xin(c, tr, src));
                        }
                    }
                    out[(std::size_t(c) * os.h + io) * os.w + jo] = v;
                }
        Var y = make(os, std::move(out));
        node(y).back = [this, x, y, axis, coeff, xs, os, L, nv, F] {
            const auto& g = node(y).grad;
            auto& gx = node(x).grad;
            auto gadd = [&](int c, int i, int j, double v) {
                gx[(std::size_t(c) * xs.h + i) * xs.w + j] += v;
            };
            for (int c = 0; c < xs.c; ++c)
                for (int io = 0; io < os.h; ++io)
                    for (int jo = 0; jo < os.w; ++jo) {
                        const double gv =
                            g[(std::size_t(c) * os.h + io) * os.w + jo];
                        if (gv == 0.0) continue;
                        const int p = axis == 1 ? io : jo;
                        const int q = p - nv;
                        const int tr = axis == 1 ? jo : io;
                        if (q >= 0 && q < L) {
                            if (axis == 1) gadd(c, q, tr, gv);
                            else gadd(c, tr, q, gv);
                        } else {
                            const int m = q < 0 ? -q : q - (L - 1);
                            const bool low = q < 0;
                            for (int n = 0; n <= F; ++n) {
                                const int src = low ? n : L - 1 - n;
                                const double w = coeff[m - 1][n] * gv;
                                if (axis == 1) gadd(c, src, tr, w);
                                else gadd(c, tr, src, w);
                            }
                        }
                    }
        };
        return y;
    }

    /// Valid 1-D convolution along one axis, all channels, scaled.
    Var conv1d_axis(Var x, int axis, std::vector<double> taps, double s) {
        if (axis != 1 && axis != 2) throw InvalidInput("axis must be 1 or 2");
        const TensorShape xs = node(x).shape;
        const int K = int(taps.size());
        const int L = axis == 1 ? xs.h : xs.w;
        if (K < 1 || K > L) throw InvalidInput("conv1d kernel longer than line");
        const int Lo = L - K + 1;
        const TensorShape os = axis == 1 ? TensorShape{xs.c, Lo, xs.w}
                                         : TensorShape{xs.c, xs.h, Lo};
        const auto& vin = node(x).val;
        std::vector<double> out(os.size());
        for (int c = 0; c < xs.c; ++c)
            for (int io = 0; io < os.h; ++io)
                for (int jo = 0; jo < os.w; ++jo) {
                    double acc = 0.0;
                    for (int k = 0; k < K; ++k) {
                        const int i = axis == 1 ? io + k : io;
                        const int j = axis == 2 ? jo + k : jo;
                        acc += taps[k] * vin[(std::size_t(c) * xs.h + i) * xs.w + j];
                    }
                    out[(std::size_t(c) * os.h + io) * os.w + jo] = s * acc;
                }
        Var y = make(os, std::move(out));
        node(y).back = [this, x, y, axis, taps, s, xs, os, K] {
            const auto& g = node(y).grad;
            auto& gx = node(x).grad;
            for (int c = 0; c < xs.c; ++c)
                for (int io = 0; io < os.h; ++io)
                    for (int jo = 0; jo < os.w; ++jo) {
                        const double gv =
                            s * g[(std::size_t(c) * os.h + io) * os.w + jo];
                        if (gv == 0.0) continue;
                        for (int k = 0; k < K; ++k) {
                            const int i = axis == 1 ? io + k : io;
                            const int j = axis == 2 ? jo + k : jo;
                            gx[(std::size_t(c) * xs.h + i) * xs.w + j] +=
                                taps[k] * gv;
                        }
                    }
        };
        return y;
    }

    /// Sum of squared errors over selected flat entries:
    /// sum_k (x[idx_k] - target_k)^2.
    Var masked_sse(Var x, std::vector<std::size_t> idx,
                   std::vector<double> target) {
        if (idx.size() != target.size())
            throw InvalidInput("masked_sse: index/target size mismatch");
        if (idx.empty()) throw InvalidInput("masked_sse: empty mask");
        const auto& vx = node(x).val;
        double acc = 0.0, comp = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] >= vx.size())
                throw InvalidInput("masked_sse: index out of range");
            const double d = vx[idx[k]] - target[k];
            const double term = d * d - comp;
            const double next = acc + term;
            comp = (next - acc) - term;
            acc = next;
        }
        Var y = make({1, 1, 1}, {acc});
        node(y).back = [this, x, y, idx = std::move(idx),
                        target = std::move(target)] {
            const double g = node(y).grad[0];
            const auto& vx2 = node(x).val;
            auto& gx = node(x).grad;
            for (std::size_t k = 0; k < idx.size(); ++k)
                gx[idx[k]] += 2.0 * (vx2[idx[k]] - target[k]) * g;
        };
        return y;
    }

    /// Weighted sum of scalar nodes (weights are plain numbers).
    Var weighted_sum(const std::vector<Var>& terms,
                     const std::vector<double>& weights) {
        if (terms.empty() || terms.size() != weights.size())
            throw InvalidInput("weighted_sum: bad term/weight lists");
        double acc = 0.0;
        for (std::size_t k = 0; k < terms.size(); ++k)
            acc += weights[k] * scalar(terms[k]);
        Var y = make({1, 1, 1}, {acc});
        node(y).back = [this, y, terms, weights] {
            const double g = node(y).grad[0];
            for (std::size_t k = 0; k < terms.size(); ++k)
                node(terms[k]).grad[0] += weights[k] * g;
        };
        return y;
    }

    /// Throws NumericalError naming `what` if the node holds any non-finite
    /// value; returns the node unchanged.
    Var check_finite(Var v, const std::string& what) {
        for (double x : node(v).val)
            if (!std::isfinite(x))
                throw NumericalError("non-finite value in " + what);
        return v;
    }

    void backward(Var root) {
        if (!node(root).shape.is_scalar())
            throw InvalidInput("backward() root must be scalar");
        for (auto& n : nodes_) {
            n.grad.assign(n.val.size(), 0.0);
        }
        nodes_[root.id].grad[0] = 1.0;
        for (int id = root.id; id >= 0; --id)
            if (nodes_[id].back) nodes_[id].back();
        ++backward_calls_;
    }

    Field value_as_field(Var v, const Grid2D& g) const {
        const TensorShape s = shape(v);
        if (s.h != g.nh || s.w != g.nw)
            throw InvalidInput("node shape does not match grid");
        Field f(g, s.c);
        f.data = value(v);
        return f;
    }

  private:
    struct Node {
        TensorShape shape;
        std::vector<double> val, grad;
        std::function<void()> back;
    };

    Node& node(Var v) { return nodes_.at(v.id); }
    const Node& node(Var v) const { return nodes_.at(v.id); }

    Var make(TensorShape s, std::vector<double> val) {
        nodes_.push_back(Node{s, std::move(val), {}, {}});
        return Var{int(nodes_.size()) - 1};
    }

    void require_same_shape(Var a, Var b, const char* op) {
        if (!(node(a).shape == node(b).shape))
            throw InvalidInput(std::string(op) + ": shape mismatch");
    }

    Var binary_elementwise(Var a, Var b, bool subtract) {
        require_same_shape(a, b, subtract ? "sub" : "add");
        const auto& va = node(a).val;
        const auto& vb = node(b).val;
        std::vector<double> out(va.size());
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = subtract ? va[k] - vb[k] : va[k] + vb[k];
        Var y = make(node(a).shape, std::move(out));
        node(y).back = [this, a, b, y, subtract] {
            const auto& g = node(y).grad;
            auto& ga = node(a).grad;
            auto& gb = node(b).grad;
            for (std::size_t k = 0; k < g.size(); ++k) {
                ga[k] += g[k];
                gb[k] += subtract ? -g[k] : g[k];
            }
        };
        return y;
    }

    ParamStore* params_ = nullptr;
    std::vector<Node> nodes_;
    long backward_calls_ = 0;
};

/// Finite-difference derivative as a graph op: Taylor padding followed by a
/// valid 1-D convolution with the central-difference kernel, scaled by
/// 1/d^deriv.  Output shape equals the input shape.
inline Var derivative_graph(Tape& t, Var x, int axis, int deriv, int acc,
                            const stencil::PaddingSpec& spec, double d) {
    if (spec.n_virtual != acc / 2)
        throw InvalidInput("padding n_virtual must equal acc/2");
    const auto kernel = stencil::central_difference_kernel(deriv, acc);
    Var padded = t.fd_pad(x, axis, spec);
    return t.conv1d_axis(padded, axis, kernel.w, 1.0 / std::pow(d, deriv));
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

/// Compare analytic parameter gradients of build(tape) against central
/// finite differences on a deterministic sample of parameter entries.
/// Relative error per entry: |fd - g| / max(|fd|, |g|, 1e-8).
inline GradCheckResult grad_check(ParamStore& params,
                                  const std::function<Var(Tape&)>& build,
                                  double eps = 1e-6, int max_samples = 120,
                                  std::uint64_t seed = 0) {
    std::vector<std::vector<double>> analytic(params.count());
    {
        Tape t(&params);
        Var loss = build(t);
        params.zero_grad();
        t.backward(loss);
        for (int p = 0; p < params.count(); ++p) analytic[p] = params.at(p).grad;
        params.zero_grad();
    }
    auto eval = [&] {
        Tape t(&params);
        return t.scalar(build(t));
    };
    std::vector<std::pair<int, std::size_t>> entries;
    for (int p = 0; p < params.count(); ++p)
        for (std::size_t k = 0; k < params.at(p).value.size(); ++k)
            entries.emplace_back(p, k);
    if (int(entries.size()) > max_samples) {
        std::mt19937_64 rng(seed);
        for (int k = 0; k < max_samples; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, entries.size() - 1);
            std::swap(entries[k], entries[pick(rng)]);
        }
        entries.resize(max_samples);
    }
    GradCheckResult res;
    for (const auto& [p, k] : entries) {
        double& slot = params.at(p).value[k];
        const double saved = slot;
        slot = saved + eps;
        const double fp = eval();
        slot = saved - eps;
        const double fm = eval();
        slot = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double g = analytic[p][k];
        const double rel =
            std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-8});
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.checked;
    }
    return res;
}

} // namespace convpinn::ad
