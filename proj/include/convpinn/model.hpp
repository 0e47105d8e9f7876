#pragma once

#include <array>

#include "convpinn/autodiff.hpp"

namespace convpinn::model {

/// Size-to-receptive-field ratios of the six branches.
constexpr std::array<int, 6> kRatios{2, 4, 8, 16, 32, 64};

/// Dilation rate (= padding) adapted to the grid resolution.
inline int dilation_for(int h, int w, int k) {
    if (h < 3 || w < 3) throw InvalidInput("dilation_for needs h, w >= 3");
    if (k < 1) throw InvalidInput("dilation_for needs k >= 1");
    return std::max(std::min(h, w) / k, 1);
}

/// Receptive field of a 3x3 kernel at the given dilation.
inline int receptive_field(int dilation) {
    if (dilation < 1) throw InvalidInput("dilation must be >= 1");
    return 2 * dilation + 1;
}

inline long conv_layer_param_count(int c_in, int c_out) {
    return long(c_in) * c_out * 9 + c_out;
}

/// One encoder-decoder branch: a depth-layer stack of dilated 3x3 convs
/// (in -> channels -> ... -> channels -> out), tanh between layers, linear
/// last layer, every layer at the branch's dilation.
struct EncoderDecoderConfig {
    int k = 2;          // size-to-receptive-field ratio
    int channels = 32;  // hidden width
    int depth = 4;      // conv layers
    int in_channels = 1;
    int out_channels = 1;

    void validate() const {
        if (k < 2 || k > 64 || (k & (k - 1)) != 0)
            throw InvalidInput("k must be a power of two in [2, 64]");
        if (depth < 2) throw InvalidInput("branch depth must be >= 2");
        if (channels < 1 || in_channels < 1 || out_channels < 1)
            throw InvalidInput("channel counts must be positive");
    }

    int layer_in(int layer) const { return layer == 0 ? in_channels : channels; }
    int layer_out(int layer) const {
        return layer == depth - 1 ? out_channels : channels;
    }
};

/// The multi-receptive-field model: parallel dilated-conv branches whose
/// outputs are linearly superimposed with learnable coefficients theta.
/// Construction registers all parameters in the store (branch order, then
/// layer order, weight before bias, theta last), so a store rebuilt with
/// the same seed yields bit-identical weights.
class MRFModel {
  public:
    struct Layer {
        int c_in = 0, c_out = 0;
        int weight_idx = -1, bias_idx = -1;
    };
    struct Branch {
        std::string name;
        int dilation = 1;
        std::vector<Layer> layers;
    };

    /// Full six-branch MRF model for an h x w grid.
    MRFModel(ad::ParamStore& store, int in_channels, int out_channels,
             int hidden_channels, int depth, int h, int w)
        : store_(&store) {
        for (int k : kRatios) {
            EncoderDecoderConfig cfg{k, hidden_channels, depth, in_channels,
                                     out_channels};
            cfg.validate();
            add_branch(cfg, dilation_for(h, w, k), "branch" + std::to_string(k));
        }
        finish_build();
    }

    /// Single branch with a fixed receptive field (ablation baseline).
    static MRFModel fixed(ad::ParamStore& store, int rf, int in_channels,
                          int out_channels, int hidden_channels, int depth) {
        if (rf < 3 || rf % 2 == 0)
            throw InvalidInput("fixed receptive field must be odd and >= 3");
        MRFModel m(&store);
        EncoderDecoderConfig cfg{2, hidden_channels, depth, in_channels,
                                 out_channels};
        cfg.k = 2; // placeholder ratio; dilation is given directly
        cfg.validate();
        m.add_branch(cfg, (rf - 1) / 2, "fixed" + std::to_string(rf));
        m.finish_build();
        return m;
    }

    const std::vector<Branch>& branches() const { return branches_; }
    int theta_index() const { return theta_idx_; }
    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }

    /// u_pinn = sum_i theta_i * branch_i(input).  Branch outputs are
    /// checked finite and optionally returned for correlation reports.
    ad::Var forward(ad::Tape& t, ad::Var input,
                    std::vector<ad::Var>* branch_outputs = nullptr) const {
        const ad::TensorShape in_shape = t.shape(input);
        if (in_shape.c != in_channels_)
            throw InvalidInput("model input channel mismatch");
        if (in_shape.h < 3 || in_shape.w < 3)
            throw InvalidInput("model input spatial dims must be >= 3");
        const ad::Var theta = t.param(
            theta_idx_, {1, 1, int(branches_.size())});
        ad::Var sum{};
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            const Branch& br = branches_[b];
            ad::Var x = input;
            for (std::size_t l = 0; l < br.layers.size(); ++l) {
                const Layer& ly = br.layers[l];
                const ad::Var wv = t.param(
                    ly.weight_idx, {ly.c_out, ly.c_in * 3, 3});
                const ad::Var bv = t.param(ly.bias_idx, {1, 1, ly.c_out});
                x = t.conv2d_dilated(x, wv, bv, ly.c_out, br.dilation);
                if (l + 1 < br.layers.size()) x = t.tanh_(x);
            }
            x = t.check_finite(x, br.name);
            if (branch_outputs) branch_outputs->push_back(x);
            const ad::Var scaled = t.scale_by_entry(x, theta, int(b));
            sum = b == 0 ? scaled : t.add(sum, scaled);
        }
        return sum;
    }

    long param_count() const {
        long n = long(branches_.size()); // theta entries
        for (const Branch& br : branches_)
            for (const Layer& ly : br.layers)
                n += conv_layer_param_count(ly.c_in, ly.c_out);
        return n;
    }

    /// 2 * c_in * c_out * 9 * h * w per conv layer, summed over branches.
    long long flop_estimate(int h, int w) const {
        long long n = 0;
        for (const Branch& br : branches_)
            for (const Layer& ly : br.layers)
                n += 2LL * ly.c_in * ly.c_out * 9 * h * w;
        return n;
    }

  private:
    explicit MRFModel(ad::ParamStore* store) : store_(store) {}

    void add_branch(const EncoderDecoderConfig& cfg, int dilation,
                    const std::string& name) {
        if (in_channels_ == 0) {
            in_channels_ = cfg.in_channels;
            out_channels_ = cfg.out_channels;
        }
        Branch br;
        br.name = name;
        br.dilation = dilation;
        for (int l = 0; l < cfg.depth; ++l) {
            Layer ly;
            ly.c_in = cfg.layer_in(l);
            ly.c_out = cfg.layer_out(l);
            const std::string base = name + ".conv" + std::to_string(l);
            ly.weight_idx = store_->add(
                base + ".weight", {ly.c_out, ly.c_in, 3, 3},
                ad::ParamInit::uniform(std::sqrt(1.0 / (9.0 * ly.c_in))));
            ly.bias_idx =
                store_->add(base + ".bias", {ly.c_out}, ad::ParamInit::zeros());
            br.layers.push_back(ly);
        }
        branches_.push_back(std::move(br));
    }

    void finish_build() {
        // padding = dilation is hardwired in conv2d_dilated (that is what
        // keeps every layer size-preserving); the remaining way a branch
        // could change shape is a broken channel chain, so assert it.
        for (const Branch& br : branches_) {
            if (br.dilation < 1 || br.layers.empty() ||
                br.layers.front().c_in != in_channels_ ||
                br.layers.back().c_out != out_channels_)
                throw InvalidInput("branch channel chain is inconsistent");
            for (std::size_t l = 1; l < br.layers.size(); ++l)
                if (br.layers[l].c_in != br.layers[l - 1].c_out)
                    throw InvalidInput("branch channel chain is inconsistent");
        }
        theta_idx_ = store_->add(
            "theta", {int(branches_.size())},
            ad::ParamInit::constant(branches_.size() == 1
                                        ? 1.0
                                        : 1.0 / double(branches_.size())));
    }

    ad::ParamStore* store_ = nullptr;
    std::vector<Branch> branches_;
    int theta_idx_ = -1;
    int in_channels_ = 0, out_channels_ = 0;
};

} // namespace convpinn::model
