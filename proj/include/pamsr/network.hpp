#pragma once

#include "pamsr/autograd.hpp"
#include "pamsr/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pamsr::nn {

struct ModelConfig {
    int base_channels = 64;
    int kernel_size = 3;
    double leaky_slope = 0.1;
    int upscale_stages = 2; // each x2
    int hr_local_resblocks = 3;
    int hr_subresblocks = 3;
    int ex_resblocks = 4;
    int recon_resblocks = 4;
    std::uint64_t init_seed = 0;

    /// The upsampler shuffles channels directly, so base_channels must be a
    /// multiple of 4^upscale_stages.
    void validate() const;
    int upscale() const { return 1 << upscale_stages; }
    int output_channels() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count for the architecture built by DualBranchNet.
std::int64_t count_parameters(const ModelConfig& config);

/// Forward pieces share one graph so a single backward covers both outputs.
template <class T>
class DualBranchNet {
public:
    using G = Graph<T>;
    using Var = typename G::Var;

    struct HrOut {
        Var i_hr;
        Var fm_hr;
    };
    struct Outputs {
        Var i_hr;
        Var fm_hr;
        Var fm_ex;
        Var score;
        Var fm_fu;
        Var i_re;
    };

    explicit DualBranchNet(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    std::vector<Parameter<T>>& parameters() { return params_; }
    const std::vector<Parameter<T>>& parameters() const { return params_; }
    Parameter<T>& parameter(const std::string& name);
    const Parameter<T>& parameter(const std::string& name) const;
    std::int64_t parameter_count() const;
    void zero_grad();

    HrOut forward_hr_branch(G& g, Var i_ar);
    Var forward_ex(G& g, Var i_ar);
    /// Operator G: concat(fm_hr, fm_ex, I_AR) -> conv -> leaky -> conv.
    Var scoremap(G& g, Var fm_hr, Var fm_ex, Var i_ar);
    /// score * fm_hr + fm_ex
    Var fuse(G& g, Var score, Var fm_hr, Var fm_ex);
    Var gated_fusion(G& g, Var fm_hr, Var fm_ex, Var i_ar);
    Var reconstruct(G& g, Var fm_fu);
    Outputs forward_full(G& g, Var i_ar);

    /// Inference without a tape: returns {I_HR, I_RE}.
    std::pair<Tensor<T>, Tensor<T>> infer(const Tensor<T>& i_ar);

private:
    void add_param(const std::string& name, Tensor<T> value, int fan_in);
    void add_conv(const std::string& name, int cin, int cout, int k);
    void add_deconv(const std::string& name, int cin, int cout, int k, int stride);
    Var conv(G& g, Var x, const std::string& name, int stride = 1);
    Var deconv(G& g, Var x, const std::string& name, int stride);
    Var act(G& g, Var x, bool leaky);
    Var resblock(G& g, Var x, const std::string& name, bool leaky);
    Var dense_group(G& g, Var x, const std::string& name, int blocks, bool leaky);
    void check_input(const Tensor<T>& x, const std::string& layer) const;

    ModelConfig config_;
    std::vector<Parameter<T>> params_;
    std::map<std::string, std::size_t> index_;
    std::vector<int> fan_in_;
};

extern template class DualBranchNet<float>;
extern template class DualBranchNet<double>;

} // namespace pamsr::nn
