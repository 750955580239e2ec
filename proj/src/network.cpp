#include "pamsr/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace pamsr::nn {

namespace {

constexpr int kDeconvKernel = 4;

std::int64_t conv_count(std::int64_t cin, std::int64_t cout, std::int64_t k) { return k * k * cin * cout + cout; }

std::string sub(const std::string& base, const std::string& leaf) { return base + "." + leaf; }

} // namespace

void ModelConfig::validate() const
{
    if (base_channels < 1 || kernel_size < 1 || upscale_stages < 1 || hr_local_resblocks < 1 ||
        hr_subresblocks < 1 || ex_resblocks < 1 || recon_resblocks < 1)
        throw std::invalid_argument("ModelConfig: all sizes and counts must be >= 1");
    if (kernel_size % 2 == 0)
        throw std::invalid_argument("ModelConfig: kernel_size must be odd");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
        throw std::invalid_argument("ModelConfig: leaky_slope must be in [0, 1)");
    const int reduce = 1 << (2 * upscale_stages);
    if (base_channels % reduce != 0)
        throw std::invalid_argument("ModelConfig: base_channels " + std::to_string(base_channels) +
                                    " not divisible by " + std::to_string(reduce) + " (pixel-shuffle reduction)");
}

int ModelConfig::output_channels() const { return base_channels >> (2 * upscale_stages); }

std::int64_t count_parameters(const ModelConfig& cfg)
{
    cfg.validate();
    const std::int64_t c = cfg.base_channels;
    const std::int64_t k = cfg.kernel_size;
    const std::int64_t rb = 2 * conv_count(c, c, k);

    auto dense = [&](std::int64_t blocks) {
        std::int64_t n = blocks * rb;
        for (std::int64_t i = 1; i < blocks; ++i)
            n += conv_count((i + 1) * c, c, 1);
        return n + conv_count((blocks + 1) * c, c, 1);
    };

    std::int64_t hr = conv_count(1, c, k);
    hr += cfg.hr_local_resblocks * dense(cfg.hr_subresblocks);
    hr += (cfg.hr_local_resblocks - 1) * conv_count(c, c, k);
    hr += (cfg.hr_local_resblocks - 1) * (conv_count(c, c, kDeconvKernel) + conv_count(c, c, k));
    hr += conv_count(c, c, k) + conv_count(c, 1, k);

    const std::int64_t ex = conv_count(1, c, k) + dense(cfg.ex_resblocks) + conv_count(c, c, k);
    const std::int64_t fu = conv_count(2 * c + 1, c, k) + conv_count(c, c, k);

    const std::int64_t co = cfg.output_channels();
    const std::int64_t re = cfg.recon_resblocks * rb + conv_count(co, co, k) + conv_count(co, 1, k);
    return hr + ex + fu + re;
}

template <class T>
DualBranchNet<T>::DualBranchNet(const ModelConfig& config) : config_(config)
{
    config_.validate();
    const int c = config_.base_channels;
    const int k = config_.kernel_size;

    auto resblock_params = [&](const std::string& name) {
        add_conv(sub(name, "conv1"), c, c, k);
        add_conv(sub(name, "conv2"), c, c, k);
    };
    auto dense_params = [&](const std::string& name, int blocks) {
        for (int i = 0; i < blocks; ++i) {
            const std::string b = name + ".rb" + std::to_string(i);
            if (i > 0)
                add_conv(sub(b, "merge"), (i + 1) * c, c, 1);
            resblock_params(b);
        }
        add_conv(sub(name, "merge"), (blocks + 1) * c, c, 1);
    };

    add_conv("hr.head", 1, c, k);
    for (int i = 0; i < config_.hr_local_resblocks; ++i) {
        if (i > 0)
            add_conv("hr.down" + std::to_string(i), c, c, k);
        dense_params("hr.lrb" + std::to_string(i), config_.hr_subresblocks);
    }
    for (int i = 1; i < config_.hr_local_resblocks; ++i) {
        const std::string d = "hr.dec" + std::to_string(i);
        add_deconv(sub(d, "deconv"), c, c, kDeconvKernel, 2);
        add_conv(sub(d, "conv"), c, c, k);
    }
    add_conv("hr.out1", c, c, k);
    add_conv("hr.out2", c, 1, k);

    add_conv("ex.head", 1, c, k);
    dense_params("ex.group", config_.ex_resblocks);
    add_conv("ex.tail", c, c, k);

    add_conv("fu.conv1", 2 * c + 1, c, k);
    add_conv("fu.conv2", c, c, k);

    for (int i = 0; i < config_.recon_resblocks; ++i)
        resblock_params("re.rb" + std::to_string(i));
    const int co = config_.output_channels();
    add_conv("re.conv1", co, co, k);
    add_conv("re.conv2", co, 1, k);

    std::mt19937_64 rng(config_.init_seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_[i]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : p.value.data)
            v = static_cast<T>(dist(rng));
        p.grad = Tensor<T>(p.value.n, p.value.c, p.value.h, p.value.w);
    }
}

template <class T>
void DualBranchNet<T>::add_param(const std::string& name, Tensor<T> value, int fan_in)
{
    index_[name] = params_.size();
    params_.push_back({name, std::move(value), {}});
    fan_in_.push_back(fan_in);
}

template <class T>
void DualBranchNet<T>::add_conv(const std::string& name, int cin, int cout, int k)
{
    const int fan_in = cin * k * k;
    add_param(name + ".weight", Tensor<T>(cout, cin, k, k), fan_in);
    add_param(name + ".bias", Tensor<T>(1, cout, 1, 1), fan_in);
}

template <class T>
void DualBranchNet<T>::add_deconv(const std::string& name, int cin, int cout, int k, int stride)
{
    // each output pixel sees (k / stride)^2 taps per input channel
    const int fan_in = cin * (k / stride) * (k / stride);
    add_param(name + ".weight", Tensor<T>(cin, cout, k, k), fan_in);
    add_param(name + ".bias", Tensor<T>(1, cout, 1, 1), fan_in);
}

template <class T>
Parameter<T>& DualBranchNet<T>::parameter(const std::string& name)
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("no parameter named " + name);
    return params_[it->second];
}

template <class T>
const Parameter<T>& DualBranchNet<T>::parameter(const std::string& name) const
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("no parameter named " + name);
    return params_[it->second];
}

template <class T>
std::int64_t DualBranchNet<T>::parameter_count() const
{
    std::int64_t n = 0;
    for (const auto& p : params_)
        n += static_cast<std::int64_t>(p.value.size());
    return n;
}

template <class T>
void DualBranchNet<T>::zero_grad()
{
    for (auto& p : params_)
        p.grad.fill(T(0));
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::conv(G& g, Var x, const std::string& name, int stride)
{
    Parameter<T>& w = parameter(name + ".weight");
    Parameter<T>& b = parameter(name + ".bias");
    return g.conv2d(x, g.param(w), g.param(b), stride, w.value.h / 2, name);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::deconv(G& g, Var x, const std::string& name, int stride)
{
    Parameter<T>& w = parameter(name + ".weight");
    Parameter<T>& b = parameter(name + ".bias");
    const int pad = (w.value.h - stride) / 2;
    return g.conv_transpose2d(x, g.param(w), g.param(b), stride, pad, name);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::act(G& g, Var x, bool leaky)
{
    return leaky ? g.leaky_relu(x, static_cast<T>(config_.leaky_slope)) : g.relu(x);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::resblock(G& g, Var x, const std::string& name, bool leaky)
{
    Var y = conv(g, act(g, conv(g, x, sub(name, "conv1")), leaky), sub(name, "conv2"));
    return g.add(y, x);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::dense_group(G& g, Var x, const std::string& name, int blocks,
                                                             bool leaky)
{
    std::vector<Var> feats{x};
    for (int i = 0; i < blocks; ++i) {
        const std::string b = name + ".rb" + std::to_string(i);
        Var in = i == 0 ? x : conv(g, g.concat(feats), sub(b, "merge"));
        feats.push_back(resblock(g, in, b, leaky));
    }
    return g.add(conv(g, g.concat(feats), sub(name, "merge")), x);
}

template <class T>
void DualBranchNet<T>::check_input(const Tensor<T>& x, const std::string& layer) const
{
    const int m = 1 << (config_.hr_local_resblocks - 1);
    if (x.c != 1 || x.h < 1 || x.w < 1 || x.h % m != 0 || x.w % m != 0)
        throw std::invalid_argument(layer + ": expected single-channel input with sides divisible by " +
                                    std::to_string(m) + ", got " + x.shape_string());
}

template <class T>
typename DualBranchNet<T>::HrOut DualBranchNet<T>::forward_hr_branch(G& g, Var i_ar)
{
    check_input(i_ar->value, "hr.head");
    Var h = conv(g, i_ar, "hr.head");
    for (int i = 0; i < config_.hr_local_resblocks; ++i) {
        if (i > 0)
            h = conv(g, h, "hr.down" + std::to_string(i), 2);
        h = dense_group(g, h, "hr.lrb" + std::to_string(i), config_.hr_subresblocks, false);
    }
    for (int i = 1; i < config_.hr_local_resblocks; ++i) {
        const std::string d = "hr.dec" + std::to_string(i);
        h = g.relu(conv(g, deconv(g, h, sub(d, "deconv"), 2), sub(d, "conv")));
    }
    Var fm_hr = h;
    Var r = conv(g, g.relu(conv(g, fm_hr, "hr.out1")), "hr.out2");
    return {g.add(i_ar, r), fm_hr};
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::forward_ex(G& g, Var i_ar)
{
    check_input(i_ar->value, "ex.head");
    Var h = act(g, conv(g, i_ar, "ex.head"), true);
    h = dense_group(g, h, "ex.group", config_.ex_resblocks, true);
    return conv(g, h, "ex.tail");
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::scoremap(G& g, Var fm_hr, Var fm_ex, Var i_ar)
{
    const int c = config_.base_channels;
    if (fm_hr->value.c != c || fm_ex->value.c != c)
        throw std::invalid_argument("fu.conv1: feature maps must have " + std::to_string(c) + " channels, got " +
                                    fm_hr->value.shape_string() + " and " + fm_ex->value.shape_string());
    Var cat = g.concat({fm_hr, fm_ex, i_ar});
    return conv(g, act(g, conv(g, cat, "fu.conv1"), true), "fu.conv2");
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::fuse(G& g, Var score, Var fm_hr, Var fm_ex)
{
    return g.add(g.mul(score, fm_hr), fm_ex);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::gated_fusion(G& g, Var fm_hr, Var fm_ex, Var i_ar)
{
    return fuse(g, scoremap(g, fm_hr, fm_ex, i_ar), fm_hr, fm_ex);
}

template <class T>
typename DualBranchNet<T>::Var DualBranchNet<T>::reconstruct(G& g, Var fm_fu)
{
    if (fm_fu->value.c != config_.base_channels)
        throw std::invalid_argument("re.rb0: expected " + std::to_string(config_.base_channels) +
                                    " channels, got " + fm_fu->value.shape_string());
    Var h = fm_fu;
    for (int i = 0; i < config_.recon_resblocks; ++i)
        h = resblock(g, h, "re.rb" + std::to_string(i), false);
    for (int s = 0; s < config_.upscale_stages; ++s)
        h = g.pixel_shuffle(h, 2);
    h = act(g, conv(g, h, "re.conv1"), true);
    return act(g, conv(g, h, "re.conv2"), true);
}

template <class T>
typename DualBranchNet<T>::Outputs DualBranchNet<T>::forward_full(G& g, Var i_ar)
{
    Outputs o{};
    auto hr = forward_hr_branch(g, i_ar);
    o.i_hr = hr.i_hr;
    o.fm_hr = hr.fm_hr;
    o.fm_ex = forward_ex(g, i_ar);
    o.score = scoremap(g, o.fm_hr, o.fm_ex, i_ar);
    o.fm_fu = fuse(g, o.score, o.fm_hr, o.fm_ex);
    o.i_re = reconstruct(g, o.fm_fu);
    return o;
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> DualBranchNet<T>::infer(const Tensor<T>& i_ar)
{
    G g(false);
    auto o = forward_full(g, g.input(i_ar));
    return {std::move(o.i_hr->value), std::move(o.i_re->value)};
}

template class DualBranchNet<float>;
template class DualBranchNet<double>;

} // namespace pamsr::nn
