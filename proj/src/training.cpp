#include "pamsr/training.hpp"
#include "pamsr/checkpoint.hpp"
#include "pamsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pamsr::training {

using nlohmann::json;
using nn::Tensor;

const char* stage_name(Stage stage) { return stage == Stage::Pretrain ? "pretrain" : "finetune"; }

void TrainConfig::validate() const
{
    if (epochs < 0)
        throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0))
        throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("TrainConfig: betas must be in [0, 1)");
    if (!(tau >= 0.0) || !(lambda >= 0.0))
        throw std::invalid_argument("TrainConfig: tau and lambda must be >= 0");
}

json train_config_to_json(const TrainConfig& c)
{
    return json{{"epochs", c.epochs},        {"lr_phase1", c.lr_phase1},
                {"lr_phase2", c.lr_phase2},  {"batch_size", c.batch_size},
                {"beta1", c.beta1},          {"beta2", c.beta2},
                {"eps", c.eps},              {"tau", c.tau},
                {"lambda", c.lambda},        {"shuffle_seed", c.shuffle_seed},
                {"stage", stage_name(c.stage)}};
}

TrainConfig train_config_from_json(const json& j)
{
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.lr_phase1 = j.value("lr_phase1", c.lr_phase1);
    c.lr_phase2 = j.value("lr_phase2", c.lr_phase2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.tau = j.value("tau", c.tau);
    c.lambda = j.value("lambda", c.lambda);
    c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
    const std::string stage = j.value("stage", std::string("pretrain"));
    if (stage == "pretrain")
        c.stage = Stage::Pretrain;
    else if (stage == "finetune")
        c.stage = Stage::Finetune;
    else
        throw std::invalid_argument("unknown stage '" + stage + "'");
    c.validate();
    return c;
}

double composite_loss(const Image& a, const Image& b, double tau)
{
    require_same_shape(a, b, "composite_loss");
    double sq = 0.0;
    const auto pa = a.pixels(), pb = b.pixels();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        const double d = pa[i] - pb[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(pa.size());
    return tau == 0.0 ? mse : mse + tau * (1.0 - metrics::ssim(a, b));
}

double total_loss(const Image& i_hr, const Image& i_dgt, const Image& i_re, const Image& i_gt, double tau,
                  double lambda)
{
    return composite_loss(i_hr, i_dgt, tau) + lambda * composite_loss(i_re, i_gt, tau);
}

template <class T>
typename nn::Graph<T>::Var total_loss_node(nn::Graph<T>& g, typename nn::Graph<T>::Var i_hr, const Tensor<T>& i_dgt,
                                           typename nn::Graph<T>::Var i_re, const Tensor<T>& i_gt, double tau,
                                           double lambda)
{
    auto l1 = g.composite_loss(i_hr, i_dgt, tau);
    auto l2 = g.composite_loss(i_re, i_gt, tau);
    return g.axpy(l1, l2, static_cast<T>(lambda));
}

template nn::Graph<float>::Var total_loss_node<float>(nn::Graph<float>&, nn::Graph<float>::Var, const Tensor<float>&,
                                                      nn::Graph<float>::Var, const Tensor<float>&, double, double);
template nn::Graph<double>::Var total_loss_node<double>(nn::Graph<double>&, nn::Graph<double>::Var,
                                                        const Tensor<double>&, nn::Graph<double>::Var,
                                                        const Tensor<double>&, double, double);

double lr_schedule(int epoch, const TrainConfig& config)
{
    if (epoch < 1 || epoch > config.epochs)
        throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) + " outside [1, " +
                                std::to_string(config.epochs) + "]");
    const int boundary = (config.epochs + 1) / 2;
    return epoch <= boundary ? config.lr_phase1 : config.lr_phase2;
}

Adam::Adam(std::vector<nn::Parameter<float>>& params, const TrainConfig& config)
    : params_(params), beta1_(config.beta1), beta2_(config.beta2), eps_(config.eps)
{
    for (const auto& p : params_) {
        m_.emplace_back(p.value.size(), 0.0f);
        v_.emplace_back(p.value.size(), 0.0f);
    }
}

void Adam::step(double lr)
{
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float step = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(eps_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        float* w = params_[k].value.ptr();
        const float* g = params_[k].grad.ptr();
        float* m = m_[k].data();
        float* v = v_[k].data();
        const std::size_t n = m_[k].size();
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            w[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
        }
    }
}

Tensor<float> stack(const std::vector<const dataset::ImageTriplet*>& batch, int which)
{
    auto pick = [which](const dataset::ImageTriplet& t) -> const Image& {
        return which == kArInput ? t.ar_input : which == kOrDown ? t.or_down : t.or_full;
    };
    if (batch.empty())
        throw std::invalid_argument("stack: empty batch");
    const Image& first = pick(*batch.front());
    Tensor<float> out(static_cast<int>(batch.size()), 1, first.rows(), first.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Image& im = pick(*batch[b]);
        if (!im.same_shape(first))
            throw std::invalid_argument("stack: triplet " + batch[b]->id() + " has a different shape");
        std::transform(im.pixels().begin(), im.pixels().end(), out.ptr() + b * out.sample(),
                       [](double v) { return static_cast<float>(v); });
    }
    return out;
}

Image to_image(const Tensor<float>& t, int sample)
{
    Image im(t.h, t.w);
    const float* p = t.ptr() + static_cast<std::size_t>(sample) * t.sample();
    auto px = im.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = p[i];
    return im;
}

json EpochRecord::to_json() const
{
    return json{{"epoch", epoch},       {"lr", lr},           {"train_loss", train_loss}, {"val_loss", val_loss},
                {"val_psnr", val_psnr}, {"val_ssim", val_ssim}, {"steps", steps}};
}

namespace {

std::vector<std::vector<const dataset::ImageTriplet*>> batches_of(const std::vector<dataset::ImageTriplet>& set,
                                                                  const std::vector<std::size_t>& order, int size)
{
    std::vector<std::vector<const dataset::ImageTriplet*>> out;
    for (std::size_t i = 0; i < order.size(); i += size) {
        std::vector<const dataset::ImageTriplet*> b;
        for (std::size_t j = i; j < std::min(order.size(), i + size); ++j)
            b.push_back(&set[order[j]]);
        out.push_back(std::move(b));
    }
    return out;
}

std::string batch_ids(const std::vector<const dataset::ImageTriplet*>& batch)
{
    std::string s;
    for (const auto* t : batch)
        s += (s.empty() ? "" : ", ") + t->id();
    return s;
}

bool all_finite(const std::vector<nn::Parameter<float>>& params)
{
    for (const auto& p : params)
        for (float v : p.value.data)
            if (!std::isfinite(v))
                return false;
    return true;
}

} // namespace

ValStats validate(nn::DualBranchNet<float>& model, const std::vector<dataset::ImageTriplet>& set,
                  const TrainConfig& config)
{
    ValStats s;
    if (set.empty())
        return s;
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    for (const auto& batch : batches_of(set, order, config.batch_size)) {
        auto [i_hr, i_re] = model.infer(stack(batch, kArInput));
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Image hr = to_image(i_hr, static_cast<int>(b));
            const Image re = to_image(i_re, static_cast<int>(b));
            s.loss += total_loss(hr, batch[b]->or_down, re, batch[b]->or_full, config.tau, config.lambda);
            s.psnr += metrics::psnr(batch[b]->or_full, re);
            s.ssim += metrics::ssim(batch[b]->or_full, re);
        }
    }
    const double n = static_cast<double>(set.size());
    s.loss /= n;
    s.psnr /= n;
    s.ssim /= n;
    return s;
}

TrainResult train(nn::DualBranchNet<float>& model, const std::vector<dataset::ImageTriplet>& train_set,
                  const std::vector<dataset::ImageTriplet>& val_set, const TrainConfig& config,
                  const RunOutput& output)
{
    config.validate();
    if (train_set.empty())
        throw std::invalid_argument("train: empty training split");

    std::ofstream log;
    if (!output.dir.empty()) {
        std::filesystem::create_directories(output.dir);
        log.open(output.dir / "train_log.jsonl", std::ios::trunc);
        if (!log)
            throw std::runtime_error("cannot write " + (output.dir / "train_log.jsonl").string());
    }

    TrainResult result;
    Adam adam(model.parameters(), config);
    std::mt19937_64 rng(config.shuffle_seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto meta = [&](const EpochRecord& r) {
        return json{{"stage", stage_name(config.stage)},
                    {"epoch", r.epoch},
                    {"steps", result.total_steps},
                    {"train_config", train_config_to_json(config)},
                    {"val_ssim", r.val_ssim},
                    {"val_psnr", r.val_psnr},
                    {"provenance", output.provenance}};
    };

    if (config.epochs == 0 && !output.dir.empty())
        nn::save_checkpoint(output.dir / "last.ckpt", model, meta(EpochRecord{}));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = lr_schedule(epoch, config);
        double loss_sum = 0.0;
        long steps = 0;
        for (const auto& batch : batches_of(train_set, order, config.batch_size)) {
            const Tensor<float> x = stack(batch, kArInput);
            const Tensor<float> dgt = stack(batch, kOrDown);
            const Tensor<float> gt = stack(batch, kOrFull);
            model.zero_grad();
            nn::Graph<float> g;
            auto out = model.forward_full(g, g.input(x));
            auto loss = total_loss_node<float>(g, out.i_hr, dgt, out.i_re, gt, config.tau, config.lambda);
            const double l = loss->value.data[0];
            if (!std::isfinite(l))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " in batch [" +
                                         batch_ids(batch) + "]");
            g.backward(loss);
            adam.step(lr);
            if (!all_finite(model.parameters()))
                throw std::runtime_error("non-finite weights after update at epoch " + std::to_string(epoch) +
                                         " in batch [" + batch_ids(batch) + "]");
            loss_sum += l * static_cast<double>(batch.size());
            ++steps;
        }
        result.total_steps += steps;

        EpochRecord r;
        r.epoch = epoch;
        r.lr = lr;
        r.steps = steps;
        r.train_loss = loss_sum / static_cast<double>(train_set.size());
        const ValStats v = validate(model, val_set, config);
        r.val_loss = v.loss;
        r.val_psnr = v.psnr;
        r.val_ssim = v.ssim;
        result.history.push_back(r);

        const bool best = r.val_ssim > result.best_val_ssim;
        if (best) {
            result.best_val_ssim = r.val_ssim;
            result.best_epoch = epoch;
        }
        if (!output.dir.empty()) {
            log << r.to_json().dump() << '\n';
            log.flush();
            if (best)
                nn::save_checkpoint(output.dir / "best.ckpt", model, meta(r));
            nn::save_checkpoint(output.dir / "last.ckpt", model, meta(r));
        }
    }
    return result;
}

TrainResult train(const std::filesystem::path& manifest_path, nn::DualBranchNet<float>& model,
                  const TrainConfig& config, const std::filesystem::path& out_dir)
{
    const auto manifest = dataset::read_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    const auto train_set = dataset::load_split(manifest, root, dataset::Split::Train);
    const auto val_set = dataset::load_split(manifest, root, dataset::Split::Val);
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("manifest " + manifest_path.string() + " needs non-empty train and val splits");
    RunOutput out{out_dir, json{{"manifest_degradation_hash", manifest.degradation_hash}}};
    return train(model, train_set, val_set, config, out);
}

TrainResult fine_tune(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest_path,
                      const TrainConfig& config, const std::filesystem::path& out_dir, const nn::ModelConfig* expected)
{
    config.validate();
    const auto ck = nn::read_checkpoint(checkpoint);
    if (expected && !(*expected == ck.config))
        throw std::invalid_argument("fine_tune: checkpoint config " + nn::config_to_json(ck.config).dump() +
                                    " does not match requested " + nn::config_to_json(*expected).dump());
    nn::DualBranchNet<float> model(ck.config);
    nn::load_weights(model, ck);

    const auto manifest = dataset::read_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    const auto train_set = dataset::load_split(manifest, root, dataset::Split::Train);
    const auto val_set = dataset::load_split(manifest, root, dataset::Split::Val);
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("manifest " + manifest_path.string() + " needs non-empty train and val splits");

    TrainConfig cfg = config;
    cfg.stage = Stage::Finetune;
    RunOutput out{out_dir, json{{"pretrain_checkpoint_hash", nn::file_hash(checkpoint)},
                                {"manifest_degradation_hash", manifest.degradation_hash}}};
    return train(model, train_set, val_set, cfg, out);
}

} // namespace pamsr::training
