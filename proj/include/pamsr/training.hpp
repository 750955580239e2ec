#pragma once

#include "pamsr/autograd.hpp"
#include "pamsr/dataset.hpp"
#include "pamsr/image.hpp"
#include "pamsr/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pamsr::training {

enum class Stage { Pretrain, Finetune };
const char* stage_name(Stage stage);

struct TrainConfig {
    int epochs = 50;
    double lr_phase1 = 1e-4;
    double lr_phase2 = 1e-5;
    int batch_size = 4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double tau = 1.0;    // SSIM weight inside each composite loss
    double lambda = 1.0; // weight of the reconstruction loss
    std::uint64_t shuffle_seed = 0;
    Stage stage = Stage::Pretrain;

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// MSE + tau * (1 - SSIM).
double composite_loss(const Image& a, const Image& b, double tau);
/// composite(I_HR, I_DGT) + lambda * composite(I_RE, I_GT).
double total_loss(const Image& i_hr, const Image& i_dgt, const Image& i_re, const Image& i_gt, double tau,
                  double lambda);

/// Graph form of total_loss over a batch, used by the optimizer and the gradient checks.
template <class T>
typename nn::Graph<T>::Var total_loss_node(nn::Graph<T>& g, typename nn::Graph<T>::Var i_hr,
                                           const nn::Tensor<T>& i_dgt, typename nn::Graph<T>::Var i_re,
                                           const nn::Tensor<T>& i_gt, double tau, double lambda);

/// lr_phase1 up to epoch ceil(epochs / 2), lr_phase2 after. Epochs are 1-based.
double lr_schedule(int epoch, const TrainConfig& config);

class Adam {
public:
    Adam(std::vector<nn::Parameter<float>>& params, const TrainConfig& config);
    void step(double lr);
    long steps() const { return t_; }

private:
    std::vector<nn::Parameter<float>>& params_;
    double beta1_, beta2_, eps_;
    std::vector<std::vector<float>> m_, v_;
    long t_ = 0;
};

/// Stacks triplets into (B, 1, H, W) tensors.
nn::Tensor<float> stack(const std::vector<const dataset::ImageTriplet*>& batch, int which);
enum { kArInput = 0, kOrDown = 1, kOrFull = 2 };

Image to_image(const nn::Tensor<float>& t, int sample);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    long steps = 0;
    nlohmann::json to_json() const;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    long total_steps = 0;
    int best_epoch = 0;
    double best_val_ssim = -1.0;
};

struct ValStats {
    double loss = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

/// Mean loss and mean PSNR/SSIM of I_RE against or_full.
ValStats validate(nn::DualBranchNet<float>& model, const std::vector<dataset::ImageTriplet>& set,
                  const TrainConfig& config);

struct RunOutput {
    std::filesystem::path dir; // empty: no files written
    nlohmann::json provenance = nlohmann::json::object();
};

/// Per epoch: reshuffle, Adam over batches (last partial batch included),
/// validate, log a JSONL record and write best.ckpt / last.ckpt.
/// Throws std::runtime_error naming the batch on a non-finite loss.
TrainResult train(nn::DualBranchNet<float>& model, const std::vector<dataset::ImageTriplet>& train_set,
                  const std::vector<dataset::ImageTriplet>& val_set, const TrainConfig& config,
                  const RunOutput& output = {});

/// Loads the train and val splits named by the manifest.
TrainResult train(const std::filesystem::path& manifest, nn::DualBranchNet<float>& model, const TrainConfig& config,
                  const std::filesystem::path& out_dir);

/// Resumes from a checkpoint. When `expected` is given its config must match
/// the checkpoint's, checked before any update. The checkpoint file hash is
/// recorded as provenance in every output.
TrainResult fine_tune(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                      const TrainConfig& config, const std::filesystem::path& out_dir,
                      const nn::ModelConfig* expected = nullptr);

} // namespace pamsr::training
