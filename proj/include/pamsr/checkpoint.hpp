#pragma once

#include "pamsr/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pamsr::nn {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

struct Checkpoint {
    ModelConfig config;
    nlohmann::json meta = nlohmann::json::object(); // training state, provenance
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

/// Layout: "PAMSRCKP" magic, u32 version, u64 header length, JSON header
/// (config, meta, tensor index), then little-endian float32 payload.
/// Bytes depend only on the arguments.
void save_checkpoint(const std::filesystem::path& path, const DualBranchNet<float>& model,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies weights into the model. Throws if the config or tensor index differs.
void load_weights(DualBranchNet<float>& model, const Checkpoint& ckpt);

/// FNV-1a of the file bytes, hex.
std::string file_hash(const std::filesystem::path& path);

} // namespace pamsr::nn
