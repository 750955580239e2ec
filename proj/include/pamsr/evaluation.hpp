#pragma once

#include "pamsr/dataset.hpp"
#include "pamsr/metrics.hpp"
#include "pamsr/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pamsr::evaluation {

struct ImageRecord {
    std::string id;
    std::string method;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> fwhm_um;
    std::optional<double> cnr;
    bool ok = true;
    std::string error;
};

struct MethodSummary {
    std::string method;
    metrics::MeanSd psnr;
    metrics::MeanSd ssim;
    std::size_t failures = 0;
};

struct SpeedInputs {
    double pulse_rate_hz = 5000.0;
    long nx = 500;
    long ny = 500;
    double sound_speed = 1500.0;
    double depth = 10e-3;
    int down_x = 4;
    int down_y = 4;
};

struct SpeedBlock {
    SpeedInputs inputs;
    double scan_rate = 0.0;            // frames/s at full sampling
    double scan_rate_sparse = 0.0;     // frames/s with Nx/dx x Ny/dy
    double critical_prr = 0.0;         // Hz
    double speedup = 0.0;
};

SpeedBlock speed_block(const SpeedInputs& inputs);

struct MetricsReport {
    std::string split;
    std::vector<std::string> methods;
    std::vector<ImageRecord> records; // ordered by image, then method
    std::vector<MethodSummary> summary;
    SpeedBlock speed;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// Recomputes per-method mean +- sd over successful records.
std::vector<MethodSummary> summarize(const std::vector<std::string>& methods, const std::vector<ImageRecord>& records);

struct EvalOptions {
    bool bicubic = true;
    bool identity = false; // or_full scored against itself
    SpeedInputs speed;
};

/// Scores each method's 256x256 output against or_full. `model` may be null.
MetricsReport evaluate(const std::vector<dataset::ImageTriplet>& set, nn::DualBranchNet<float>* model,
                       const EvalOptions& options = {}, const std::string& split = "test");

MetricsReport evaluate(const std::filesystem::path& manifest, dataset::Split split,
                       const std::optional<std::filesystem::path>& checkpoint, const EvalOptions& options = {});

void write_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path);

/// Plain-text table: one row per method, PSNR and SSIM as mean +- sd.
std::string render_table(const MetricsReport& report);

/// Line profile through the brightest ground-truth pixel of each triplet;
/// writes <dir>/profile_<id>.dat with x (um) and one intensity column per
/// method. Returns the written paths.
std::vector<std::filesystem::path> write_profiles(const std::vector<dataset::ImageTriplet>& set,
                                                  nn::DualBranchNet<float>* model, double pixel_pitch_um,
                                                  const std::filesystem::path& dir);

} // namespace pamsr::evaluation
