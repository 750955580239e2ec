// pamsr: command-line front end for PSF simulation, dataset synthesis,
// training, fine-tuning and evaluation.

#include "pamsr/checkpoint.hpp"
#include "pamsr/dataset.hpp"
#include "pamsr/evaluation.hpp"
#include "pamsr/metrics.hpp"
#include "pamsr/psf.hpp"
#include "pamsr/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pamsr;

namespace {

json load_json(const fs::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open config " + path.string());
    return json::parse(is, nullptr, true, true);
}

psf::PsfKernel simulated_psf_fwhm(const psf::TransducerSpec& spec, const psf::PsfOptions& opt, double* fwhm_um)
{
    auto k = psf::synthesize_psf(spec, opt);
    std::vector<double> row(k.size);
    for (int c = 0; c < k.size; ++c)
        row[c] = k(k.radius(), c);
    *fwhm_um = metrics::fwhm(row, opt.pixel_pitch) * 1e6;
    return k;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"AR-PAM to OR-PAM super-resolution toolkit"};
    app.require_subcommand(1);

    // simulate-psf
    psf::TransducerSpec spec;
    psf::PsfOptions psf_opt;
    fs::path psf_out = "psf.txt";
    auto* sim = app.add_subcommand("simulate-psf", "Synthesize the broadband transducer PSF kernel");
    sim->add_option("--aperture-radius", spec.aperture_radius, "m")->capture_default_str();
    sim->add_option("--focal-length", spec.focal_length, "m")->capture_default_str();
    sim->add_option("--sound-speed", spec.sound_speed, "m/s")->capture_default_str();
    sim->add_option("--center-frequency", spec.center_frequency, "Hz")->capture_default_str();
    sim->add_option("--bandwidth", spec.fractional_bandwidth, "-6 dB fractional bandwidth")->capture_default_str();
    sim->add_option("--pitch", psf_opt.pixel_pitch, "pixel pitch, m")->capture_default_str();
    sim->add_option("--n-freq", psf_opt.n_freq, "frequency samples")->capture_default_str();
    sim->add_option("--max-size", psf_opt.max_size, "kernel size cap")->capture_default_str();
    sim->add_option("--truncation", psf_opt.truncation, "relative amplitude cut")->capture_default_str();
    sim->add_option("--out", psf_out, "kernel file")->capture_default_str();

    // synth-vessels
    dataset::VesselOptions vopt;
    int n_images = 10;
    std::uint64_t vseed = 0;
    fs::path vout = "vessels";
    auto* syn = app.add_subcommand("synth-vessels", "Write procedural vascular ground-truth images (16-bit PNG)");
    syn->add_option("--count", n_images)->capture_default_str();
    syn->add_option("--rows", vopt.rows)->capture_default_str();
    syn->add_option("--cols", vopt.cols)->capture_default_str();
    syn->add_option("--roots", vopt.roots)->capture_default_str();
    syn->add_option("--seed", vseed)->capture_default_str();
    syn->add_option("--out", vout)->capture_default_str();

    // build-dataset
    fs::path bd_input, bd_kernel, bd_out, bd_config;
    dataset::BuildOptions bopt;
    auto* bd = app.add_subcommand("build-dataset", "Tile, degrade and split ground-truth images");
    bd->add_option("--input", bd_input, "directory of ground-truth images")->required();
    bd->add_option("--kernel", bd_kernel, "PSF kernel file")->required();
    bd->add_option("--sigma", bopt.degradation.noise_sigma, "AWGN sigma")->capture_default_str();
    bd->add_option("--seed", bopt.degradation.rng_seed, "degradation and split seed")->capture_default_str();
    bd->add_option("--out", bd_out, "output directory")->required();
    bd->add_option("--config", bd_config, "JSON overrides");

    // train / finetune
    fs::path tr_manifest, tr_config, tr_out, ft_from;
    auto* tr = app.add_subcommand("train", "Pretrain on a manifest");
    tr->add_option("--manifest", tr_manifest)->required();
    tr->add_option("--config", tr_config, "JSON with \"model\" and \"train\" sections");
    tr->add_option("--out", tr_out)->required();
    auto* ft = app.add_subcommand("finetune", "Fine-tune a checkpoint on a paired manifest");
    ft->add_option("--from", ft_from, "pretrained checkpoint")->required();
    ft->add_option("--manifest", tr_manifest)->required();
    ft->add_option("--config", tr_config);
    ft->add_option("--out", tr_out)->required();

    // evaluate / report
    fs::path ev_manifest, ev_ckpt, ev_out = "report.json";
    std::string ev_split = "test";
    bool no_bicubic = false;
    evaluation::SpeedInputs speed;
    auto* ev = app.add_subcommand("evaluate", "Score bicubic and a checkpoint on a split");
    ev->add_option("--manifest", ev_manifest)->required();
    ev->add_option("--checkpoint", ev_ckpt);
    ev->add_option("--split", ev_split)->capture_default_str();
    ev->add_flag("--no-bicubic", no_bicubic);
    ev->add_option("--out", ev_out)->capture_default_str();

    fs::path rp_report, rp_profiles;
    double rp_pitch_um = 4.0;
    auto* rp = app.add_subcommand("report", "Render a report table and optional line-profile data");
    rp->add_option("--report", rp_report)->required();
    rp->add_option("--manifest", ev_manifest, "needed for --profiles");
    rp->add_option("--checkpoint", ev_ckpt);
    rp->add_option("--split", ev_split)->capture_default_str();
    rp->add_option("--profiles", rp_profiles, "directory for profile_<id>.dat files");
    rp->add_option("--pitch-um", rp_pitch_um)->capture_default_str();

    auto* sp = app.add_subcommand("speed", "Scan-rate and PRR calculator");
    sp->add_option("--prr", speed.pulse_rate_hz)->capture_default_str();
    sp->add_option("--nx", speed.nx)->capture_default_str();
    sp->add_option("--ny", speed.ny)->capture_default_str();
    sp->add_option("--sound-speed", speed.sound_speed)->capture_default_str();
    sp->add_option("--depth", speed.depth, "m")->capture_default_str();
    sp->add_option("--dx", speed.down_x)->capture_default_str();
    sp->add_option("--dy", speed.down_y)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            double fw = 0.0;
            auto k = simulated_psf_fwhm(spec, psf_opt, &fw);
            psf::write_kernel(k, psf_out);
            std::printf("kernel %dx%d, pitch %.3g um, FWHM %.2f um -> %s\n", k.size, k.size, k.pixel_pitch * 1e6, fw,
                        psf_out.c_str());
        } else if (*syn) {
            fs::create_directories(vout);
            for (int i = 0; i < n_images; ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "vessel_%04d.png", i);
                dataset::write_png16(dataset::synthesize_vasculature(vopt, vseed + i), vout / name);
            }
            std::printf("%d images -> %s\n", n_images, vout.c_str());
        } else if (*bd) {
            bopt.split_seed = bopt.degradation.rng_seed;
            if (!bd_config.empty()) {
                const json j = load_json(bd_config);
                auto& d = bopt.degradation;
                d.down_x = j.value("down_x", d.down_x);
                d.down_y = j.value("down_y", d.down_y);
                d.offset_x = j.value("offset_x", d.offset_x);
                d.offset_y = j.value("offset_y", d.offset_y);
                bopt.crop.background_floor = j.value("background_floor", bopt.crop.background_floor);
                bopt.crop.border_trim = j.value("border_trim", bopt.crop.border_trim);
                bopt.fractions = j.value("fractions", bopt.fractions);
                if (j.value("normalize", std::string("bit_depth")) == "per_image_max")
                    bopt.normalize = dataset::NormalizeMode::PerImageMax;
                bopt.split_seed = j.value("split_seed", bopt.split_seed);
            }
            const auto kernel = psf::read_kernel(bd_kernel);
            const auto m = dataset::build_dataset(bd_input, kernel, bopt, bd_out);
            std::printf("%zu triplets (train %zu, val %zu, test %zu) -> %s\n", m.entries.size(),
                        m.indices(dataset::Split::Train).size(), m.indices(dataset::Split::Val).size(),
                        m.indices(dataset::Split::Test).size(), (bd_out / "manifest.jsonl").c_str());
        } else if (*tr) {
            const json cfg = tr_config.empty() ? json::object() : load_json(tr_config);
            const auto mc = nn::config_from_json(cfg.value("model", json::object()));
            const auto tc = training::train_config_from_json(cfg.value("train", json::object()));
            nn::DualBranchNet<float> model(mc);
            std::printf("model: %lld parameters\n", static_cast<long long>(model.parameter_count()));
            const auto r = training::train(tr_manifest, model, tc, tr_out);
            for (const auto& e : r.history)
                std::printf("%s\n", e.to_json().dump().c_str());
            std::printf("best val SSIM %.4f at epoch %d\n", r.best_val_ssim, r.best_epoch);
        } else if (*ft) {
            const json cfg = tr_config.empty() ? json::object() : load_json(tr_config);
            auto tc = training::train_config_from_json(cfg.value("train", json::object()));
            std::optional<nn::ModelConfig> expected;
            if (cfg.contains("model"))
                expected = nn::config_from_json(cfg["model"]);
            const auto r = training::fine_tune(ft_from, tr_manifest, tc, tr_out, expected ? &*expected : nullptr);
            for (const auto& e : r.history)
                std::printf("%s\n", e.to_json().dump().c_str());
        } else if (*ev) {
            evaluation::EvalOptions opt;
            opt.bicubic = !no_bicubic;
            std::optional<fs::path> ck;
            if (!ev_ckpt.empty())
                ck = ev_ckpt;
            const auto report = evaluation::evaluate(ev_manifest, dataset::parse_split(ev_split), ck, opt);
            evaluation::write_report(report, ev_out);
            std::cout << evaluation::render_table(report);
        } else if (*rp) {
            const auto report = evaluation::read_report(rp_report);
            std::cout << evaluation::render_table(report);
            if (!rp_profiles.empty()) {
                if (ev_manifest.empty())
                    throw std::invalid_argument("--profiles needs --manifest");
                const auto m = dataset::read_manifest(ev_manifest);
                const auto set = dataset::load_split(m, ev_manifest.parent_path(), dataset::parse_split(ev_split));
                std::optional<nn::DualBranchNet<float>> model;
                if (!ev_ckpt.empty()) {
                    const auto ck = nn::read_checkpoint(ev_ckpt);
                    model.emplace(ck.config);
                    nn::load_weights(*model, ck);
                }
                const auto files = evaluation::write_profiles(set, model ? &*model : nullptr, rp_pitch_um, rp_profiles);
                std::printf("%zu profile files -> %s\n", files.size(), rp_profiles.c_str());
            }
        } else if (*sp) {
            const auto s = evaluation::speed_block(speed);
            std::printf("scan rate        %.6g frames/s\n", s.scan_rate);
            std::printf("sparse scan rate %.6g frames/s\n", s.scan_rate_sparse);
            std::printf("speed-up         %.6g\n", s.speedup);
            std::printf("critical PRR     %.6g Hz\n", s.critical_prr);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
