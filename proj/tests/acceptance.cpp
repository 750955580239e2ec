// Acceptance runner: `acceptance` runs every criterion, `acceptance 3 5` a subset.
// One PASS/FAIL line per criterion; exit status is nonzero if any selected one fails.

#include "pamsr/checkpoint.hpp"
#include "pamsr/dataset.hpp"
#include "pamsr/degradation.hpp"
#include "pamsr/evaluation.hpp"
#include "pamsr/kernels.hpp"
#include "pamsr/metrics.hpp"
#include "pamsr/network.hpp"
#include "pamsr/psf.hpp"
#include "pamsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace pamsr;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kJ1Root = 3.8317059702075107;
constexpr double kUHalf = 2.215089367724233;

// criterion 5 and 6 training settings (see README)
constexpr int kOverfitChannels = 64;
constexpr int kOverfitBatch = 1;
constexpr double kOverfitLr1 = 5e-4, kOverfitLr2 = 1.5e-4;

constexpr int kDeskImages = 240;
constexpr int kDeskChannels = 32;
constexpr int kDeskEpochs = 16;
constexpr int kDeskBatch = 2;
constexpr double kDeskLr1 = 1e-3, kDeskLr2 = 3e-4;
// MSE is ~1e-2 on sparse vessel tiles; tau = 1 leaves it no weight next to 1 - SSIM
constexpr double kDeskTau = 0.02;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path work_dir(const std::string& name)
{
    auto d = fs::current_path() / "acceptance_work" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::vector<dataset::SourceTile> vessel_tiles(std::size_t count, std::uint64_t seed0)
{
    std::vector<dataset::SourceTile> tiles;
    for (std::uint64_t s = seed0; tiles.size() < count; ++s) {
        const auto img = dataset::synthesize_vasculature({}, s);
        for (auto& t : dataset::crop_tiles(img))
            if (tiles.size() < count)
                tiles.push_back({"vessel_" + std::to_string(s), t});
    }
    return tiles;
}

template <class T>
nn::Tensor<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    nn::Tensor<T> t(n, c, h, w);
    for (auto& v : t.data)
        v = static_cast<T>(d(rng));
    return t;
}

// 1. broadband FWHM band and the monochromatic closed form
Outcome psf_physics()
{
    const psf::TransducerSpec s;
    const double w0 = 2 * kPi * s.center_frequency;

    const double step = 0.25e-6;
    std::vector<double> r;
    for (double x = -120e-6; x <= 120e-6 + 1e-12; x += step)
        r.push_back(std::abs(x));
    const double broad_um = metrics::fwhm(psf::broadband_profile(s, r, 64), step) * 1e6;

    std::vector<double> mono;
    for (double x : r)
        mono.push_back(std::abs(psf::focal_field_monochromatic(s, x, w0)));
    const double mono_um = metrics::fwhm(mono, step) * 1e6;
    const double closed_um = 2 * kUHalf * s.sound_speed * s.focal_length / (w0 * s.aperture_radius) * 1e6;
    const double rel = std::abs(mono_um - closed_um) / closed_um;

    // kernel actually used for degradation
    const auto k = psf::synthesize_psf(s);
    std::vector<double> row(k.size);
    for (int c = 0; c < k.size; ++c)
        row[c] = k(k.radius(), c);
    const double kernel_um = metrics::fwhm(row, k.pixel_pitch) * 1e6;

    const bool ok = broad_um >= 40 && broad_um <= 75 && kernel_um >= 40 && kernel_um <= 75 && rel < 0.02;
    return {ok, fmt("broadband FWHM %.2f um (kernel %.2f um) in [40, 75]; monochromatic %.3f um vs closed form "
                    "%.3f um, rel %.2e < 2e-2; first null %.2f um",
                    broad_um, kernel_um, mono_um, closed_um, rel,
                    kJ1Root * s.sound_speed * s.focal_length / (w0 * s.aperture_radius) * 1e6)};
}

// 2. quadrature vs closed form at 20 focal-plane points, second-term check
Outcome oracle_agreement()
{
    const psf::TransducerSpec s;
    const double w0 = 2 * kPi * s.center_frequency;
    const double x_null = kJ1Root * s.sound_speed * s.focal_length / (w0 * s.aperture_radius);
    const double ref = std::abs(psf::focal_field_monochromatic(s, 0.0, w0));
    const double num0 = std::abs(psf::field_numeric(s, {0.0, s.focal_length, w0}).value);
    // magnitude error relative to the closed-form peak; the shape error compares peak-normalized patterns
    double worst = 0.0, worst_x = 0.0, shape = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double x = x_null * i / 10.0;
        const double num = std::abs(psf::field_numeric(s, {x, s.focal_length, w0}).value);
        const double ana = std::abs(psf::focal_field_monochromatic(s, x, w0));
        const double rel = std::abs(num - ana) / ref;
        if (rel > worst) {
            worst = rel;
            worst_x = x;
        }
        shape = std::max(shape, std::abs(num / num0 - ana / ref));
    }
    psf::QuadratureOptions with;
    with.include_second_term = true;
    const double a = std::abs(psf::field_numeric(s, {0.0, s.focal_length, w0}).value);
    const double b = std::abs(psf::field_numeric(s, {0.0, s.focal_length, w0}, with).value);
    const double second = std::abs(b - a) / a;
    const bool ok = worst < 0.01 && second < 0.01;
    return {ok, fmt("worst |quadrature - closed form| / closed-form peak %.4f at x = %.1f um over 20 points to "
                    "2 first nulls (need < 0.01); on-axis quadrature %.3f vs closed form %.3f; peak-normalized shape "
                    "error %.4f; second term changes focus by %.2e (need < 0.01)",
                    worst, worst_x * 1e6, a, ref, shape, second)};
}

// 3. degradation contract
Outcome degradation_contract()
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image x(256, 256);
    for (double& v : x.pixels())
        v = u(rng);
    const auto k = psf::synthesize_psf(psf::TransducerSpec{});
    degradation::DegradationConfig cfg;
    cfg.rng_seed = 1234;

    const Image y = degradation::degrade(x, k, cfg);
    const Image composed = degradation::add_awgn(
        degradation::decimate(degradation::convolve2d(x, k), cfg.down_x, cfg.down_y), cfg.noise_sigma, cfg.rng_seed);
    const Image again = degradation::degrade(x, k, cfg);
    auto other = cfg;
    other.rng_seed = 1235;
    const Image different = degradation::degrade(x, k, other);

    const bool shape = y.rows() == 64 && y.cols() == 64;
    const bool exact = y == composed;
    const bool det = y == again;
    const bool seeded = !(y == different);
    return {shape && exact && det && seeded,
            fmt("output %dx%d (need 64x64); bit-exact blur->decimate->noise %s; repeat run identical %s; new seed "
                "differs %s",
                y.rows(), y.cols(), exact ? "yes" : "no", det ? "yes" : "no", seeded ? "yes" : "no")};
}

// 4. network shapes, fusion identities, pixel shuffle, gradient check
Outcome network_suite()
{
    std::vector<std::string> bad;
    nn::ModelConfig mc;
    mc.base_channels = 16;
    mc.init_seed = 11;

    nn::DualBranchNet<float> m(mc);
    const auto x = random_tensor<float>(1, 1, 64, 64, 1);
    const auto [hr, re] = m.infer(x);
    if (!(hr.h == 64 && hr.w == 64 && re.h == 256 && re.w == 256 && hr.c == 1 && re.c == 1))
        bad.push_back("shapes");

    {
        const int c = mc.base_channels;
        const auto fh = random_tensor<float>(1, c, 8, 8, 2, -1, 1);
        const auto fe = random_tensor<float>(1, c, 8, 8, 3, -1, 1);
        nn::Graph<float> g(false);
        auto vh = g.input(fh), ve = g.input(fe);
        auto z = m.fuse(g, g.input(nn::Tensor<float>(1, c, 8, 8, 0.f)), vh, ve);
        auto o = m.fuse(g, g.input(nn::Tensor<float>(1, c, 8, 8, 1.f)), vh, ve);
        bool ok = z->value.data == fe.data;
        for (std::size_t i = 0; i < fh.size(); ++i)
            ok = ok && o->value.data[i] == fh.data[i] + fe.data[i];
        if (!ok)
            bad.push_back("fusion identities");
    }

    for (int r : {2, 3}) {
        const int c = r * r * 2;
        const auto t = random_tensor<float>(2, c, 5, 7, 4 + r);
        std::vector<float> y(t.size()), back(t.size());
        kernels::pixel_shuffle(t.data.data(), 2, c, 5, 7, r, y.data());
        kernels::pixel_unshuffle(y.data(), 2, c, 5, 7, r, back.data());
        auto sx = t.data, sy = y;
        std::sort(sx.begin(), sx.end());
        std::sort(sy.begin(), sy.end());
        if (back != t.data || sx != sy)
            bad.push_back("pixel shuffle r=" + std::to_string(r));
    }

    // 64-bit miniature, probing every parameter group along its gradient
    nn::DualBranchNet<double> d(mc);
    const auto xi = random_tensor<double>(2, 1, 12, 12, 7);
    const auto dgt = random_tensor<double>(2, 1, 12, 12, 8);
    const auto gt = random_tensor<double>(2, 1, 48, 48, 9);
    auto loss = [&]() {
        nn::Graph<double> g(false);
        auto o = d.forward_full(g, g.input(xi));
        return training::total_loss_node<double>(g, o.i_hr, dgt, o.i_re, gt, 1.0, 1.0)->value.data[0];
    };
    d.zero_grad();
    {
        nn::Graph<double> g;
        auto o = d.forward_full(g, g.input(xi));
        g.backward(training::total_loss_node<double>(g, o.i_hr, dgt, o.i_re, gt, 1.0, 1.0));
    }
    double worst = 0.0;
    std::string worst_name;
    for (auto& p : d.parameters()) {
        std::vector<double> dir(p.grad.data);
        double norm = 0.0;
        for (double v : dir)
            norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            bad.push_back("zero gradient in " + p.name);
            continue;
        }
        double analytic = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) {
            dir[i] /= norm;
            analytic += dir[i] * p.grad.data[i];
        }
        const auto saved = p.value.data;
        const double h = 1e-6;
        for (std::size_t i = 0; i < dir.size(); ++i)
            p.value.data[i] = saved[i] + h * dir[i];
        const double up = loss();
        for (std::size_t i = 0; i < dir.size(); ++i)
            p.value.data[i] = saved[i] - h * dir[i];
        const double down = loss();
        p.value.data = saved;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-6});
        if (rel > worst) {
            worst = rel;
            worst_name = p.name;
        }
    }
    if (worst >= 1e-4)
        bad.push_back("gradient check");

    std::string failed;
    for (const auto& b : bad)
        failed += (failed.empty() ? "" : ", ") + b;
    return {bad.empty(), fmt("I_HR %dx%d, I_RE %dx%d; fusion identities, pixel shuffle r=2,3 checked; gradient "
                             "max rel err %.2e (%s) < 1e-4 over %zu groups%s%s",
                             hr.h, hr.w, re.h, re.w, worst, worst_name.c_str(), d.parameters().size(),
                             failed.empty() ? "" : "; failed: ", failed.c_str())};
}

// 5. overfit 8 simulated triplets
Outcome training_smoke()
{
    const auto k = psf::synthesize_psf(psf::TransducerSpec{});
    degradation::DegradationConfig dc;
    dc.rng_seed = 7;
    const auto trip = dataset::build_triplets(vessel_tiles(8, 100), k, dc);

    nn::ModelConfig mc;
    mc.base_channels = kOverfitChannels;
    mc.init_seed = 1;
    nn::DualBranchNet<float> m(mc);
    training::TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = kOverfitBatch;
    tc.lr_phase1 = kOverfitLr1;
    tc.lr_phase2 = kOverfitLr2;
    tc.shuffle_seed = 3;
    const auto r = training::train(m, trip, trip, tc, training::RunOutput{work_dir("overfit"), {}});

    const double first = r.history.front().train_loss, last = r.history.back().train_loss;
    const auto v = training::validate(m, trip, tc);
    double lo = 1.0;
    for (const auto& t : trip) {
        const auto out = m.infer(training::stack({&t}, training::kArInput)).second;
        lo = std::min(lo, metrics::ssim(t.or_full, training::to_image(out, 0)));
    }
    const bool ok = last < 0.05 * first && v.ssim > 0.9;
    return {ok, fmt("train loss %.4f -> %.4f (ratio %.3f, need < 0.05); SSIM(I_RE, I_GT) mean %.4f (min %.4f), "
                    "need > 0.9; PSNR %.2f dB",
                    first, last, last / first, v.ssim, lo, v.psnr)};
}

// 6. desk-scale quality against bicubic
Outcome desk_quality()
{
    const auto root = work_dir("desk");
    const auto img_dir = root / "images";
    fs::create_directories(img_dir);
    for (int i = 0; i < kDeskImages; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "vessel_%04d.png", i);
        dataset::write_png16(dataset::quantize16(dataset::synthesize_vasculature({}, 1000 + i)), img_dir / name);
    }
    dataset::BuildOptions bo;
    bo.degradation.rng_seed = 21;
    bo.split_seed = 21;
    const auto manifest =
        dataset::build_dataset(img_dir, psf::synthesize_psf(psf::TransducerSpec{}), bo, root / "dataset");
    const auto train_set = dataset::load_split(manifest, root / "dataset", dataset::Split::Train);
    const auto val_set = dataset::load_split(manifest, root / "dataset", dataset::Split::Val);
    const auto test_set = dataset::load_split(manifest, root / "dataset", dataset::Split::Test);

    nn::ModelConfig mc;
    mc.base_channels = kDeskChannels;
    mc.init_seed = 2;
    nn::DualBranchNet<float> m(mc);
    training::TrainConfig tc;
    tc.epochs = kDeskEpochs;
    tc.batch_size = kDeskBatch;
    tc.lr_phase1 = kDeskLr1;
    tc.lr_phase2 = kDeskLr2;
    tc.tau = kDeskTau;
    tc.shuffle_seed = 4;
    const auto r = training::train(m, train_set, val_set, tc, training::RunOutput{root / "run", {}});
    // score the checkpoint selected on validation
    nn::load_weights(m, nn::read_checkpoint(root / "run" / "best.ckpt"));

    const auto rep = evaluation::evaluate(test_set, &m, {}, "test");
    evaluation::write_report(rep, root / "report.json");
    const auto& bic = rep.summary[0];
    const auto& mod = rep.summary[1];
    const double dp = mod.psnr.mean - bic.psnr.mean, ds = mod.ssim.mean - bic.ssim.mean;
    const bool ok = train_set.size() >= 500 && dp >= 5.0 && ds >= 0.2 && mod.failures == 0;
    return {ok, fmt("%zu train / %zu val / %zu test tiles (need >= 500 train); best epoch %d; test PSNR model %.2f "
                    "+- %.2f vs bicubic %.2f +- %.2f (gain %.2f dB, need >= 5); SSIM %.3f +- %.3f vs %.3f +- %.3f "
                    "(gain %.3f, need >= 0.2)",
                    train_set.size(), val_set.size(), test_set.size(), r.best_epoch, mod.psnr.mean, mod.psnr.sd,
                    bic.psnr.mean, bic.psnr.sd, dp, mod.ssim.mean, mod.ssim.sd, bic.ssim.mean, bic.ssim.sd, ds)};
}

// 7. FWHM oracle and speed calculus
Outcome speed_and_fwhm()
{
    const double sigma = 5.0;
    std::vector<double> p;
    for (int x = -40; x <= 40; ++x)
        p.push_back(std::exp(-0.5 * x * x / (sigma * sigma)));
    const double fw = metrics::fwhm(p, 1.0);
    const bool fw_ok = std::abs(fw - 2.355 * sigma) <= 1.0;
    const bool sp = metrics::speedup_factor(4, 4) == 16.0;
    const double sr = metrics::scan_rate(5000.0, 500, 500);
    const bool sr_ok = sr == 5000.0 / (500.0 * 500.0) && metrics::scan_rate(5000.0, 125, 125) == 16 * sr;
    const double prr = metrics::critical_prr(1500.0, 10e-3);
    const bool prr_ok = prr == 1500.0 / 10e-3;
    return {fw_ok && sp && sr_ok && prr_ok,
            fmt("Gaussian sigma 5 px FWHM %.3f px vs 2.355 sigma = %.3f (within 1 px %s); speedup(4,4) = %.0f; "
                "scan_rate(5 kHz, 500x500) = %.4f frames/s; critical_prr(1500 m/s, 10 mm) = %.0f Hz",
                fw, 2.355 * sigma, fw_ok ? "yes" : "no", metrics::speedup_factor(4, 4), sr, prr)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

// 8. two CLI pipeline runs give identical artifacts
Outcome determinism()
{
    const std::string cli = PAMSR_CLI;
    const auto root = work_dir("determinism");
    {
        std::ofstream(root / "train.json") << R"({"model":{"base_channels":16,"init_seed":3},)"
                                           << R"("train":{"epochs":2,"batch_size":2,"lr_phase1":1e-3,)"
                                           << R"("lr_phase2":3e-4,"shuffle_seed":9}})";
        std::ofstream(root / "build.json") << R"({"fractions":[0.5,0.25,0.25]})";
    }
    auto run = [&](const std::string& tag) {
        const auto d = root / tag;
        fs::create_directories(d);
        const std::string q = "\"" + d.string() + "\"", c = "\"" + cli + "\"";
        const std::string log = " >> \"" + (root / (tag + ".log")).string() + "\" 2>&1";
        const std::vector<std::string> steps{
            c + " synth-vessels --count 4 --seed 17 --out " + q + "/images",
            c + " simulate-psf --out " + q + "/psf.json",
            c + " build-dataset --input " + q + "/images --kernel " + q + "/psf.json --seed 5 --config \"" +
                (root / "build.json").string() + "\" --out " + q + "/data",
            c + " train --manifest " + q + "/data/manifest.jsonl --config \"" + (root / "train.json").string() +
                "\" --out " + q + "/run",
            c + " evaluate --manifest " + q + "/data/manifest.jsonl --checkpoint " + q + "/run/last.ckpt --out " + q +
                "/report.json",
        };
        for (const auto& s : steps)
            if (std::system((s + log).c_str()) != 0)
                return "step failed: " + s;
        return std::string{};
    };
    const auto e1 = run("a"), e2 = run("b");
    if (!e1.empty() || !e2.empty())
        return {false, e1.empty() ? e2 : e1};

    std::string detail;
    bool ok = true;
    for (const char* f : {"data/manifest.jsonl", "run/best.ckpt", "run/last.ckpt", "run/train_log.jsonl",
                          "report.json"}) {
        const auto a = slurp(root / "a" / f), b = slurp(root / "b" / f);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        detail += fmt("%s%s %s", detail.empty() ? "" : "; ", f, same ? "identical" : "DIFFERS");
    }
    return {ok, detail};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"PSF physics", psf_physics},
        {"oracle agreement", oracle_agreement},
        {"degradation contract", degradation_contract},
        {"network suite", network_suite},
        {"training smoke", training_smoke},
        {"desk-scale quality", desk_quality},
        {"FWHM oracle and speed calculus", speed_and_fwhm},
        {"determinism", determinism},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion %s (1-%zu)\n", argv[i], criteria.size());
            return 2;
        }
        selected.push_back(n);
    }
    if (selected.empty())
        for (int n = 1; n <= static_cast<int>(criteria.size()); ++n)
            selected.push_back(n);

    int failed = 0;
    for (int n : selected) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[n - 1].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, criteria[n - 1].first,
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
