#include "pamsr/checkpoint.hpp"
#include "pamsr/metrics.hpp"
#include "pamsr/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

using namespace pamsr;
using namespace pamsr::training;
namespace fs = std::filesystem;

namespace {

Image random_image(int rows, int cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Image im(rows, cols);
    for (double& v : im.pixels())
        v = d(rng);
    return im;
}

nn::ModelConfig tiny_model()
{
    nn::ModelConfig m;
    m.base_channels = 16;
    m.init_seed = 5;
    return m;
}

// 64x64 ground truth -> 16x16 inputs; blur-free so the tests stay fast
std::vector<dataset::ImageTriplet> tiny_triplets(int count, std::uint64_t seed, int sources = 0)
{
    dataset::VesselOptions vo;
    vo.rows = vo.cols = 64;
    vo.roots = 2;
    vo.max_width = 4.0;
    std::vector<dataset::SourceTile> tiles;
    for (int i = 0; i < count; ++i) {
        const std::string src = "s" + std::to_string(sources > 0 ? i % sources : i);
        tiles.push_back({src, dataset::Tile{dataset::synthesize_vasculature(vo, seed + i), 0, (i / std::max(1, sources)) * 64}});
    }
    degradation::DegradationConfig dc;
    dc.noise_sigma = 0.01;
    dc.rng_seed = seed;
    auto out = dataset::build_triplets(tiles, psf::identity_kernel(), dc);
    for (auto& t : out) {
        t.ar_input = dataset::quantize16(t.ar_input);
        t.or_down = dataset::quantize16(t.or_down);
        t.or_full = dataset::quantize16(t.or_full);
    }
    return out;
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("pamsr_train_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_dataset(const std::vector<dataset::ImageTriplet>& trip, const fs::path& dir)
{
    auto m = dataset::split_manifest(trip, {0.6, 0.2, 0.2}, 1);
    m.degradation_hash = "test";
    for (std::size_t i = 0; i < trip.size(); ++i)
        dataset::write_triplet(trip[i], m.entries[i], dir);
    dataset::write_manifest(m, dir / "manifest.jsonl");
    return dir / "manifest.jsonl";
}

std::vector<std::vector<float>> weights(const nn::DualBranchNet<float>& m)
{
    std::vector<std::vector<float>> w;
    for (const auto& p : m.parameters())
        w.push_back(p.value.data);
    return w;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

} // namespace

TEST_CASE("composite and total loss")
{
    const Image a = random_image(32, 32, 1);
    CHECK(composite_loss(a, a, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(composite_loss(Image(16, 16, 0.0), Image(16, 16, 0.5), 0.0) == 0.25);

    Image noisy = a;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 1e-3);
    for (double& v : noisy.pixels())
        v += nd(rng);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        mse += std::pow(a.pixels()[i] - noisy.pixels()[i], 2);
    mse /= a.size();
    CHECK(std::abs(composite_loss(a, noisy, 1.0) - (mse + 1.0 - metrics::ssim(a, noisy))) < 1e-8);
    CHECK_THROWS(composite_loss(a, Image(32, 31), 1.0));

    const Image hr = random_image(16, 16, 3), dgt = random_image(16, 16, 4);
    const Image re = random_image(64, 64, 5), gt = random_image(64, 64, 6);
    CHECK(total_loss(hr, hr, re, re, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(total_loss(hr, dgt, re, gt, 0.7, 0.0) == composite_loss(hr, dgt, 0.7));
    const double sum = composite_loss(hr, dgt, 0.7) + 0.3 * composite_loss(re, gt, 0.7);
    CHECK(std::abs(total_loss(hr, dgt, re, gt, 0.7, 0.3) - sum) < 1e-10);
    CHECK(total_loss(hr, dgt, re, gt, 1.0, 1.0) >= 0.0);

    SUBCASE("graph loss equals the image loss")
    {
        auto to_tensor = [](const Image& im) {
            nn::Tensor<double> t(1, 1, im.rows(), im.cols());
            std::copy(im.pixels().begin(), im.pixels().end(), t.data.begin());
            return t;
        };
        nn::Graph<double> g(false);
        auto node = total_loss_node<double>(g, g.input(to_tensor(hr)), to_tensor(dgt), g.input(to_tensor(re)),
                                            to_tensor(gt), 0.7, 0.3);
        CHECK(std::abs(node->value.data[0] - sum) < 1e-10);
    }
}

TEST_CASE("learning-rate schedule")
{
    TrainConfig c;
    CHECK(lr_schedule(1, c) == 1e-4);
    CHECK(lr_schedule(25, c) == 1e-4);
    CHECK(lr_schedule(26, c) == 1e-5);
    CHECK(lr_schedule(50, c) == 1e-5);
    c.epochs = 10;
    CHECK(lr_schedule(5, c) == 1e-4);
    CHECK(lr_schedule(6, c) == 1e-5);
    c.epochs = 7;
    CHECK(lr_schedule(4, c) == 1e-4);
    CHECK(lr_schedule(5, c) == 1e-5);
    CHECK_THROWS(lr_schedule(0, c));
    CHECK_THROWS(lr_schedule(8, c));
}

TEST_CASE("train config")
{
    TrainConfig c;
    c.lr_phase1 = 0.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.batch_size = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.lambda = -1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.epochs = 7;
    c.tau = 0.5;
    c.stage = Stage::Finetune;
    const auto back = train_config_from_json(train_config_to_json(c));
    CHECK(back.epochs == 7);
    CHECK(back.tau == 0.5);
    CHECK(back.stage == Stage::Finetune);
    CHECK_THROWS(train_config_from_json(nlohmann::json{{"stage", "warmup"}}));
}

TEST_CASE("adam matches a hand computation")
{
    std::vector<nn::Parameter<float>> params(1);
    params[0].value = nn::Tensor<float>(1, 1, 1, 2, 1.0f);
    params[0].grad = nn::Tensor<float>(1, 1, 1, 2);
    TrainConfig cfg;
    Adam opt(params, cfg);

    double w = 1.0, m = 0.0, v = 0.0;
    const double grads[] = {0.5, -0.25, 2.0};
    for (int t = 1; t <= 3; ++t) {
        const double g = grads[t - 1];
        params[0].grad.data = {static_cast<float>(g), 0.0f};
        opt.step(0.1);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(params[0].value.data[0] == doctest::Approx(w).epsilon(1e-6));
        CHECK(params[0].value.data[1] == 1.0f);
    }
    CHECK(opt.steps() == 3);
    // the first step moves by lr regardless of the gradient scale
    CHECK(std::abs(1.0 - 0.1 - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))) < 1e-8);
}

TEST_CASE("batches and steps")
{
    nn::DualBranchNet<float> model(tiny_model());
    TrainConfig cfg;
    cfg.epochs = 1;
    const auto set = tiny_triplets(101, 100);
    const std::vector<dataset::ImageTriplet> hundred(set.begin(), set.begin() + 100);
    const auto r = train(model, hundred, {}, cfg);
    CHECK(r.total_steps == 25);
    CHECK(r.history.at(0).steps == 25);
    CHECK(r.history.at(0).lr == 1e-4);
    CHECK(std::isfinite(r.history.at(0).train_loss));

    nn::DualBranchNet<float> other(tiny_model());
    const std::vector<dataset::ImageTriplet> odd(set.begin(), set.begin() + 9);
    CHECK(train(other, odd, {}, cfg).total_steps == 3); // last partial batch included
}

TEST_CASE("training is deterministic")
{
    const auto set = tiny_triplets(10, 200);
    const std::vector<dataset::ImageTriplet> tr(set.begin(), set.begin() + 7), va(set.begin() + 7, set.end());
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.shuffle_seed = 4;
    nn::DualBranchNet<float> a(tiny_model()), b(tiny_model());
    const auto ra = train(a, tr, va, cfg);
    const auto rb = train(b, tr, va, cfg);
    CHECK(weights(a) == weights(b));
    REQUIRE(ra.history.size() == 2);
    for (int e = 0; e < 2; ++e) {
        CHECK(ra.history[e].train_loss == rb.history[e].train_loss);
        CHECK(std::abs(ra.history[e].val_ssim - rb.history[e].val_ssim) < 1e-6);
    }
    CHECK(ra.best_epoch == rb.best_epoch);
}

TEST_CASE("non-finite loss aborts naming the batch")
{
    auto set = tiny_triplets(6, 300);
    set[4].ar_input(3, 3) = std::numeric_limits<double>::quiet_NaN();
    nn::DualBranchNet<float> model(tiny_model());
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    try {
        train(model, set, {}, cfg);
        FAIL("expected abort");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(set[4].id()) != std::string::npos);
    }
    CHECK_THROWS_AS(train(model, {}, {}, cfg), std::invalid_argument);
}

TEST_CASE("reconstruction loss gradient path is exactly lambda-scaled")
{
    const auto set = tiny_triplets(2, 400);
    std::vector<const dataset::ImageTriplet*> batch{&set[0], &set[1]};
    const auto x = stack(batch, kArInput), dgt = stack(batch, kOrDown), gt = stack(batch, kOrFull);
    CHECK(x.n == 2);
    CHECK(gt.h == 64);

    nn::DualBranchNet<float> model(tiny_model());
    auto grads = [&](int mode) {
        model.zero_grad();
        nn::Graph<float> g;
        auto o = model.forward_full(g, g.input(x));
        if (mode == 0)
            g.backward(total_loss_node<float>(g, o.i_hr, dgt, o.i_re, gt, 1.0, 0.0));
        else
            g.backward(g.composite_loss(o.i_hr, dgt, 1.0));
        std::vector<std::vector<float>> out;
        for (const auto& p : model.parameters())
            out.push_back(p.grad.data);
        return out;
    };
    const auto with_zero_lambda = grads(0);
    const auto loss1_only = grads(1);
    CHECK(with_zero_lambda == loss1_only);
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        const auto& name = model.parameters()[i].name;
        if (name.rfind("re.", 0) == 0 || name.rfind("fu.", 0) == 0 || name.rfind("ex.", 0) == 0)
            for (float v : with_zero_lambda[i])
                REQUIRE(v == 0.0f);
    }
}

TEST_CASE("checkpoint round trip")
{
    const auto dir = scratch("ckpt");
    nn::DualBranchNet<float> model(tiny_model());
    const nlohmann::json meta{{"note", "x"}, {"epoch", 3}};
    nn::save_checkpoint(dir / "a.ckpt", model, meta);
    nn::save_checkpoint(dir / "b.ckpt", model, meta);
    CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
    CHECK(nn::file_hash(dir / "a.ckpt") == nn::file_hash(dir / "b.ckpt"));
    CHECK(nn::file_hash(dir / "a.ckpt").size() == 16);

    const auto ck = nn::read_checkpoint(dir / "a.ckpt");
    CHECK(ck.config == tiny_model());
    CHECK(ck.meta["note"] == "x");
    auto cfg2 = tiny_model();
    cfg2.init_seed = 99;
    nn::DualBranchNet<float> other(cfg2);
    CHECK(weights(other) != weights(model));
    CHECK_THROWS(nn::load_weights(other, ck)); // config differs in the seed
    nn::DualBranchNet<float> same(tiny_model());
    for (auto& p : same.parameters())
        p.value.fill(0.f);
    nn::load_weights(same, ck);
    CHECK(weights(same) == weights(model));

    auto bad = ck;
    bad.tensors[0].second.data.pop_back();
    CHECK_THROWS(nn::load_weights(same, bad));

    {
        std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
    }
    CHECK_THROWS(nn::read_checkpoint(dir / "junk.ckpt"));
    CHECK_THROWS(nn::read_checkpoint(dir / "missing.ckpt"));

    auto c = tiny_model();
    c.leaky_slope = 0.2;
    CHECK(nn::config_from_json(nn::config_to_json(c)) == c);
    fs::remove_all(dir);
}

TEST_CASE("train and fine-tune through a manifest")
{
    const auto data = scratch("ft_data"), pre = scratch("ft_pre");
    const auto manifest = write_dataset(tiny_triplets(20, 500), data);

    TrainConfig cfg;
    cfg.epochs = 1;
    nn::DualBranchNet<float> model(tiny_model());
    const auto r = train(manifest, model, cfg, pre);
    CHECK(r.history.size() == 1);
    CHECK(fs::exists(pre / "best.ckpt"));
    CHECK(fs::exists(pre / "last.ckpt"));
    {
        std::ifstream log(pre / "train_log.jsonl");
        std::string line;
        REQUIRE(std::getline(log, line));
        const auto j = nlohmann::json::parse(line);
        for (const char* k : {"epoch", "lr", "train_loss", "val_loss", "val_psnr", "val_ssim"})
            CHECK(j.contains(k));
    }
    const auto src = pre / "last.ckpt";
    const auto pre_ck = nn::read_checkpoint(src);

    SUBCASE("zero epochs leaves the weights untouched")
    {
        const auto out = scratch("ft_zero");
        TrainConfig z = cfg;
        z.epochs = 0;
        fine_tune(src, manifest, z, out);
        const auto ck = nn::read_checkpoint(out / "last.ckpt");
        REQUIRE(ck.tensors.size() == pre_ck.tensors.size());
        for (std::size_t i = 0; i < ck.tensors.size(); ++i)
            CHECK(ck.tensors[i].second.data == pre_ck.tensors[i].second.data);
        CHECK(ck.meta["provenance"]["pretrain_checkpoint_hash"] == nn::file_hash(src));
        CHECK(ck.meta["stage"] == "finetune");
        fs::remove_all(out);
    }
    SUBCASE("config mismatch fails before any update")
    {
        const auto out = fs::temp_directory_path() / "pamsr_train_ft_bad";
        fs::remove_all(out);
        auto wrong = tiny_model();
        wrong.base_channels = 32;
        CHECK_THROWS_AS(fine_tune(src, manifest, cfg, out, &wrong), std::invalid_argument);
        CHECK(!fs::exists(out));
        auto right = tiny_model();
        const auto outr = scratch("ft_ok");
        TrainConfig z = cfg;
        z.epochs = 0;
        CHECK_NOTHROW(fine_tune(src, manifest, z, outr, &right));
        fs::remove_all(outr);
    }
    SUBCASE("fine-tuning on the pretraining set is stable")
    {
        const auto out = scratch("ft_stable");
        nn::DualBranchNet<float> before(pre_ck.config);
        nn::load_weights(before, pre_ck);
        const auto m = dataset::read_manifest(manifest);
        const auto val = dataset::load_split(m, data, dataset::Split::Val);
        TrainConfig ft = cfg;
        ft.epochs = 5;
        ft.lr_phase1 = ft.lr_phase2 = 1e-5;
        const double ssim0 = validate(before, val, ft).ssim;
        const auto res = fine_tune(src, manifest, ft, out);
        REQUIRE(res.history.size() == 5);
        CHECK(res.history.back().val_ssim >= ssim0 - 0.02);
        const auto ck = nn::read_checkpoint(out / "best.ckpt");
        CHECK(ck.meta["provenance"]["pretrain_checkpoint_hash"] == nn::file_hash(src));
        fs::remove_all(out);
    }
    CHECK_THROWS(fine_tune(pre / "missing.ckpt", manifest, cfg, pre / "x"));
    fs::remove_all(data);
    fs::remove_all(pre);
}
