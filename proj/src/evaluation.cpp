#include "pamsr/evaluation.hpp"
#include "pamsr/checkpoint.hpp"
#include "pamsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pamsr::evaluation {

using nlohmann::json;

SpeedBlock speed_block(const SpeedInputs& in)
{
    SpeedBlock s;
    s.inputs = in;
    s.scan_rate = metrics::scan_rate(in.pulse_rate_hz, in.nx, in.ny);
    s.scan_rate_sparse = metrics::scan_rate(in.pulse_rate_hz, in.nx / in.down_x, in.ny / in.down_y);
    s.critical_prr = metrics::critical_prr(in.sound_speed, in.depth);
    s.speedup = metrics::speedup_factor(in.down_x, in.down_y);
    return s;
}

namespace {

json mean_sd_json(const metrics::MeanSd& m) { return json{{"mean", m.mean}, {"sd", m.sd}, {"count", m.count}}; }

metrics::MeanSd mean_sd_from(const json& j)
{
    return {j.at("mean").get<double>(), j.at("sd").get<double>(), j.at("count").get<std::size_t>()};
}

ImageRecord score(const std::string& id, const std::string& method, const Image& ref, const Image& out)
{
    ImageRecord r;
    r.id = id;
    r.method = method;
    try {
        if (!ref.same_shape(out))
            throw std::invalid_argument("output " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()) +
                                        " does not match reference");
        for (double v : out.pixels())
            if (!std::isfinite(v))
                throw std::domain_error("non-finite output");
        r.psnr = metrics::psnr(ref, out);
        r.ssim = metrics::ssim(ref, out);
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

} // namespace

json MetricsReport::to_json() const
{
    json recs = json::array();
    for (const auto& r : records) {
        json j{{"id", r.id}, {"method", r.method}, {"ok", r.ok}};
        if (r.ok) {
            j["psnr"] = r.psnr;
            j["ssim"] = r.ssim;
        } else {
            j["error"] = r.error;
        }
        if (r.fwhm_um)
            j["fwhm_um"] = *r.fwhm_um;
        if (r.cnr)
            j["cnr"] = *r.cnr;
        recs.push_back(std::move(j));
    }
    json sum = json::array();
    for (const auto& s : summary)
        sum.push_back({{"method", s.method},
                       {"psnr", mean_sd_json(s.psnr)},
                       {"ssim", mean_sd_json(s.ssim)},
                       {"failures", s.failures}});
    const auto& in = speed.inputs;
    return json{{"schema", "pamsr.report"},
                {"version", 1},
                {"split", split},
                {"methods", methods},
                {"records", recs},
                {"summary", sum},
                {"speed",
                 {{"pulse_rate_hz", in.pulse_rate_hz},
                  {"nx", in.nx},
                  {"ny", in.ny},
                  {"sound_speed", in.sound_speed},
                  {"depth", in.depth},
                  {"down_x", in.down_x},
                  {"down_y", in.down_y},
                  {"scan_rate", speed.scan_rate},
                  {"scan_rate_sparse", speed.scan_rate_sparse},
                  {"critical_prr", speed.critical_prr},
                  {"speedup", speed.speedup}}}};
}

MetricsReport MetricsReport::from_json(const json& j)
{
    MetricsReport r;
    r.split = j.value("split", std::string());
    r.methods = j.at("methods").get<std::vector<std::string>>();
    for (const auto& x : j.at("records")) {
        ImageRecord rec;
        rec.id = x.at("id").get<std::string>();
        rec.method = x.at("method").get<std::string>();
        rec.ok = x.at("ok").get<bool>();
        if (rec.ok) {
            rec.psnr = x.at("psnr").get<double>();
            rec.ssim = x.at("ssim").get<double>();
        } else {
            rec.error = x.value("error", std::string());
        }
        if (x.contains("fwhm_um"))
            rec.fwhm_um = x["fwhm_um"].get<double>();
        if (x.contains("cnr"))
            rec.cnr = x["cnr"].get<double>();
        r.records.push_back(std::move(rec));
    }
    for (const auto& x : j.at("summary"))
        r.summary.push_back({x.at("method").get<std::string>(), mean_sd_from(x.at("psnr")),
                             mean_sd_from(x.at("ssim")), x.at("failures").get<std::size_t>()});
    const auto& s = j.at("speed");
    SpeedInputs in;
    in.pulse_rate_hz = s.at("pulse_rate_hz").get<double>();
    in.nx = s.at("nx").get<long>();
    in.ny = s.at("ny").get<long>();
    in.sound_speed = s.at("sound_speed").get<double>();
    in.depth = s.at("depth").get<double>();
    in.down_x = s.at("down_x").get<int>();
    in.down_y = s.at("down_y").get<int>();
    r.speed = speed_block(in);
    return r;
}

std::vector<MethodSummary> summarize(const std::vector<std::string>& methods, const std::vector<ImageRecord>& records)
{
    std::vector<MethodSummary> out;
    for (const auto& m : methods) {
        std::vector<double> p, s;
        std::size_t failures = 0;
        for (const auto& r : records) {
            if (r.method != m)
                continue;
            if (!r.ok) {
                ++failures;
                continue;
            }
            p.push_back(r.psnr);
            s.push_back(r.ssim);
        }
        out.push_back({m, metrics::mean_sd(p), metrics::mean_sd(s), failures});
    }
    return out;
}

MetricsReport evaluate(const std::vector<dataset::ImageTriplet>& set, nn::DualBranchNet<float>* model,
                       const EvalOptions& options, const std::string& split)
{
    if (set.empty())
        throw std::invalid_argument("evaluate: empty split");
    MetricsReport report;
    report.split = split;
    if (options.identity)
        report.methods.push_back("reference");
    if (options.bicubic)
        report.methods.push_back("bicubic");
    if (model)
        report.methods.push_back("model");

    for (const auto& t : set) {
        const std::string id = t.id();
        if (options.identity)
            report.records.push_back(score(id, "reference", t.or_full, t.or_full));
        if (options.bicubic) {
            const int f = t.or_full.rows() / std::max(1, t.ar_input.rows());
            report.records.push_back(score(id, "bicubic", t.or_full, metrics::bicubic_upscale(t.ar_input, f)));
        }
        if (model) {
            ImageRecord r;
            try {
                auto [hr, re] = model->infer(training::stack({&t}, training::kArInput));
                r = score(id, "model", t.or_full, training::to_image(re, 0));
            } catch (const std::exception& e) {
                r = ImageRecord{};
                r.id = id;
                r.method = "model";
                r.ok = false;
                r.error = e.what();
            }
            report.records.push_back(std::move(r));
        }
    }
    report.summary = summarize(report.methods, report.records);
    report.speed = speed_block(options.speed);
    return report;
}

MetricsReport evaluate(const std::filesystem::path& manifest_path, dataset::Split split,
                       const std::optional<std::filesystem::path>& checkpoint, const EvalOptions& options)
{
    const auto manifest = dataset::read_manifest(manifest_path);
    const auto set = dataset::load_split(manifest, manifest_path.parent_path(), split);
    std::optional<nn::DualBranchNet<float>> model;
    if (checkpoint) {
        const auto ck = nn::read_checkpoint(*checkpoint);
        model.emplace(ck.config);
        nn::load_weights(*model, ck);
    }
    return evaluate(set, model ? &*model : nullptr, options, dataset::split_name(split));
}

void write_report(const MetricsReport& report, const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw std::runtime_error("cannot write report: " + path.string());
    os << report.to_json().dump(2) << '\n';
    if (!os)
        throw std::runtime_error("write failed: " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open report: " + path.string());
    return MetricsReport::from_json(json::parse(is));
}

std::string render_table(const MetricsReport& report)
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-18s %-18s %8s %8s\n", "Method", "PSNR dB (mean+-sd)",
                  "SSIM (mean+-sd)", "images", "failed");
    os << "split: " << report.split << "\n" << line;
    for (const auto& s : report.summary) {
        char p[32], q[32];
        std::snprintf(p, sizeof p, "%.2f +- %.2f", s.psnr.mean, s.psnr.sd);
        std::snprintf(q, sizeof q, "%.3f +- %.3f", s.ssim.mean, s.ssim.sd);
        std::snprintf(line, sizeof line, "%-12s %-18s %-18s %8zu %8zu\n", s.method.c_str(), p, q, s.psnr.count,
                      s.failures);
        os << line;
    }
    const auto& sp = report.speed;
    std::snprintf(line, sizeof line,
                  "\nscan rate %.4g frames/s (%ldx%ld at %.0f Hz), sparse %.4g frames/s, speed-up x%.0f\n",
                  sp.scan_rate, sp.inputs.nx, sp.inputs.ny, sp.inputs.pulse_rate_hz, sp.scan_rate_sparse, sp.speedup);
    os << line;
    std::snprintf(line, sizeof line, "critical PRR %.4g Hz at depth %.3g m\n", sp.critical_prr, sp.inputs.depth);
    os << line;
    return os.str();
}

std::vector<std::filesystem::path> write_profiles(const std::vector<dataset::ImageTriplet>& set,
                                                  nn::DualBranchNet<float>* model, double pitch_um,
                                                  const std::filesystem::path& dir)
{
    constexpr int kHalf = 24;
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& t : set) {
        const Image& gt = t.or_full;
        const auto px = gt.pixels();
        const auto peak = static_cast<int>(std::max_element(px.begin(), px.end()) - px.begin());
        const int row = peak / gt.cols();
        const int col = peak % gt.cols();
        const int c0 = std::max(0, col - kHalf);
        const int c1 = std::min(gt.cols() - 1, col + kHalf);

        std::vector<std::string> names{"ground_truth", "bicubic"};
        std::vector<Image> images{gt, metrics::bicubic_upscale(t.ar_input, gt.rows() / t.ar_input.rows())};
        if (model) {
            auto [hr, re] = model->infer(training::stack({&t}, training::kArInput));
            names.push_back("model");
            images.push_back(training::to_image(re, 0));
        }

        const auto path = dir / ("profile_" + t.id() + ".dat");
        std::ofstream os(path, std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot write " + path.string());
        os << "# row " << row << ", columns " << c0 << ".." << c1 << "\n# fwhm_um";
        for (std::size_t m = 0; m < images.size(); ++m) {
            std::vector<double> prof;
            for (int c = c0; c <= c1; ++c)
                prof.push_back(images[m](row, c));
            os << ' ' << names[m] << '=';
            try {
                os << metrics::fwhm(prof, pitch_um);
            } catch (const std::exception&) {
                os << "unresolved";
            }
        }
        os << "\nx_um";
        for (const auto& n : names)
            os << ' ' << n;
        os << '\n';
        for (int c = c0; c <= c1; ++c) {
            os << (c - col) * pitch_um;
            for (const auto& im : images)
                os << ' ' << im(row, c);
            os << '\n';
        }
        written.push_back(path);
    }
    return written;
}

} // namespace pamsr::evaluation
