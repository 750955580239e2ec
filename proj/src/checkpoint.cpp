#include "pamsr/checkpoint.hpp"
#include "pamsr/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace pamsr::nn {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'A', 'M', 'S', 'R', 'C', 'K', 'P'};

template <class V>
void put(std::ostream& os, V v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V get(std::istream& is, const std::filesystem::path& path)
{
    V v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("truncated checkpoint: " + path.string());
    return v;
}

} // namespace

json config_to_json(const ModelConfig& c)
{
    return json{{"base_channels", c.base_channels},
                {"kernel_size", c.kernel_size},
                {"leaky_slope", c.leaky_slope},
                {"upscale_stages", c.upscale_stages},
                {"hr_local_resblocks", c.hr_local_resblocks},
                {"hr_subresblocks", c.hr_subresblocks},
                {"ex_resblocks", c.ex_resblocks},
                {"recon_resblocks", c.recon_resblocks},
                {"init_seed", c.init_seed}};
}

ModelConfig config_from_json(const json& j)
{
    ModelConfig c;
    c.base_channels = j.value("base_channels", c.base_channels);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.upscale_stages = j.value("upscale_stages", c.upscale_stages);
    c.hr_local_resblocks = j.value("hr_local_resblocks", c.hr_local_resblocks);
    c.hr_subresblocks = j.value("hr_subresblocks", c.hr_subresblocks);
    c.ex_resblocks = j.value("ex_resblocks", c.ex_resblocks);
    c.recon_resblocks = j.value("recon_resblocks", c.recon_resblocks);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.validate();
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const DualBranchNet<float>& model, const json& meta)
{
    json index = json::array();
    std::uint64_t offset = 0;
    for (const auto& p : model.parameters()) {
        const auto& v = p.value;
        index.push_back({{"name", p.name}, {"shape", {v.n, v.c, v.h, v.w}}, {"offset", offset}});
        offset += v.size();
    }
    const json header{{"format", "pamsr.checkpoint"},
                      {"version", kCheckpointVersion},
                      {"config", config_to_json(model.config())},
                      {"meta", meta},
                      {"tensors", index},
                      {"total_floats", offset}};
    const std::string text = header.dump();

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw std::runtime_error("cannot write checkpoint: " + tmp.string());
        os.write(kMagic, sizeof kMagic);
        put<std::uint32_t>(os, kCheckpointVersion);
        put<std::uint64_t>(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& p : model.parameters())
            os.write(reinterpret_cast<const char*>(p.value.ptr()),
                     static_cast<std::streamsize>(p.value.size() * sizeof(float)));
        if (!os)
            throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    const auto version = get<std::uint32_t>(is, path);
    if (version != static_cast<std::uint32_t>(kCheckpointVersion))
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
    const auto len = get<std::uint64_t>(is, path);
    std::string text(len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(len)))
        throw std::runtime_error("truncated checkpoint header: " + path.string());
    const json header = json::parse(text);

    Checkpoint ck;
    ck.config = config_from_json(header.at("config"));
    ck.meta = header.value("meta", json::object());
    for (const auto& t : header.at("tensors")) {
        const auto shape = t.at("shape").get<std::vector<int>>();
        if (shape.size() != 4)
            throw std::runtime_error("bad tensor shape in " + path.string());
        Tensor<float> v(shape[0], shape[1], shape[2], shape[3]);
        if (!is.read(reinterpret_cast<char*>(v.ptr()), static_cast<std::streamsize>(v.size() * sizeof(float))))
            throw std::runtime_error("truncated checkpoint payload: " + path.string());
        ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(v));
    }
    return ck;
}

void load_weights(DualBranchNet<float>& model, const Checkpoint& ck)
{
    if (!(ck.config == model.config()))
        throw std::invalid_argument("checkpoint config " + config_to_json(ck.config).dump() +
                                    " does not match model config " + config_to_json(model.config()).dump());
    auto& params = model.parameters();
    if (params.size() != ck.tensors.size())
        throw std::invalid_argument("checkpoint holds " + std::to_string(ck.tensors.size()) + " tensors, model has " +
                                    std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, value] = ck.tensors[i];
        if (name != params[i].name || !value.same_shape(params[i].value) || value.size() != params[i].value.size())
            throw std::invalid_argument("checkpoint tensor " + name + value.shape_string() + " does not match " +
                                        params[i].name + params[i].value.shape_string());
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i].value = ck.tensors[i].second;
}

std::string file_hash(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return dataset::hex64(dataset::fnv1a(bytes.data(), bytes.size()));
}

} // namespace pamsr::nn
