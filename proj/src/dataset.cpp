#include "pamsr/dataset.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace pamsr::dataset {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string ImageTriplet::id() const
{
    return source_id + "_r" + std::to_string(tile_row) + "_c" + std::to_string(tile_col);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed)
{
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

Image normalize(const Image& image, NormalizeMode mode, int bits)
{
    Image out = image;
    double scale = 0.0;
    if (mode == NormalizeMode::PerImageMax) {
        scale = image.max();
    } else {
        if (bits < 1 || bits > 16)
            throw std::invalid_argument("normalize: bits must lie in [1, 16]");
        scale = std::ldexp(1.0, bits) - 1.0;
    }
    if (scale <= 0.0) {
        std::fill(out.pixels().begin(), out.pixels().end(), 0.0);
        return out;
    }
    for (double& v : out.pixels())
        v = std::clamp(v / scale, 0.0, 1.0);
    return out;
}

std::vector<Tile> crop_tiles(const Image& image, const CropOptions& options, const std::string& name)
{
    const int t = options.tile;
    const int rows = image.rows() - 2 * options.border_trim;
    const int cols = image.cols() - 2 * options.border_trim;
    if (t < 1 || rows < t || cols < t)
        throw std::invalid_argument("crop_tiles: " + name + " (" + std::to_string(image.rows()) + "x" +
                                    std::to_string(image.cols()) + ") is smaller than one " + std::to_string(t) + "x" +
                                    std::to_string(t) + " tile");
    std::vector<Tile> tiles;
    for (int r0 = 0; r0 + t <= rows; r0 += t) {
        for (int c0 = 0; c0 + t <= cols; c0 += t) {
            Image tile(t, t);
            for (int r = 0; r < t; ++r)
                for (int c = 0; c < t; ++c)
                    tile(r, c) = image(options.border_trim + r0 + r, options.border_trim + c0 + c);
            if (tile.mean() < options.background_floor)
                continue;
            tiles.push_back({std::move(tile), r0, c0});
        }
    }
    return tiles;
}

std::vector<ImageTriplet> build_triplets(const std::vector<SourceTile>& tiles, const psf::PsfKernel& kernel,
                                         const degradation::DegradationConfig& config)
{
    config.validate();
    std::vector<ImageTriplet> out(tiles.size());
    std::vector<std::exception_ptr> errors(tiles.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        try {
            degradation::DegradationConfig tile_cfg = config;
            tile_cfg.rng_seed = degradation::derive_seed(config.rng_seed, i);
            const Image& full = tiles[i].tile.image;
            ImageTriplet& t = out[i];
            t.or_full = full;
            t.or_down = degradation::decimate(full, config.down_x, config.down_y);
            t.ar_input = degradation::degrade(full, kernel, tile_cfg);
            t.source_id = tiles[i].source_id;
            t.tile_row = tiles[i].tile.row;
            t.tile_col = tiles[i].tile.col;
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

const char* split_name(Split split)
{
    switch (split) {
    case Split::Train:
        return "train";
    case Split::Val:
        return "val";
    case Split::Test:
        return "test";
    }
    return "?";
}

Split parse_split(const std::string& name)
{
    if (name == "train")
        return Split::Train;
    if (name == "val")
        return Split::Val;
    if (name == "test")
        return Split::Test;
    throw std::invalid_argument("unknown split '" + name + "'");
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].split == split)
            out.push_back(i);
    return out;
}

std::vector<Split> assign_splits(const std::vector<std::string>& source_ids, std::array<double, 3> fractions,
                                 std::uint64_t seed)
{
    double total = 0.0;
    for (double f : fractions) {
        if (f < 0.0)
            throw std::invalid_argument("split: fractions must be non-negative");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");

    std::vector<std::string> unique(source_ids.begin(), source_ids.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    const long n = static_cast<long>(unique.size());
    const long n_train = std::lround(fractions[0] * n);
    const long n_val = std::lround(fractions[1] * n);
    const long n_test = n - n_train - n_val;
    if (n_train <= 0 || n_val <= 0 || n_test <= 0)
        throw std::invalid_argument("split: a split receives zero source images (" + std::to_string(n) +
                                    " sources -> " + std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                                    std::to_string(n_test) + ")");

    std::mt19937_64 rng(seed);
    std::shuffle(unique.begin(), unique.end(), rng);
    std::map<std::string, Split> by_source;
    for (long i = 0; i < n; ++i)
        by_source[unique[i]] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);

    std::vector<Split> out;
    out.reserve(source_ids.size());
    for (const auto& id : source_ids)
        out.push_back(by_source.at(id));
    return out;
}

DatasetManifest split_manifest(const std::vector<ImageTriplet>& triplets, std::array<double, 3> fractions,
                               std::uint64_t seed)
{
    std::vector<std::string> ids;
    ids.reserve(triplets.size());
    for (const auto& t : triplets)
        ids.push_back(t.source_id);
    const auto splits = assign_splits(ids, fractions, seed);

    DatasetManifest m;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const std::string stem = "tiles/" + triplets[i].id();
        m.entries.push_back({stem + "_ar.png", stem + "_down.png", stem + "_full.png", triplets[i].source_id,
                             triplets[i].tile_row, triplets[i].tile_col, splits[i]});
    }
    return m;
}

void check_no_leakage(const DatasetManifest& manifest)
{
    std::map<std::string, Split> source_split;
    std::set<std::tuple<std::string, int, int>> seen_tiles;
    for (const auto& e : manifest.entries) {
        auto [it, inserted] = source_split.emplace(e.source_id, e.split);
        if (!inserted && it->second != e.split)
            throw std::runtime_error("manifest leakage: source '" + e.source_id + "' appears in splits " +
                                     split_name(it->second) + " and " + split_name(e.split));
        if (!seen_tiles.emplace(e.source_id, e.tile_row, e.tile_col).second)
            throw std::runtime_error("manifest leakage: tile " + e.source_id + " (" + std::to_string(e.tile_row) +
                                     "," + std::to_string(e.tile_col) + ") listed twice");
    }
}

void check_files(const DatasetManifest& manifest, const fs::path& root)
{
    for (const auto& e : manifest.entries)
        for (const auto* rel : {&e.ar_path, &e.down_path, &e.full_path})
            if (!fs::is_regular_file(root / *rel))
                throw std::runtime_error("manifest references missing file " + (root / *rel).string());
}

std::string degradation_hash(const degradation::DegradationConfig& config, const psf::PsfKernel& kernel)
{
    std::ostringstream os;
    os.precision(17);
    os << config.down_x << ' ' << config.down_y << ' ' << config.noise_sigma << ' ' << config.rng_seed << ' '
       << config.offset_x << ' ' << config.offset_y << ' ' << kernel.pixel_pitch << ' ' << kernel.size;
    const std::string text = os.str();
    std::uint64_t h = fnv1a(text.data(), text.size());
    h = fnv1a(kernel.values.data(), kernel.values.size() * sizeof(double), h);
    return hex64(h);
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_manifest: cannot open " + path.string());
    json header = {{"schema", "pamsr.manifest"},
                   {"version", manifest.version},
                   {"degradation_hash", manifest.degradation_hash},
                   {"entries", manifest.entries.size()},
                   {"metadata", json::parse(manifest.metadata_json)}};
    out << header.dump() << '\n';
    for (const auto& e : manifest.entries) {
        json j = {{"ar", e.ar_path},        {"down", e.down_path},     {"full", e.full_path},
                  {"source", e.source_id}, {"tile_row", e.tile_row}, {"tile_col", e.tile_col},
                  {"split", split_name(e.split)}};
        out << j.dump() << '\n';
    }
    if (!out)
        throw std::runtime_error("write_manifest: write failed for " + path.string());
}

DatasetManifest read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_manifest: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_manifest: empty manifest " + path.string());
    DatasetManifest m;
    try {
        const json header = json::parse(line);
        if (header.at("schema") != "pamsr.manifest")
            throw std::runtime_error("not a pamsr manifest");
        m.version = header.at("version").get<int>();
        if (m.version != kManifestVersion)
            throw std::runtime_error("unsupported manifest version " + std::to_string(m.version));
        m.degradation_hash = header.at("degradation_hash").get<std::string>();
        m.metadata_json = header.value("metadata", json::object()).dump();
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            const json j = json::parse(line);
            m.entries.push_back({j.at("ar"), j.at("down"), j.at("full"), j.at("source"), j.at("tile_row"),
                                 j.at("tile_col"), parse_split(j.at("split"))});
        }
        if (m.entries.size() != header.at("entries").get<std::size_t>())
            throw std::runtime_error("entry count does not match header");
    } catch (const json::exception& e) {
        throw std::runtime_error("read_manifest: " + path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error("read_manifest: " + path.string() + ": " + e.what());
    }
    return m;
}

Image quantize16(const Image& image)
{
    Image out = image;
    for (double& v : out.pixels())
        v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
    return out;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const fs::path& path, const char* mode)
{
    File f(std::fopen(path.c_str(), mode));
    if (!f)
        throw std::runtime_error("cannot open " + path.string());
    return f;
}

Image read_png_raw(const fs::path& path, int* bits)
{
    File f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw std::runtime_error("read_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_byte> buf;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_image: corrupt or unsupported PNG " + path.string());
    }

    png_init_io(png, f.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    buf.resize(stride * h);
    rows.resize(h);
    for (int r = 0; r < h; ++r)
        rows[r] = buf.data() + static_cast<std::size_t>(r) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (channels != 1)
        throw std::runtime_error("read_image: unsupported channel layout in " + path.string());
    Image out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out(r, c) = depth == 16 ? (rows[r][2 * c] << 8 | rows[r][2 * c + 1]) : rows[r][c];
    if (bits)
        *bits = depth;
    return out;
}

Image read_pgm_raw(const fs::path& path, int* bits)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    auto token = [&] {
        std::string t;
        while (in >> t) {
            if (t[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return t;
        }
        throw std::runtime_error("read_image: truncated PGM header in " + path.string());
    };
    if (token() != "P5")
        throw std::runtime_error("read_image: only binary PGM (P5) is supported: " + path.string());
    const int w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
    in.get();
    const bool wide = maxval > 255;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * (wide ? 2 : 1));
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw std::runtime_error("read_image: truncated PGM data in " + path.string());
    Image out(h, w);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.pixels()[i] = wide ? (buf[2 * i] << 8 | buf[2 * i + 1]) : buf[i];
    if (bits)
        *bits = wide ? 16 : 8;
    return out;
}

} // namespace

void write_png16(const Image& image, const fs::path& path)
{
    File f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        throw std::runtime_error("write_png16: libpng init failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_byte> row(static_cast<std::size_t>(image.cols()) * 2);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png16: failed writing " + path.string());
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, image.cols(), image.rows(), 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < image.rows(); ++r) {
        for (int c = 0; c < image.cols(); ++c) {
            const auto q = static_cast<unsigned>(std::lround(std::clamp(image(r, c), 0.0, 1.0) * 65535.0));
            row[2 * c] = static_cast<png_byte>(q >> 8);
            row[2 * c + 1] = static_cast<png_byte>(q & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_image_raw(const fs::path& path, int* bits)
{
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png")
        return read_png_raw(path, bits);
    if (ext == ".pgm")
        return read_pgm_raw(path, bits);
    throw std::runtime_error("read_image: unsupported file type " + path.string());
}

Image read_png16(const fs::path& path)
{
    int bits = 0;
    Image raw = read_png_raw(path, &bits);
    if (bits != 16)
        throw std::runtime_error("read_png16: " + path.string() + " is not a 16-bit image");
    for (double& v : raw.pixels())
        v /= 65535.0;
    return raw;
}

void write_triplet(const ImageTriplet& triplet, const ManifestEntry& entry, const fs::path& root)
{
    fs::create_directories((root / entry.ar_path).parent_path());
    write_png16(triplet.ar_input, root / entry.ar_path);
    write_png16(triplet.or_down, root / entry.down_path);
    write_png16(triplet.or_full, root / entry.full_path);
}

ImageTriplet read_triplet(const ManifestEntry& entry, const fs::path& root)
{
    ImageTriplet t;
    t.ar_input = read_png16(root / entry.ar_path);
    t.or_down = read_png16(root / entry.down_path);
    t.or_full = read_png16(root / entry.full_path);
    t.source_id = entry.source_id;
    t.tile_row = entry.tile_row;
    t.tile_col = entry.tile_col;
    if (!t.ar_input.same_shape(t.or_down) || t.or_full.rows() != kUpscale * t.or_down.rows() ||
        t.or_full.cols() != kUpscale * t.or_down.cols())
        throw std::runtime_error("read_triplet: inconsistent shapes for " + t.id());
    return t;
}

std::vector<ImageTriplet> load_split(const DatasetManifest& manifest, const fs::path& root, Split split)
{
    const auto idx = manifest.indices(split);
    std::vector<ImageTriplet> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[i] = read_triplet(manifest.entries[idx[i]], root);
    return out;
}

DatasetManifest build_dataset(const fs::path& input_dir, const psf::PsfKernel& kernel, const BuildOptions& options,
                              const fs::path& out_dir)
{
    if (!fs::is_directory(input_dir))
        throw std::runtime_error("build_dataset: input directory " + input_dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("build_dataset: no .png/.pgm images in " + input_dir.string());

    std::vector<SourceTile> tiles;
    for (const auto& file : files) {
        int bits = 8;
        const Image raw = read_image_raw(file, &bits);
        const Image norm = normalize(raw, options.normalize, bits);
        for (auto& tile : crop_tiles(norm, options.crop, file.string()))
            tiles.push_back({file.stem().string(), std::move(tile)});
    }

    auto triplets = build_triplets(tiles, kernel, options.degradation);
    for (auto& t : triplets) {
        t.ar_input = quantize16(t.ar_input);
        t.or_down = quantize16(t.or_down);
        t.or_full = quantize16(t.or_full);
    }
    DatasetManifest manifest = split_manifest(triplets, options.fractions, options.split_seed);
    manifest.degradation_hash = degradation_hash(options.degradation, kernel);
    const auto& d = options.degradation;
    manifest.metadata_json = json{{"created_by", "pamsr build-dataset"},
                                  {"sources", files.size()},
                                  {"down_x", d.down_x},
                                  {"down_y", d.down_y},
                                  {"noise_sigma", d.noise_sigma},
                                  {"rng_seed", d.rng_seed},
                                  {"kernel_size", kernel.size},
                                  {"pixel_pitch", kernel.pixel_pitch},
                                  {"background_floor", options.crop.background_floor},
                                  {"tile", options.crop.tile},
                                  {"split_seed", options.split_seed},
                                  {"fractions", options.fractions}}
                                 .dump();
    check_no_leakage(manifest);

    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < triplets.size(); ++i)
        write_triplet(triplets[i], manifest.entries[i], out_dir);
    write_manifest(manifest, out_dir / "manifest.jsonl");
    return manifest;
}

Image synthesize_vasculature(const VesselOptions& o, std::uint64_t seed)
{
    if (o.rows < 8 || o.cols < 8 || o.roots < 1 || o.min_width <= 0.0 || o.max_width < o.min_width)
        throw std::invalid_argument("synthesize_vasculature: invalid options");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double pi = std::numbers::pi;

    Image img(o.rows, o.cols, 0.0);
    auto stamp = [&](double y, double x, double radius, double level) {
        const int r0 = std::max(0, static_cast<int>(std::floor(y - radius - 1)));
        const int r1 = std::min(o.rows - 1, static_cast<int>(std::ceil(y + radius + 1)));
        const int c0 = std::max(0, static_cast<int>(std::floor(x - radius - 1)));
        const int c1 = std::min(o.cols - 1, static_cast<int>(std::ceil(x + radius + 1)));
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                const double d = std::hypot(r - y, c - x);
                // anti-aliased disk, slightly brighter along the centre line
                const double cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
                const double shade = 0.85 + 0.15 * std::max(0.0, 1.0 - d / std::max(radius, 0.5));
                img(r, c) = std::max(img(r, c), level * cover * shade);
            }
    };

    struct Vessel {
        double y, x, heading, width, level;
        int depth;
        int steps;
    };
    std::vector<Vessel> pending;
    for (int i = 0; i < o.roots; ++i) {
        // start on a random border, pointing inwards
        const int side = static_cast<int>(unit(rng) * 4) % 4;
        const double t = unit(rng);
        Vessel v{};
        switch (side) {
        case 0: v = {0.0, t * o.cols, pi / 2, 0, 0, 0}; break;
        case 1: v = {o.rows - 1.0, t * o.cols, -pi / 2, 0, 0, 0}; break;
        case 2: v = {t * o.rows, 0.0, 0.0, 0, 0, 0}; break;
        default: v = {t * o.rows, o.cols - 1.0, pi, 0, 0, 0}; break;
        }
        v.heading += 0.6 * (unit(rng) - 0.5);
        v.width = o.max_width * (0.55 + 0.45 * unit(rng));
        v.level = 0.6 + 0.4 * unit(rng);
        v.steps = 2 * (o.rows + o.cols);
        pending.push_back(v);
    }

    std::size_t processed = 0;
    while (!pending.empty() && processed < 4000) {
        Vessel v = pending.back();
        pending.pop_back();
        ++processed;
        double turn = 0.0;
        for (int step = 0; step < v.steps; ++step) {
            stamp(v.y, v.x, 0.5 * v.width, v.level);
            turn = 0.9 * turn + 0.04 * gauss(rng);
            v.heading += turn;
            v.y += std::sin(v.heading);
            v.x += std::cos(v.heading);
            v.width = std::max(o.min_width, v.width * 0.9995);
            if (v.y < -2 || v.x < -2 || v.y > o.rows + 1 || v.x > o.cols + 1)
                break;
            if (v.depth < 5 && v.width > o.min_width * 1.2 && unit(rng) < o.branch_probability) {
                Vessel child = v;
                const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
                child.heading = v.heading + side * (0.45 + 0.8 * unit(rng));
                child.width = std::max(o.min_width, v.width * (0.45 + 0.35 * unit(rng)));
                child.level = std::clamp(v.level * (0.8 + 0.3 * unit(rng)), 0.35, 1.0);
                child.depth = v.depth + 1;
                // side branches are short and get shorter with depth
                child.steps = static_cast<int>((0.1 + 0.25 * unit(rng)) * (o.rows + o.cols) / child.depth);
                pending.push_back(child);
                v.width = std::max(o.min_width, v.width * 0.92);
            }
        }
    }
    return img;
}

} // namespace pamsr::dataset
