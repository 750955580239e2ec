#pragma once

#include "pamsr/degradation.hpp"
#include "pamsr/image.hpp"
#include "pamsr/psf.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pamsr::dataset {

inline constexpr int kTileSize = 256;
inline constexpr int kUpscale = 4;
inline constexpr int kManifestVersion = 1;

struct ImageTriplet {
    Image ar_input; // 64x64: blurred, decimated, noisy
    Image or_down;  // 64x64: decimate(or_full, 4, 4)
    Image or_full;  // 256x256 ground truth
    std::string source_id;
    int tile_row = 0;
    int tile_col = 0;

    std::string id() const;
};

struct Tile {
    Image image;
    int row = 0;
    int col = 0;
};

enum class NormalizeMode { PerImageMax, BitDepth };

/// Per-image mode divides by the maximum (all-zero stays zero); bit-depth
/// mode divides by 2^bits - 1.
Image normalize(const Image& image, NormalizeMode mode, int bits = 8);

struct CropOptions {
    int tile = kTileSize;
    double background_floor = 0.02;
    int border_trim = 0;
};

/// Non-overlapping tiles in raster order; remainder discarded; tiles whose
/// mean is below the floor are dropped. `name` is used in error messages.
std::vector<Tile> crop_tiles(const Image& image, const CropOptions& options = {}, const std::string& name = "image");

struct SourceTile {
    std::string source_id;
    Tile tile;
};

/// Tile i gets degradation seed derive_seed(config.rng_seed, i).
std::vector<ImageTriplet> build_triplets(const std::vector<SourceTile>& tiles, const psf::PsfKernel& kernel,
                                         const degradation::DegradationConfig& config);

enum class Split { Train, Val, Test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
    std::string ar_path; // relative to the manifest directory
    std::string down_path;
    std::string full_path;
    std::string source_id;
    int tile_row = 0;
    int tile_col = 0;
    Split split = Split::Train;
};

struct DatasetManifest {
    int version = kManifestVersion;
    std::string degradation_hash;
    std::string metadata_json = "{}"; // creation metadata, deterministic content only
    std::vector<ManifestEntry> entries;

    std::vector<std::size_t> indices(Split split) const;
};

/// Deterministic split grouped by source id. Source ids are sorted, shuffled
/// with the seed, then cut by round(f * n) for train and val; test takes the
/// rest. Throws if any split receives zero sources.
std::vector<Split> assign_splits(const std::vector<std::string>& source_ids, std::array<double, 3> fractions,
                                 std::uint64_t seed);

/// Splits triplets and names their files as tiles/<id>_{ar,down,full}.png.
DatasetManifest split_manifest(const std::vector<ImageTriplet>& triplets, std::array<double, 3> fractions,
                               std::uint64_t seed);

/// Throws if a source id or a tile appears in more than one split.
void check_no_leakage(const DatasetManifest& manifest);

/// Throws naming the first referenced file that does not exist under root.
void check_files(const DatasetManifest& manifest, const std::filesystem::path& root);

std::string degradation_hash(const degradation::DegradationConfig& config, const psf::PsfKernel& kernel);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// 16-bit quantization used for storage: round(v * 65535) / 65535.
Image quantize16(const Image& image);

void write_png16(const Image& image, const std::filesystem::path& path);
/// Reads 8/16-bit grayscale PNG or binary PGM. Returns raw integer levels
/// as doubles; `bits` receives the sample depth.
Image read_image_raw(const std::filesystem::path& path, int* bits = nullptr);
/// Reads a stored triplet grid (16-bit PNG) into [0, 1].
Image read_png16(const std::filesystem::path& path);

void write_triplet(const ImageTriplet& triplet, const ManifestEntry& entry, const std::filesystem::path& root);
ImageTriplet read_triplet(const ManifestEntry& entry, const std::filesystem::path& root);
std::vector<ImageTriplet> load_split(const DatasetManifest& manifest, const std::filesystem::path& root, Split split);

struct BuildOptions {
    degradation::DegradationConfig degradation;
    CropOptions crop;
    NormalizeMode normalize = NormalizeMode::BitDepth;
    std::array<double, 3> fractions{0.9, 0.05, 0.05};
    std::uint64_t split_seed = 0;
};

/// Full build-dataset pipeline: read every image in input_dir (sorted by
/// file name), tile, degrade, store 16-bit grids and manifest.jsonl under
/// out_dir. Returns the manifest.
DatasetManifest build_dataset(const std::filesystem::path& input_dir, const psf::PsfKernel& kernel,
                              const BuildOptions& options, const std::filesystem::path& out_dir);

struct VesselOptions {
    int rows = 512;
    int cols = 512;
    int roots = 5;
    double min_width = 1.5;  // px
    double max_width = 12.0; // px
    double branch_probability = 0.012;
};

/// Procedural vascular tree resembling an OR-PAM maximum-amplitude
/// projection: bright tubular branches on a dark background, values in [0, 1].
Image synthesize_vasculature(const VesselOptions& options, std::uint64_t seed);

/// 64-bit FNV-1a; used for content hashes in manifests and checkpoints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

} // namespace pamsr::dataset
