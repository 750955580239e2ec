#pragma once

#include <complex>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pamsr::psf {

/// Focused single-element transducer. Defaults describe the 50 MHz,
/// 3 mm aperture radius, 10 mm focal length probe in water.
struct TransducerSpec {
    double aperture_radius = 3e-3;     // m
    double focal_length = 10e-3;       // m, evaluation plane z = focal_length
    double sound_speed = 1500.0;       // m/s
    double center_frequency = 50e6;    // Hz
    double fractional_bandwidth = 0.7; // -6 dB full width / center

    void validate() const;
};

struct FieldQuery {
    double lateral_offset = 0.0;    // m
    double axial_distance = 0.0;    // m
    double angular_frequency = 0.0; // rad/s

    void validate() const;
};

/// 2-D blur kernel, odd square, row-major, unit sum.
struct PsfKernel {
    double pixel_pitch = 0.0;
    int size = 0;
    std::vector<double> values;

    double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * size + c]; }
    int radius() const { return size / 2; }
};

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double error_estimate)
        : std::runtime_error(what), error_estimate_(error_estimate)
    {
    }
    double error_estimate() const { return error_estimate_; }

private:
    double error_estimate_;
};

/// 2J1(u)/u with the removable singularity at u = 0.
double jinc(double u);

/// Closed-form focal-plane field (z = focal_length):
/// (w a^2 / (i c z)) exp(i w (z + x^2/2z)/c) 2J1(u)/u, u = w x a/(c z).
std::complex<double> focal_field_monochromatic(const TransducerSpec& spec, double lateral_offset, double omega);

struct QuadratureOptions {
    double rel_tol = 1e-4;
    bool include_second_term = false;
    int initial_nodes = 16;
    int max_levels = 10;
};

struct QuadratureResult {
    std::complex<double> value;
    double error_estimate = 0.0;
    int radial_nodes = 0;
    int angular_nodes = 0;
};

/// Direct 2-D quadrature of the Rayleigh-Sommerfeld superposition over the
/// aperture with the spherical phase weighting. Throws QuadratureError when
/// the refinement does not reach rel_tol.
QuadratureResult field_numeric(const TransducerSpec& spec, const FieldQuery& query,
                               const QuadratureOptions& options = {});

/// Gaussian amplitude spectrum, peak 1 at 2*pi*center_frequency, 0.5 at
/// the -6 dB band edges.
double spectrum_weight(const TransducerSpec& spec, double omega);

struct PsfOptions {
    double pixel_pitch = 4e-6;
    int n_freq = 64;
    int max_size = 257;
    double truncation = 1e-3;
};

/// Broadband amplitude |sum_w T(w) E(r, w)| at each radius, evaluated at the
/// focal arrival time. Not normalized.
std::vector<double> broadband_profile(const TransducerSpec& spec, const std::vector<double>& radii, int n_freq);

PsfKernel synthesize_psf(const TransducerSpec& spec, const PsfOptions& options = {});

/// Identity (1x1) kernel, useful for degenerate degradation.
PsfKernel identity_kernel(double pixel_pitch = 4e-6);

void write_kernel(const PsfKernel& kernel, const std::filesystem::path& path);
PsfKernel read_kernel(const std::filesystem::path& path);

} // namespace pamsr::psf
