#include "pamsr/psf.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace pamsr::psf {

namespace {

constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw std::invalid_argument(msg);
}

std::string describe(const TransducerSpec& s)
{
    std::ostringstream os;
    os << "aperture_radius=" << s.aperture_radius << " focal_length=" << s.focal_length
       << " sound_speed=" << s.sound_speed << " center_frequency=" << s.center_frequency
       << " fractional_bandwidth=" << s.fractional_bandwidth;
    return os.str();
}

// Band sampled for the spectral integral: center +/- twice the -6 dB half width.
struct Band {
    double f_lo;
    double f_hi;
};

Band spectral_band(const TransducerSpec& spec)
{
    const double half_width = 0.5 * spec.fractional_bandwidth * spec.center_frequency;
    return {std::max(spec.center_frequency - 2.0 * half_width, 1e-3 * spec.center_frequency),
            spec.center_frequency + 2.0 * half_width};
}

} // namespace

void TransducerSpec::validate() const
{
    require(aperture_radius > 0.0, "TransducerSpec: aperture_radius must be > 0");
    require(focal_length > aperture_radius, "TransducerSpec: focal_length must exceed aperture_radius");
    require(sound_speed > 0.0, "TransducerSpec: sound_speed must be > 0");
    require(center_frequency > 0.0, "TransducerSpec: center_frequency must be > 0");
    require(fractional_bandwidth > 0.0 && fractional_bandwidth < 2.0,
            "TransducerSpec: fractional_bandwidth must lie in (0, 2)");
}

void FieldQuery::validate() const
{
    require(axial_distance > 0.0, "FieldQuery: axial_distance must be > 0");
    require(angular_frequency > 0.0, "FieldQuery: angular_frequency must be > 0");
}

double jinc(double u)
{
    if (std::abs(u) < 1e-8)
        return 1.0 - u * u / 8.0;
    return 2.0 * std::cyl_bessel_j(1.0, std::abs(u)) / std::abs(u);
}

std::complex<double> focal_field_monochromatic(const TransducerSpec& spec, double lateral_offset, double omega)
{
    spec.validate();
    require(omega > 0.0, "focal_field_monochromatic: omega must be > 0");
    require(lateral_offset >= 0.0, "focal_field_monochromatic: lateral_offset must be >= 0");

    const double a = spec.aperture_radius;
    const double z = spec.focal_length;
    const double c = spec.sound_speed;
    const double u = omega * lateral_offset * a / (c * z);
    const double amplitude = omega * a * a / (c * z) * jinc(u);
    const double phase = omega * (z + lateral_offset * lateral_offset / (2.0 * z)) / c;
    // 1/i = -i
    return cd(0.0, -1.0) * std::polar(1.0, phase) * amplitude;
}

QuadratureResult field_numeric(const TransducerSpec& spec, const FieldQuery& query, const QuadratureOptions& options)
{
    spec.validate();
    query.validate();
    require(query.lateral_offset >= 0.0, "field_numeric: lateral_offset must be >= 0");
    require(options.initial_nodes >= 2 && options.max_levels >= 2, "field_numeric: bad refinement options");

    const double a = spec.aperture_radius;
    const double L = spec.focal_length;
    const double c = spec.sound_speed;
    const double z = query.axial_distance;
    const double x = query.lateral_offset;
    const double w = query.angular_frequency;
    const double k = w / c;
    const double wavelength = 2.0 * kPi / k;
    const cd first_scale = 1.0 / cd(0.0, wavelength);
    const double second_scale = 1.0 / (2.0 * kPi);

    // Returns (integral, integral of |integrand|) on an n_r x n_phi trapezoid grid.
    auto evaluate = [&](int n_r, int n_phi) {
        const double h_r = a / n_r;
        const double h_phi = 2.0 * kPi / n_phi;
        std::vector<double> cos_phi(n_phi);
        for (int j = 0; j < n_phi; ++j)
            cos_phi[j] = std::cos(-kPi + j * h_phi);

        std::vector<cd> row_sum(n_r + 1);
        std::vector<double> row_abs(n_r + 1);
#pragma omp parallel for schedule(static)
        for (int i = 1; i <= n_r; ++i) { // r1 = 0 contributes nothing (factor r1)
            const double r1 = i * h_r;
            const double s = std::sqrt(L * L + r1 * r1);
            cd acc = 0.0;
            double acc_abs = 0.0;
            for (int j = 0; j < n_phi; ++j) {
                const double r01_sq = z * z + r1 * r1 + x * x - 2.0 * x * r1 * cos_phi[j];
                const double r01 = std::sqrt(r01_sq);
                // exp(-i k (s - L)) exp(i k r01), with r01 - s formed without cancellation
                const double path = (r01_sq - s * s) / (r01 + s) + L;
                const cd carrier = std::polar(r1 * z / r01_sq, k * path);
                cd term = first_scale * carrier;
                if (options.include_second_term)
                    term += second_scale * carrier / r01;
                acc += term;
                acc_abs += std::abs(term);
            }
            const double edge = (i == n_r) ? 0.5 : 1.0;
            row_sum[i] = acc * edge;
            row_abs[i] = acc_abs * edge;
        }
        cd total = 0.0;
        double total_abs = 0.0;
        for (int i = 1; i <= n_r; ++i) {
            total += row_sum[i];
            total_abs += row_abs[i];
        }
        return std::pair{total * h_r * h_phi, total_abs * h_r * h_phi};
    };

    int n = options.initial_nodes;
    auto [previous, mass] = evaluate(n, n);
    double error = std::numeric_limits<double>::infinity();
    for (int level = 1; level < options.max_levels; ++level) {
        n *= 2;
        auto [current, current_mass] = evaluate(n, n);
        error = std::abs(current - previous);
        mass = current_mass;
        previous = current;
        if (error <= options.rel_tol * std::max(std::abs(current), mass))
            return {current, error, n, n};
    }
    std::ostringstream os;
    os << "field_numeric: quadrature did not converge (error estimate " << error << ", mass " << mass
       << ", nodes " << n << "x" << n << ")";
    throw QuadratureError(os.str(), error);
}

double spectrum_weight(const TransducerSpec& spec, double omega)
{
    require(omega > 0.0, "spectrum_weight: omega must be > 0");
    const double center = 2.0 * kPi * spec.center_frequency;
    const double half_width = kPi * spec.fractional_bandwidth * spec.center_frequency; // rad/s
    const double sigma = half_width / std::sqrt(2.0 * std::numbers::ln2);
    const double d = omega - center;
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

std::vector<double> broadband_profile(const TransducerSpec& spec, const std::vector<double>& radii, int n_freq)
{
    spec.validate();
    require(n_freq >= 2, "broadband_profile: n_freq must be >= 2");

    const Band band = spectral_band(spec);
    const double df = (band.f_hi - band.f_lo) / (n_freq - 1);
    std::vector<double> omega(n_freq), weight(n_freq);
    for (int k = 0; k < n_freq; ++k) {
        omega[k] = 2.0 * kPi * (band.f_lo + k * df);
        const double trap = (k == 0 || k == n_freq - 1) ? 0.5 : 1.0;
        weight[k] = trap * df * spectrum_weight(spec, omega[k]);
    }

    const double z = spec.focal_length;
    const double c = spec.sound_speed;
    std::vector<double> out(radii.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < radii.size(); ++i) {
        cd acc = 0.0;
        for (int k = 0; k < n_freq; ++k) {
            // shift to the focal arrival time t0 = z / c
            const cd aligned = focal_field_monochromatic(spec, radii[i], omega[k]) * std::polar(1.0, -omega[k] * z / c);
            acc += weight[k] * aligned;
        }
        out[i] = std::abs(acc);
    }
    return out;
}

PsfKernel synthesize_psf(const TransducerSpec& spec, const PsfOptions& options)
{
    spec.validate();
    require(options.pixel_pitch > 0.0, "synthesize_psf: pixel_pitch must be > 0");
    require(options.n_freq >= 16, "synthesize_psf: n_freq must be >= 16");
    require(options.max_size >= 1 && options.max_size % 2 == 1, "synthesize_psf: max_size must be odd and >= 1");

    const int cap_half = (options.max_size - 1) / 2;
    std::vector<double> axis_r(cap_half + 2);
    for (std::size_t k = 0; k < axis_r.size(); ++k)
        axis_r[k] = static_cast<double>(k) * options.pixel_pitch;
    const std::vector<double> axis = broadband_profile(spec, axis_r, options.n_freq);

    const double threshold = options.truncation * axis[0];
    int half = 0;
    for (int k = static_cast<int>(axis.size()) - 1; k >= 0; --k) {
        if (axis[k] >= threshold) {
            half = k;
            break;
        }
    }
    if (half > cap_half) {
        std::ostringstream os;
        os << "synthesize_psf: kernel exceeds " << options.max_size << "x" << options.max_size
           << " cap (needs at least " << 2 * half + 1 << ") for " << describe(spec)
           << " pixel_pitch=" << options.pixel_pitch;
        throw std::runtime_error(os.str());
    }

    // Values depend on di^2 + dj^2 only, which makes the kernel exactly
    // symmetric under 90 degree rotation and mirroring.
    const int max_d2 = half * half;
    std::vector<double> radial_r(max_d2 + 1);
    for (int d2 = 0; d2 <= max_d2; ++d2)
        radial_r[d2] = std::sqrt(static_cast<double>(d2)) * options.pixel_pitch;
    const std::vector<double> radial = broadband_profile(spec, radial_r, options.n_freq);

    PsfKernel kernel;
    kernel.pixel_pitch = options.pixel_pitch;
    kernel.size = 2 * half + 1;
    kernel.values.assign(static_cast<std::size_t>(kernel.size) * kernel.size, 0.0);
    for (int r = 0; r < kernel.size; ++r) {
        for (int c = 0; c < kernel.size; ++c) {
            const int di = r - half;
            const int dj = c - half;
            const int d2 = di * di + dj * dj;
            if (d2 <= max_d2)
                kernel.values[static_cast<std::size_t>(r) * kernel.size + c] = radial[d2];
        }
    }
    double sum = 0.0;
    for (double v : kernel.values)
        sum += v;
    for (double& v : kernel.values)
        v /= sum;
    return kernel;
}

PsfKernel identity_kernel(double pixel_pitch)
{
    return PsfKernel{pixel_pitch, 1, {1.0}};
}

void write_kernel(const PsfKernel& kernel, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_kernel: cannot open " + path.string());
    out << "PSF pixel_pitch=" << std::setprecision(17) << kernel.pixel_pitch << " size=" << kernel.size << '\n';
    for (int r = 0; r < kernel.size; ++r) {
        for (int c = 0; c < kernel.size; ++c)
            out << (c ? " " : "") << kernel(r, c);
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("write_kernel: write failed for " + path.string());
}

PsfKernel read_kernel(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_kernel: cannot open " + path.string());
    std::string tag, pitch_field, size_field;
    in >> tag >> pitch_field >> size_field;
    if (tag != "PSF" || pitch_field.rfind("pixel_pitch=", 0) != 0 || size_field.rfind("size=", 0) != 0)
        throw std::runtime_error("read_kernel: malformed header in " + path.string());

    PsfKernel kernel;
    kernel.pixel_pitch = std::stod(pitch_field.substr(12));
    kernel.size = std::stoi(size_field.substr(5));
    if (kernel.size < 1 || kernel.size % 2 == 0 || kernel.pixel_pitch <= 0.0)
        throw std::runtime_error("read_kernel: invalid size or pitch in " + path.string());
    kernel.values.resize(static_cast<std::size_t>(kernel.size) * kernel.size);
    for (double& v : kernel.values) {
        if (!(in >> v))
            throw std::runtime_error("read_kernel: truncated grid in " + path.string());
    }
    return kernel;
}

} // namespace pamsr::psf
