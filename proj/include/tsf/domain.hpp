#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tsf {

/// Units of the values stored in a frame stack. Processing works in kelvin;
/// "normalized" marks dimensionless stacks (rise divided by a reference).
enum class TempMode { kelvin, normalized };

const char* to_string(TempMode mode);
TempMode temp_mode_from_string(const std::string& s);

/// Voxel lattice and explicit time stepping for one simulation.
/// Layout convention everywhere: x is the fastest index, then y, then z,
/// so a flat state vector reads values[x + nx*(y + ny*z)]. z = 0 is the
/// heated/imaged surface.
struct GridSpec {
    int nx = 0, ny = 0, nz = 0;     // voxel counts, >= 1 each
    double dx = 0, dy = 0, dz = 0;  // voxel pitch [m], > 0
    double dt = 0;                  // step length [s], > 0
    int n_steps = 0;                // steps the simulation advances, >= 0

    std::size_t n_voxels() const {
        return std::size_t(nx) * std::size_t(ny) * std::size_t(nz);
    }
    std::size_t idx(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(nx) * (std::size_t(y) + std::size_t(ny) * std::size_t(z));
    }
    /// Throws std::invalid_argument if any field is out of range.
    void validate() const;
};

/// Camera-side description of a recorded (or to-be-recorded) frame stack.
struct CaptureConfig {
    double t_on_s = 0;      // heating duration from t = 0 [s]
    double frame_dt_s = 0;  // frame spacing [s]
    int n_frames = 0;       // frames including the pre-heating frame 0
    double ambient_K = 0;   // uniform initial temperature [K]

    void validate() const;
};

/// Whole simulation steps per recorded frame. Throws std::invalid_argument
/// when frame_dt_s is not an integer multiple of grid.dt.
int steps_per_frame(const GridSpec& grid, const CaptureConfig& cap);

/// Dense 2D map, row-major with x fastest: values[y*nx + x].
struct Map2D {
    int nx = 0, ny = 0;
    std::vector<double> values;

    Map2D() = default;
    Map2D(int nx_, int ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), values(std::size_t(nx_) * std::size_t(ny_), fill) {}

    double& at(int x, int y) { return values[std::size_t(y) * nx + x]; }
    double at(int x, int y) const { return values[std::size_t(y) * nx + x]; }
    std::size_t size() const { return values.size(); }
    bool same_shape(const Map2D& o) const { return nx == o.nx && ny == o.ny; }
};

/// 3D temperature state in kelvin, layout per GridSpec.
struct TemperatureField {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> values;

    TemperatureField() = default;
    TemperatureField(int nx_, int ny_, int nz_, double fill = 0.0)
        : nx(nx_), ny(ny_), nz(nz_),
          values(std::size_t(nx_) * std::size_t(ny_) * std::size_t(nz_), fill) {}

    double& at(int x, int y, int z) {
        return values[std::size_t(x) + std::size_t(nx) * (std::size_t(y) + std::size_t(ny) * std::size_t(z))];
    }
    double at(int x, int y, int z) const {
        return values[std::size_t(x) + std::size_t(nx) * (std::size_t(y) + std::size_t(ny) * std::size_t(z))];
    }
    /// Finite everywhere and strictly positive (kelvin scale). Throws.
    void validate() const;
};

/// Per-pixel material maps over the surface: thermal diffusivity k [m^2/s]
/// and the absorption factor eps_prime (normalized source units). Both are
/// 2D over (x, y) and broadcast along z by the solver; solvers require all
/// values non-negative and finite.
struct ParamMaps {
    Map2D k;
    Map2D eps_prime;

    void validate() const;
};

/// Gaussian heating beam applied on the z = 0 voxel layer while t <= t_on_s.
/// The spatial profile is evaluated at integer pixel coordinates:
///   f(x, y) = amplitude * exp(-((x-cx)^2 + (y-cy)^2) / (2 sigma_px^2)).
struct SourceModel {
    double amplitude = 1.0;  // peak deposition rate, normalized units
    double center_x = 0.0;   // beam center [px], fractional allowed
    double center_y = 0.0;
    double sigma_px = 1.0;   // beam width [px], > 0
    double t_on_s = 0.0;     // heating duration [s], >= 0

    void validate() const;
    Map2D spatial_profile(int nx, int ny) const;

    /// Step s (state at time s*dt) receives the source iff s*dt <= t_on_s.
    /// The cutoff index is computed once as floor(t_on_s/dt + 1e-9) so that
    /// exact multiples land on the inclusive side regardless of rounding.
    int last_on_step(double dt) const;
    bool on_at_step(int step, double dt) const { return step <= last_on_step(dt); }
};

/// Recorded (or simulated) surface frame stack. frames[0] is the pre-heating
/// state; frame i samples the z = 0 slice at time i * capture.frame_dt_s.
struct TsfStack {
    std::vector<Map2D> frames;
    CaptureConfig capture;
    GridSpec grid;
    TempMode temp_mode = TempMode::kelvin;

    void validate() const;
};

/// Bulk and radiometric constants for one material sample.
/// beta = 1/(c*rho) couples deposited power to temperature rate; the
/// absorption factor combines it with the heat-source coupling eps_hs and
/// the blackbody emissivity eps as beta * eps_hs * eps^(1/4).
struct EmissivityComponents {
    double beta = 0;     // [K m^3 / J]
    double eps_hs = 0;   // heat-source coupling, in [0, 1]
    double eps = 0;      // emissivity, in (0, 1]
    double c = 0;        // specific heat [J/(kg K)]
    double rho = 0;      // density [kg/m^3]
    double sigma0 = 0;   // bulk thermal conductivity [W/(m K)]

    static EmissivityComponents from_bulk(double sigma0, double c, double rho,
                                          double eps_hs, double eps);
    double diffusivity() const { return sigma0 / (c * rho); }
    void validate() const;
};

/// k = sigma0 / (c * rho). All inputs must be finite and > 0.
double diffusivity_from_bulk(double sigma0, double c, double rho);

/// eps_prime = beta * eps_hs * eps^(1/4).
double eps_prime_from_components(const EmissivityComponents& comp);

/// A camera calibrated for emissivity 1 reads u_C = eps^(1/4) * u for a gray
/// body of emissivity eps; this inverts that reading. u_c > 0, eps in (0, 1].
double true_temp_from_camera(double u_c, double eps);

}  // namespace tsf
