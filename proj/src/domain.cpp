#include "tsf/domain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsf {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

const char* to_string(TempMode mode) {
    return mode == TempMode::kelvin ? "kelvin" : "normalized";
}

TempMode temp_mode_from_string(const std::string& s) {
    if (s == "kelvin") return TempMode::kelvin;
    if (s == "normalized") return TempMode::normalized;
    throw std::invalid_argument("temp_mode must be 'kelvin' or 'normalized', got '" + s + "'");
}

void GridSpec::validate() const {
    require(nx >= 1 && ny >= 1 && nz >= 1,
            "grid voxel counts must be >= 1 (nx=" + std::to_string(nx) +
            " ny=" + std::to_string(ny) + " nz=" + std::to_string(nz) + ")");
    require(finite(dx) && dx > 0 && finite(dy) && dy > 0 && finite(dz) && dz > 0,
            "grid pitches dx/dy/dz must be finite and > 0");
    require(finite(dt) && dt > 0, "grid dt must be finite and > 0");
    require(n_steps >= 0, "grid n_steps must be >= 0");
}

void CaptureConfig::validate() const {
    require(finite(t_on_s) && t_on_s >= 0, "capture t_on_s must be finite and >= 0");
    require(finite(frame_dt_s) && frame_dt_s > 0, "capture frame_dt_s must be finite and > 0");
    require(n_frames >= 1, "capture n_frames must be >= 1");
    require(finite(ambient_K) && ambient_K > 0, "capture ambient_K must be finite and > 0");
    require(t_on_s <= double(n_frames) * frame_dt_s + 1e-9 * frame_dt_s,
            "capture t_on_s exceeds the recorded span n_frames * frame_dt_s");
}

int steps_per_frame(const GridSpec& grid, const CaptureConfig& cap) {
    grid.validate();
    cap.validate();
    const double ratio = cap.frame_dt_s / grid.dt;
    const long long r = std::llround(ratio);
    require(r >= 1 && std::abs(cap.frame_dt_s - double(r) * grid.dt) <= 1e-9 * cap.frame_dt_s,
            "frame_dt_s must be a positive integer multiple of grid.dt");
    return int(r);
}

void TemperatureField::validate() const {
    require(nx >= 1 && ny >= 1 && nz >= 1, "temperature field dims must be >= 1");
    require(values.size() == std::size_t(nx) * std::size_t(ny) * std::size_t(nz),
            "temperature field value count does not match its dims");
    for (double v : values) {
        require(finite(v), "temperature field contains a non-finite value");
        require(v > 0, "temperature field contains a non-positive value (kelvin scale)");
    }
}

void ParamMaps::validate() const {
    require(k.nx >= 1 && k.ny >= 1, "param maps must be non-empty");
    require(k.same_shape(eps_prime), "k and eps_prime maps must have equal shape");
    require(k.values.size() == std::size_t(k.nx) * std::size_t(k.ny) &&
            eps_prime.values.size() == k.values.size(),
            "param map value counts do not match their dims");
    for (double v : k.values)
        require(finite(v) && v >= 0, "k map must be finite and non-negative");
    for (double v : eps_prime.values)
        require(finite(v) && v >= 0, "eps_prime map must be finite and non-negative");
}

void SourceModel::validate() const {
    require(finite(amplitude) && amplitude >= 0, "source amplitude must be finite and >= 0");
    require(finite(sigma_px) && sigma_px > 0, "source sigma_px must be finite and > 0");
    require(finite(t_on_s) && t_on_s >= 0, "source t_on_s must be finite and >= 0");
    require(finite(center_x) && finite(center_y), "source center must be finite");
}

Map2D SourceModel::spatial_profile(int nx, int ny) const {
    validate();
    Map2D f(nx, ny);
    const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
    for (int y = 0; y < ny; ++y) {
        const double ddy = double(y) - center_y;
        for (int x = 0; x < nx; ++x) {
            const double ddx = double(x) - center_x;
            f.at(x, y) = amplitude * std::exp(-(ddx * ddx + ddy * ddy) * inv2s2);
        }
    }
    return f;
}

int SourceModel::last_on_step(double dt) const {
    require(finite(dt) && dt > 0, "dt must be finite and > 0");
    return int(std::floor(t_on_s / dt + 1e-9));
}

void TsfStack::validate() const {
    capture.validate();
    grid.validate();
    require(int(frames.size()) == capture.n_frames,
            "stack holds " + std::to_string(frames.size()) + " frames but capture declares " +
            std::to_string(capture.n_frames));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Map2D& fr = frames[i];
        require(fr.nx == grid.nx && fr.ny == grid.ny,
                "frame " + std::to_string(i) + " dims do not match the grid");
        require(fr.values.size() == std::size_t(fr.nx) * std::size_t(fr.ny),
                "frame " + std::to_string(i) + " value count does not match its dims");
        for (double v : fr.values) {
            require(finite(v), "frame " + std::to_string(i) + " contains a non-finite value");
            if (temp_mode == TempMode::kelvin)
                require(v > 0, "frame " + std::to_string(i) + " contains a non-positive kelvin value");
        }
    }
}

EmissivityComponents EmissivityComponents::from_bulk(double sigma0, double c, double rho,
                                                     double eps_hs, double eps) {
    EmissivityComponents comp;
    comp.sigma0 = sigma0;
    comp.c = c;
    comp.rho = rho;
    comp.eps_hs = eps_hs;
    comp.eps = eps;
    require(finite(c) && c > 0 && finite(rho) && rho > 0, "c and rho must be finite and > 0");
    comp.beta = 1.0 / (c * rho);
    comp.validate();
    return comp;
}

void EmissivityComponents::validate() const {
    require(finite(c) && c > 0, "c must be finite and > 0");
    require(finite(rho) && rho > 0, "rho must be finite and > 0");
    require(finite(sigma0) && sigma0 > 0, "sigma0 must be finite and > 0");
    require(finite(eps_hs) && eps_hs >= 0 && eps_hs <= 1, "eps_hs must lie in [0, 1]");
    require(finite(eps) && eps > 0 && eps <= 1, "eps must lie in (0, 1]");
    require(finite(beta) && std::abs(beta * c * rho - 1.0) <= 1e-9,
            "beta must equal 1/(c*rho)");
}

double diffusivity_from_bulk(double sigma0, double c, double rho) {
    require(finite(sigma0) && sigma0 > 0, "sigma0 must be finite and > 0");
    require(finite(c) && c > 0, "c must be finite and > 0");
    require(finite(rho) && rho > 0, "rho must be finite and > 0");
    return sigma0 / (c * rho);
}

double eps_prime_from_components(const EmissivityComponents& comp) {
    comp.validate();
    return comp.beta * comp.eps_hs * std::pow(comp.eps, 0.25);
}

double true_temp_from_camera(double u_c, double eps) {
    require(finite(u_c) && u_c > 0, "camera temperature must be finite and > 0");
    require(finite(eps) && eps > 0 && eps <= 1, "eps must lie in (0, 1]");
    return std::pow(eps, -0.25) * u_c;
}

}  // namespace tsf
