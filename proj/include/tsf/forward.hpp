#pragma once

#include <span>

#include "tsf/domain.hpp"
#include "tsf/errors.hpp"

namespace tsf {

/// Explicit-step stability summary.
/// cfl_factor = max(k) * dt * (2/dx^2 + 2/dy^2 + 2/dz^2); stable iff <= 1.
struct StabilityReport {
    double cfl_factor = 0.0;
    bool stable = false;
    double k_max = 0.0;
    double dt = 0.0;
};

class StabilityError : public Error {
public:
    StabilityError(const std::string& msg, StabilityReport report)
        : Error(msg), report_(report) {}
    const StabilityReport& report() const { return report_; }

private:
    StabilityReport report_;
};

StabilityReport stability_check(const ParamMaps& params, const GridSpec& grid);
StabilityReport stability_check(double k_max, const GridSpec& grid);

/// Central-difference Laplacian with replicate ghost cells: the out-of-domain
/// neighbor takes the boundary value, so boundary faces carry zero flux.
/// Output units: K/m^2.
TemperatureField laplacian3d(const TemperatureField& u, const GridSpec& grid);

/// One explicit update u_next = u + dt * (k .* lap(u) + eps_prime .* f),
/// with the source f deposited only in the z = 0 layer and only while the
/// state time t satisfies t <= src.t_on_s. Throws StabilityError when the
/// configuration fails stability_check.
TemperatureField step(const TemperatureField& u, const ParamMaps& params,
                      const SourceModel& src, double t, const GridSpec& grid);

/// Full forward run from a uniform ambient start. Records the z = 0 slice at
/// every frame timestamp; frames[0] is the initial surface. Requires
/// grid.n_steps == steps_per_frame * (n_frames - 1); anything else is a
/// frame/step mismatch (std::invalid_argument).
TsfStack simulate(const ParamMaps& params, const SourceModel& src,
                  const CaptureConfig& cap, const GridSpec& grid);

/// Variant with k constant within each z layer (k_layer has grid.nz entries)
/// and a per-pixel surface eps_prime map. Used by layered-material fits.
TsfStack simulate_layered(std::span<const double> k_layer, const Map2D& eps_prime,
                          const SourceModel& src, const CaptureConfig& cap,
                          const GridSpec& grid);

namespace kernels {

/// out = laplacian(u), replicate ghosts, units K/m^2. No aliasing allowed.
void laplacian_into(const double* u, const GridSpec& grid, double* out);

/// Fused forward update with a 2D k map broadcast along z. fs == nullptr
/// means the source is off this step. No aliasing between u and out.
void heat_step_mapk(const double* u, const GridSpec& grid, const double* k2d,
                    const double* eps2d, const double* fs, double* out);

/// Same update with per-layer scalar k (k_layer[grid.nz] entries).
void heat_step_layerk(const double* u, const GridSpec& grid, const double* k_layer,
                      const double* eps2d, const double* fs, double* out);

}  // namespace kernels

}  // namespace tsf
