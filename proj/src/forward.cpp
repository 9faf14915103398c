#include "tsf/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tsf {

namespace kernels {

void laplacian_into(const double* u, const GridSpec& g, double* out) {
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const double ax = 1.0 / (g.dx * g.dx);
    const double ay = 1.0 / (g.dy * g.dy);
    const double az = 1.0 / (g.dz * g.dz);
    const std::size_t sy = std::size_t(nx);
    const std::size_t sz = sy * std::size_t(ny);
    for (int z = 0; z < nz; ++z) {
        const std::size_t zo = sz * std::size_t(z);
        const std::size_t zmo = (z > 0) ? zo - sz : zo;
        const std::size_t zpo = (z + 1 < nz) ? zo + sz : zo;
        for (int y = 0; y < ny; ++y) {
            const std::size_t ro = zo + sy * std::size_t(y);
            const double* uc = u + ro;
            const double* uym = u + ((y > 0) ? ro - sy : ro);
            const double* uyp = u + ((y + 1 < ny) ? ro + sy : ro);
            const double* uzm = u + zmo + sy * std::size_t(y);
            const double* uzp = u + zpo + sy * std::size_t(y);
            double* o = out + ro;
            for (int x = 0; x < nx; ++x) {
                const int xm = (x > 0) ? x - 1 : x;
                const int xp = (x + 1 < nx) ? x + 1 : x;
                const double c = uc[x];
                o[x] = ax * (uc[xm] - 2.0 * c + uc[xp])
                     + ay * (uym[x] - 2.0 * c + uyp[x])
                     + az * (uzm[x] - 2.0 * c + uzp[x]);
            }
        }
    }
}

// The two step kernels share their shape: one sweep computing
//   out = u + dt * k * lap(u)
// with the dt folded into the per-axis coefficients, then the surface
// deposit out(z=0) += dt * eps' * f when the source is on.

void heat_step_mapk(const double* u, const GridSpec& g, const double* k2d,
                    const double* eps2d, const double* fs, double* out) {
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const double ax = g.dt / (g.dx * g.dx);
    const double ay = g.dt / (g.dy * g.dy);
    const double az = g.dt / (g.dz * g.dz);
    const std::size_t sy = std::size_t(nx);
    const std::size_t sz = sy * std::size_t(ny);
    for (int z = 0; z < nz; ++z) {
        const std::size_t zo = sz * std::size_t(z);
        const std::size_t zmo = (z > 0) ? zo - sz : zo;
        const std::size_t zpo = (z + 1 < nz) ? zo + sz : zo;
        for (int y = 0; y < ny; ++y) {
            const std::size_t ro = zo + sy * std::size_t(y);
            const double* uc = u + ro;
            const double* uym = u + ((y > 0) ? ro - sy : ro);
            const double* uyp = u + ((y + 1 < ny) ? ro + sy : ro);
            const double* uzm = u + zmo + sy * std::size_t(y);
            const double* uzp = u + zpo + sy * std::size_t(y);
            const double* kr = k2d + sy * std::size_t(y);
            double* o = out + ro;
            for (int x = 0; x < nx; ++x) {
                const int xm = (x > 0) ? x - 1 : x;
                const int xp = (x + 1 < nx) ? x + 1 : x;
                const double c = uc[x];
                const double lap = ax * (uc[xm] - 2.0 * c + uc[xp])
                                 + ay * (uym[x] - 2.0 * c + uyp[x])
                                 + az * (uzm[x] - 2.0 * c + uzp[x]);
                o[x] = c + kr[x] * lap;
            }
        }
    }
    if (fs) {
        for (std::size_t i = 0; i < sz; ++i) out[i] += g.dt * eps2d[i] * fs[i];
    }
}

void heat_step_layerk(const double* u, const GridSpec& g, const double* k_layer,
                      const double* eps2d, const double* fs, double* out) {
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const double ax = g.dt / (g.dx * g.dx);
    const double ay = g.dt / (g.dy * g.dy);
    const double az = g.dt / (g.dz * g.dz);
    const std::size_t sy = std::size_t(nx);
    const std::size_t sz = sy * std::size_t(ny);
    for (int z = 0; z < nz; ++z) {
        const double kz = k_layer[z];
        const std::size_t zo = sz * std::size_t(z);
        const std::size_t zmo = (z > 0) ? zo - sz : zo;
        const std::size_t zpo = (z + 1 < nz) ? zo + sz : zo;
        for (int y = 0; y < ny; ++y) {
            const std::size_t ro = zo + sy * std::size_t(y);
            const double* uc = u + ro;
            const double* uym = u + ((y > 0) ? ro - sy : ro);
            const double* uyp = u + ((y + 1 < ny) ? ro + sy : ro);
            const double* uzm = u + zmo + sy * std::size_t(y);
            const double* uzp = u + zpo + sy * std::size_t(y);
            double* o = out + ro;
            for (int x = 0; x < nx; ++x) {
                const int xm = (x > 0) ? x - 1 : x;
                const int xp = (x + 1 < nx) ? x + 1 : x;
                const double c = uc[x];
                const double lap = ax * (uc[xm] - 2.0 * c + uc[xp])
                                 + ay * (uym[x] - 2.0 * c + uyp[x])
                                 + az * (uzm[x] - 2.0 * c + uzp[x]);
                o[x] = c + kz * lap;
            }
        }
    }
    if (fs) {
        for (std::size_t i = 0; i < sz; ++i) out[i] += g.dt * eps2d[i] * fs[i];
    }
}

}  // namespace kernels

namespace {

StabilityReport make_report(double k_max, const GridSpec& g) {
    StabilityReport rep;
    rep.k_max = k_max;
    rep.dt = g.dt;
    rep.cfl_factor = k_max * g.dt *
                     (2.0 / (g.dx * g.dx) + 2.0 / (g.dy * g.dy) + 2.0 / (g.dz * g.dz));
    rep.stable = rep.cfl_factor <= 1.0;
    return rep;
}

void throw_unstable(const StabilityReport& rep) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "unstable explicit step: cfl_factor=%.6g > 1 (k_max=%.6g m^2/s, dt=%.6g s)",
                  rep.cfl_factor, rep.k_max, rep.dt);
    throw StabilityError(buf, rep);
}

Map2D surface_slice(const std::vector<double>& u, int nx, int ny) {
    Map2D m(nx, ny);
    std::copy(u.begin(), u.begin() + std::size_t(nx) * std::size_t(ny), m.values.begin());
    return m;
}

// Checks shared by both simulate variants; returns steps per frame.
int prep_simulation(const SourceModel& src, const CaptureConfig& cap,
                    const GridSpec& grid, double k_max) {
    grid.validate();
    cap.validate();
    src.validate();
    if (std::abs(cap.t_on_s - src.t_on_s) > 1e-9 * std::max(1.0, cap.t_on_s))
        throw std::invalid_argument("capture t_on_s and source t_on_s disagree");
    const int m = steps_per_frame(grid, cap);
    const long long need = static_cast<long long>(m) * (cap.n_frames - 1);
    if (grid.n_steps != need)
        throw std::invalid_argument(
            "frame/step mismatch: grid.n_steps=" + std::to_string(grid.n_steps) +
            " but the frame schedule needs " + std::to_string(need));
    const StabilityReport rep = make_report(k_max, grid);
    if (!rep.stable) throw_unstable(rep);
    return m;
}

}  // namespace

StabilityReport stability_check(const ParamMaps& params, const GridSpec& grid) {
    grid.validate();
    params.validate();
    const double k_max = *std::max_element(params.k.values.begin(), params.k.values.end());
    return make_report(k_max, grid);
}

StabilityReport stability_check(double k_max, const GridSpec& grid) {
    grid.validate();
    if (!(std::isfinite(k_max) && k_max >= 0))
        throw std::invalid_argument("k_max must be finite and >= 0");
    return make_report(k_max, grid);
}

TemperatureField laplacian3d(const TemperatureField& u, const GridSpec& grid) {
    grid.validate();
    if (u.nx != grid.nx || u.ny != grid.ny || u.nz != grid.nz)
        throw std::invalid_argument("field dims do not match the grid");
    if (u.values.size() != grid.n_voxels())
        throw std::invalid_argument("field value count does not match the grid");
    TemperatureField out(u.nx, u.ny, u.nz);
    kernels::laplacian_into(u.values.data(), grid, out.values.data());
    return out;
}

TemperatureField step(const TemperatureField& u, const ParamMaps& params,
                      const SourceModel& src, double t, const GridSpec& grid) {
    grid.validate();
    params.validate();
    src.validate();
    if (u.nx != grid.nx || u.ny != grid.ny || u.nz != grid.nz)
        throw std::invalid_argument("field dims do not match the grid");
    if (params.k.nx != grid.nx || params.k.ny != grid.ny)
        throw std::invalid_argument("param map dims do not match the grid");
    if (!(std::isfinite(t) && t >= 0))
        throw std::invalid_argument("state time t must be finite and >= 0");
    const StabilityReport rep = stability_check(params, grid);
    if (!rep.stable) throw_unstable(rep);

    TemperatureField out(u.nx, u.ny, u.nz);
    const bool on = t <= src.t_on_s + 1e-9 * grid.dt;
    Map2D fs;
    if (on) fs = src.spatial_profile(grid.nx, grid.ny);
    kernels::heat_step_mapk(u.values.data(), grid, params.k.values.data(),
                            params.eps_prime.values.data(),
                            on ? fs.values.data() : nullptr, out.values.data());
    return out;
}

TsfStack simulate(const ParamMaps& params, const SourceModel& src,
                  const CaptureConfig& cap, const GridSpec& grid) {
    params.validate();
    if (params.k.nx != grid.nx || params.k.ny != grid.ny)
        throw std::invalid_argument("param map dims do not match the grid");
    const double k_max = *std::max_element(params.k.values.begin(), params.k.values.end());
    const int m = prep_simulation(src, cap, grid, k_max);

    const Map2D fs = src.spatial_profile(grid.nx, grid.ny);
    const int last_on = src.last_on_step(grid.dt);

    std::vector<double> u(grid.n_voxels(), cap.ambient_K);
    std::vector<double> unew(grid.n_voxels());

    TsfStack out;
    out.grid = grid;
    out.capture = cap;
    out.frames.reserve(cap.n_frames);
    out.frames.push_back(surface_slice(u, grid.nx, grid.ny));
    for (int s = 0; s < grid.n_steps; ++s) {
        const double* f = (s <= last_on) ? fs.values.data() : nullptr;
        kernels::heat_step_mapk(u.data(), grid, params.k.values.data(),
                                params.eps_prime.values.data(), f, unew.data());
        u.swap(unew);
        if ((s + 1) % m == 0) out.frames.push_back(surface_slice(u, grid.nx, grid.ny));
    }
    return out;
}

TsfStack simulate_layered(std::span<const double> k_layer, const Map2D& eps_prime,
                          const SourceModel& src, const CaptureConfig& cap,
                          const GridSpec& grid) {
    if (int(k_layer.size()) != grid.nz)
        throw std::invalid_argument("k_layer must provide one value per z layer");
    for (double k : k_layer)
        if (!(std::isfinite(k) && k >= 0))
            throw std::invalid_argument("k_layer values must be finite and non-negative");
    if (eps_prime.nx != grid.nx || eps_prime.ny != grid.ny)
        throw std::invalid_argument("eps_prime map dims do not match the grid");
    for (double v : eps_prime.values)
        if (!(std::isfinite(v) && v >= 0))
            throw std::invalid_argument("eps_prime map must be finite and non-negative");
    const double k_max = *std::max_element(k_layer.begin(), k_layer.end());
    const int m = prep_simulation(src, cap, grid, k_max);

    const Map2D fs = src.spatial_profile(grid.nx, grid.ny);
    const int last_on = src.last_on_step(grid.dt);

    std::vector<double> u(grid.n_voxels(), cap.ambient_K);
    std::vector<double> unew(grid.n_voxels());

    TsfStack out;
    out.grid = grid;
    out.capture = cap;
    out.frames.reserve(cap.n_frames);
    out.frames.push_back(surface_slice(u, grid.nx, grid.ny));
    for (int s = 0; s < grid.n_steps; ++s) {
        const double* f = (s <= last_on) ? fs.values.data() : nullptr;
        kernels::heat_step_layerk(u.data(), grid, k_layer.data(), eps_prime.values.data(),
                                  f, unew.data());
        u.swap(unew);
        if ((s + 1) % m == 0) out.frames.push_back(surface_slice(u, grid.nx, grid.ny));
    }
    return out;
}

}  // namespace tsf
