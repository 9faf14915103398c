#pragma once

// Shared fixtures and independently written reference computations for the
// test suites. Everything here avoids the library's own loss/gradient code
// paths on purpose: oracles recompute quantities from first principles so a
// bug in the implementation cannot hide inside its own test.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tsf/adjoint.hpp"
#include "tsf/domain.hpp"
#include "tsf/forward.hpp"

namespace tsft {

/// One self-consistent synthetic experiment.
struct Scene {
    tsf::GridSpec grid;
    tsf::CaptureConfig capture;
    tsf::SourceModel source;
    tsf::ParamMaps truth;
};

inline tsf::GridSpec make_grid(int nx, int ny, int nz, double pitch, double dt, int n_steps) {
    tsf::GridSpec g;
    g.nx = nx;
    g.ny = ny;
    g.nz = nz;
    g.dx = g.dy = g.dz = pitch;
    g.dt = dt;
    g.n_steps = n_steps;
    return g;
}

/// Oak-like slab at the acceptance scale: 64x64x24 voxels of 0.5 mm,
/// heated for t_on_s out of horizon_s, sampled every step.
inline Scene wood_scene(int nx = 64, int ny = 64, int nz = 24, double horizon_s = 40.0,
                        double t_on_s = 20.0) {
    Scene s;
    const int n_frames = int(std::llround(horizon_s / 0.25)) + 1;
    s.grid = make_grid(nx, ny, nz, 5e-4, 0.25, n_frames - 1);
    s.capture.t_on_s = t_on_s;
    s.capture.frame_dt_s = 0.25;
    s.capture.n_frames = n_frames;
    s.capture.ambient_K = 300.0;
    s.source.amplitude = 1.0;
    s.source.center_x = double(nx - 1) / 2.0;
    s.source.center_y = double(ny - 1) / 2.0;
    s.source.sigma_px = 3.0;
    s.source.t_on_s = t_on_s;
    s.truth.k = tsf::Map2D(nx, ny, 1.069e-7);
    s.truth.eps_prime = tsf::Map2D(nx, ny, 1.0);
    return s;
}

/// Small scene for gradient probing: 8x8x4 voxels, 10 steps.
inline Scene tiny_scene() {
    Scene s;
    s.grid = make_grid(8, 8, 4, 5e-4, 0.25, 10);
    s.capture.t_on_s = 1.25;
    s.capture.frame_dt_s = 0.25;
    s.capture.n_frames = 11;
    s.capture.ambient_K = 300.0;
    s.source.amplitude = 1.0;
    s.source.center_x = 3.5;
    s.source.center_y = 3.5;
    s.source.sigma_px = 1.5;
    s.source.t_on_s = 1.25;
    s.truth.k = tsf::Map2D(8, 8, 1.069e-7);
    s.truth.eps_prime = tsf::Map2D(8, 8, 1.0);
    return s;
}

/// Reference MSE computed directly from the definition (frames 1..n-1 over
/// all pixels), independent of tsf::loss_mse.
inline double oracle_mse(const tsf::TsfStack& a, const tsf::TsfStack& b, double rise_scale = 1.0) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 1; t < a.frames.size(); ++t)
        for (std::size_t i = 0; i < a.frames[t].values.size(); ++i) {
            const double r = (a.frames[t].values[i] - b.frames[t].values[i]) / rise_scale;
            acc += r * r;
            ++n;
        }
    return acc / double(n);
}

/// Central finite difference of the loss with respect to one map entry,
/// using only the public forward simulation. `use_k` selects the map.
inline double oracle_fd_grad(const Scene& s, const tsf::ParamMaps& params,
                             const tsf::TsfStack& measured, bool use_k, int x, int y,
                             double rise_scale = 1.0) {
    const double base = use_k ? params.k.at(x, y) : params.eps_prime.at(x, y);
    const double h = 1e-6 * std::max(std::abs(base), 1e-3);
    const auto eval = [&](double v) {
        tsf::ParamMaps p = params;
        (use_k ? p.k : p.eps_prime).at(x, y) = v;
        const tsf::TsfStack sim = tsf::simulate(p, s.source, s.capture, s.grid);
        return oracle_mse(sim, measured, rise_scale);
    };
    return (eval(base + h) - eval(base - h)) / (2.0 * h);
}

/// Deterministic pseudo-random doubles for fixtures (separate from the
/// library's generator so fixture data does not depend on it).
struct FixtureRng {
    std::mt19937_64 engine;
    explicit FixtureRng(std::uint64_t seed) : engine(seed) {}
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine);
    }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine);
    }
};

/// Unique-per-test scratch directory under the system temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / ("tsf_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace tsft
