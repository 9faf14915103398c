#include "tsf/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tsf/rng.hpp"

namespace tsf {

const char* to_string(LossMode mode) {
    return mode == LossMode::kelvin ? "kelvin" : "normalized";
}

namespace {

// Largest rise above ambient across frames 1..n-1; the normalized-mode
// divisor. Floored away from zero so flat stacks stay well defined.
double derive_rise_scale(const TsfStack& measured) {
    double rise = 0.0;
    for (std::size_t i = 1; i < measured.frames.size(); ++i)
        for (double v : measured.frames[i].values)
            rise = std::max(rise, v - measured.capture.ambient_K);
    return std::max(rise, 1e-6);
}

double resolve_rise_scale(const TsfStack& measured, LossMode mode, double requested) {
    if (mode == LossMode::kelvin) return 1.0;
    return requested > 0 ? requested : derive_rise_scale(measured);
}

void check_surface_compat(const CaptureConfig& cap, int nx, int ny, const TsfStack& measured) {
    measured.validate();
    if (measured.grid.nx != nx || measured.grid.ny != ny)
        throw std::invalid_argument("measured stack raster does not match the solver grid");
    const CaptureConfig& mc = measured.capture;
    if (mc.n_frames != cap.n_frames)
        throw std::invalid_argument("frame counts disagree: " + std::to_string(cap.n_frames) +
                                    " vs measured " + std::to_string(mc.n_frames));
    auto close = [](double a, double b) {
        return std::abs(a - b) <= 1e-9 * std::max({std::abs(a), std::abs(b), 1.0});
    };
    if (!close(mc.frame_dt_s, cap.frame_dt_s))
        throw std::invalid_argument("frame_dt_s disagrees with the measured stack");
    if (!close(mc.t_on_s, cap.t_on_s))
        throw std::invalid_argument("t_on_s disagrees with the measured stack");
    if (!close(mc.ambient_K, cap.ambient_K))
        throw std::invalid_argument("ambient_K disagrees with the measured stack");
}

// Backward sweep, 2D k map broadcast along z. Reads lam (= lambda^{s+1}) and
// u_prev (= u^s), writes lam_next = lam + dt*lap(k .* lam) and accumulates
//   dk2d   += sum_z dt * lam * lap(u_prev)      (dt folded into the coefficients)
//   deps2d += dt * lam(z=0) * fs                (only when fs != nullptr)
void adjoint_sweep_mapk(const double* lam, const double* u_prev, const GridSpec& g,
                        const double* k2d, const double* fs,
                        double* lam_next, double* dk2d, double* deps2d) {
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
            const std::size_t rym = (y > 0) ? ro - sy : ro;
            const std::size_t ryp = (y + 1 < ny) ? ro + sy : ro;
            const double* lc = lam + ro;
            const double* lym = lam + rym;
            const double* lyp = lam + ryp;
            const double* lzm = lam + zmo + sy * std::size_t(y);
            const double* lzp = lam + zpo + sy * std::size_t(y);
            const double* uc = u_prev + ro;
            const double* uym = u_prev + rym;
            const double* uyp = u_prev + ryp;
            const double* uzm = u_prev + zmo + sy * std::size_t(y);
            const double* uzp = u_prev + zpo + sy * std::size_t(y);
            const double* kr = k2d + sy * std::size_t(y);
            const double* krm = k2d + sy * std::size_t((y > 0) ? y - 1 : y);
            const double* krp = k2d + sy * std::size_t((y + 1 < ny) ? y + 1 : y);
            double* ln = lam_next + ro;
            double* dkr = dk2d + sy * std::size_t(y);
            for (int x = 0; x < nx; ++x) {
                const int xm = (x > 0) ? x - 1 : x;
                const int xp = (x + 1 < nx) ? x + 1 : x;
                const double l = lc[x];
                const double c = uc[x];
                const double lap_u = ax * (uc[xm] - 2.0 * c + uc[xp])
                                   + ay * (uym[x] - 2.0 * c + uyp[x])
                                   + az * (uzm[x] - 2.0 * c + uzp[x]);
                dkr[x] += l * lap_u;
                const double p = kr[x] * l;
                const double pxm = kr[xm] * lc[xm];
                const double pxp = kr[xp] * lc[xp];
                const double pym = krm[x] * lym[x];
                const double pyp = krp[x] * lyp[x];
                const double pzm = kr[x] * lzm[x];
                const double pzp = kr[x] * lzp[x];
                ln[x] = l + ax * (pxm - 2.0 * p + pxp)
                          + ay * (pym - 2.0 * p + pyp)
                          + az * (pzm - 2.0 * p + pzp);
            }
        }
    }
    if (fs) {
        for (std::size_t i = 0; i < sz; ++i) deps2d[i] += g.dt * lam[i] * fs[i];
    }
}

// Same sweep with per-layer scalar k; slab sensitivities accumulate per layer.
void adjoint_sweep_layerk(const double* lam, const double* u_prev, const GridSpec& g,
                          const double* k_layer, const double* fs,
                          double* lam_next, double* dk_layer, double* deps2d) {
    const int nx = g.nx, ny = g.ny, nz = g.nz;
    const double ax = g.dt / (g.dx * g.dx);
    const double ay = g.dt / (g.dy * g.dy);
    const double az = g.dt / (g.dz * g.dz);
    const std::size_t sy = std::size_t(nx);
    const std::size_t sz = sy * std::size_t(ny);
    for (int z = 0; z < nz; ++z) {
        const double kz = k_layer[z];
        const double kzm = k_layer[(z > 0) ? z - 1 : z];
        const double kzp = k_layer[(z + 1 < nz) ? z + 1 : z];
        const std::size_t zo = sz * std::size_t(z);
        const std::size_t zmo = (z > 0) ? zo - sz : zo;
        const std::size_t zpo = (z + 1 < nz) ? zo + sz : zo;
        double dk_acc = 0.0;
        for (int y = 0; y < ny; ++y) {
            const std::size_t ro = zo + sy * std::size_t(y);
            const std::size_t rym = (y > 0) ? ro - sy : ro;
            const std::size_t ryp = (y + 1 < ny) ? ro + sy : ro;
            const double* lc = lam + ro;
            const double* lym = lam + rym;
            const double* lyp = lam + ryp;
            const double* lzm = lam + zmo + sy * std::size_t(y);
            const double* lzp = lam + zpo + sy * std::size_t(y);
            const double* uc = u_prev + ro;
            const double* uym = u_prev + rym;
            const double* uyp = u_prev + ryp;
            const double* uzm = u_prev + zmo + sy * std::size_t(y);
            const double* uzp = u_prev + zpo + sy * std::size_t(y);
            double* ln = lam_next + ro;
            for (int x = 0; x < nx; ++x) {
                const int xm = (x > 0) ? x - 1 : x;
                const int xp = (x + 1 < nx) ? x + 1 : x;
                const double l = lc[x];
                const double c = uc[x];
                const double lap_u = ax * (uc[xm] - 2.0 * c + uc[xp])
                                   + ay * (uym[x] - 2.0 * c + uyp[x])
                                   + az * (uzm[x] - 2.0 * c + uzp[x]);
                dk_acc += l * lap_u;
                const double p = kz * l;
                ln[x] = l + ax * (kz * lc[xm] - 2.0 * p + kz * lc[xp])
                          + ay * (kz * lym[x] - 2.0 * p + kz * lyp[x])
                          + az * (kzm * lzm[x] - 2.0 * p + kzp * lzp[x]);
            }
        }
        dk_layer[z] += dk_acc;
    }
    if (fs) {
        for (std::size_t i = 0; i < sz; ++i) deps2d[i] += g.dt * lam[i] * fs[i];
    }
}

// Shared forward-store-backward driver. StepFn advances one state
// (u_in, fs_or_null, u_out); SweepFn runs one backward sweep and accumulates
// gradients (lam, u_prev, fs_or_null, lam_next). State storage is either
// every step or sqrt-interval checkpoints recomputed per segment, which
// reproduces the stored-state results bit for bit.
template <class StepFn, class SweepFn>
LossReport run_adjoint(const SourceModel& src, const CaptureConfig& cap,
                       const GridSpec& grid, const TsfStack& measured,
                       LossMode mode, double rise_scale, std::size_t max_state_bytes,
                       StepFn&& step_fn, SweepFn&& sweep_fn) {
    const int S = grid.n_steps;
    const int m = steps_per_frame(grid, cap);
    const int F = cap.n_frames;
    const std::size_t vox = grid.n_voxels();
    const std::size_t surf = std::size_t(grid.nx) * std::size_t(grid.ny);
    const int last_on = src.last_on_step(grid.dt);

    const bool full = (std::size_t(S) + 1) * vox * sizeof(double) <= max_state_bytes;
    const int interval = full ? 1 : std::max(1, int(std::ceil(std::sqrt(double(S)))));
    const int n_stored = S / interval + 1;

    std::vector<double> stored(std::size_t(n_stored) * vox);
    std::vector<double> u(vox, cap.ambient_K);
    std::vector<double> unew(vox);
    std::vector<Map2D> residuals(F - 1);

    const double w = (mode == LossMode::kelvin) ? 1.0 : 1.0 / (rise_scale * rise_scale);

    LossReport loss;
    loss.mode = mode;
    loss.rise_scale = rise_scale;
    loss.per_frame.resize(F - 1, 0.0);

    std::memcpy(stored.data(), u.data(), vox * sizeof(double));
    for (int s = 0; s < S; ++s) {
        step_fn(u.data(), s <= last_on, unew.data());
        u.swap(unew);
        const int sn = s + 1;
        if (sn % interval == 0)
            std::memcpy(stored.data() + std::size_t(sn / interval) * vox, u.data(),
                        vox * sizeof(double));
        if (sn % m == 0) {
            const int frame = sn / m;
            Map2D& r = residuals[frame - 1];
            r = Map2D(grid.nx, grid.ny);
            const std::vector<double>& meas = measured.frames[frame].values;
            double ssq = 0.0;
            for (std::size_t i = 0; i < surf; ++i) {
                const double d = u[i] - meas[i];
                r.values[i] = d;
                ssq += d * d;
            }
            loss.per_frame[frame - 1] = w * ssq / double(surf);
        }
    }
    double total = 0.0;
    for (double v : loss.per_frame) total += v;
    loss.mse = total / double(F - 1);

    // Backward pass. lam enters each iteration as lambda^{s+1}.
    const double coef = 2.0 * w / (double(F - 1) * double(surf));
    std::vector<double> lam(vox, 0.0);
    std::vector<double> lam_next(vox);
    std::vector<double> segment;
    int seg_base = -1, seg_len = 0;
    if (!full) segment.resize(std::size_t(interval) * vox);

    auto state_at = [&](int s) -> const double* {
        if (full) return stored.data() + std::size_t(s) * vox;
        const int base = (s / interval) * interval;
        if (base != seg_base) {
            seg_base = base;
            seg_len = std::min(interval, S - base);
            std::memcpy(segment.data(), stored.data() + std::size_t(base / interval) * vox,
                        vox * sizeof(double));
            for (int i = 1; i < seg_len; ++i) {
                const int step_idx = base + i - 1;
                step_fn(segment.data() + std::size_t(i - 1) * vox, step_idx <= last_on,
                        segment.data() + std::size_t(i) * vox);
            }
        }
        return segment.data() + std::size_t(s - base) * vox;
    };

    // Loss injection for the final frame seeds lambda^S.
    for (std::size_t i = 0; i < surf; ++i) lam[i] = coef * residuals[F - 2].values[i];

    for (int s = S - 1; s >= 0; --s) {
        sweep_fn(lam.data(), state_at(s), s <= last_on, lam_next.data());
        lam.swap(lam_next);
        if (s % m == 0 && s >= m) {
            const Map2D& r = residuals[s / m - 1];
            for (std::size_t i = 0; i < surf; ++i) lam[i] += coef * r.values[i];
        }
    }
    return loss;
}

void check_common(const SourceModel& src, const CaptureConfig& cap, const GridSpec& grid,
                  const TsfStack& measured) {
    grid.validate();
    cap.validate();
    src.validate();
    if (cap.n_frames < 2)
        throw std::invalid_argument("gradients need at least 2 frames (frame 0 is excluded)");
    if (std::abs(cap.t_on_s - src.t_on_s) > 1e-9 * std::max(1.0, cap.t_on_s))
        throw std::invalid_argument("capture t_on_s and source t_on_s disagree");
    const int m = steps_per_frame(grid, cap);
    const long long need = static_cast<long long>(m) * (cap.n_frames - 1);
    if (grid.n_steps != need)
        throw std::invalid_argument(
            "frame/step mismatch: grid.n_steps=" + std::to_string(grid.n_steps) +
            " but the frame schedule needs " + std::to_string(need));
    check_surface_compat(cap, grid.nx, grid.ny, measured);
}

}  // namespace

LossReport loss_mse(const TsfStack& simulated, const TsfStack& measured,
                    LossMode mode, double rise_scale) {
    simulated.validate();
    measured.validate();
    if (simulated.grid.nx != measured.grid.nx || simulated.grid.ny != measured.grid.ny)
        throw std::invalid_argument("stacks do not share a pixel raster");
    const CaptureConfig& a = simulated.capture;
    const CaptureConfig& b = measured.capture;
    auto close = [](double x, double y) {
        return std::abs(x - y) <= 1e-9 * std::max({std::abs(x), std::abs(y), 1.0});
    };
    if (a.n_frames != b.n_frames || !close(a.frame_dt_s, b.frame_dt_s) ||
        !close(a.t_on_s, b.t_on_s) || !close(a.ambient_K, b.ambient_K))
        throw std::invalid_argument("stacks do not share a capture configuration");
    if (a.n_frames < 2)
        throw std::invalid_argument("loss needs at least 2 frames (frame 0 is excluded)");

    LossReport loss;
    loss.mode = mode;
    loss.rise_scale = resolve_rise_scale(measured, mode, rise_scale);
    const double w = (mode == LossMode::kelvin) ? 1.0 : 1.0 / (loss.rise_scale * loss.rise_scale);
    const std::size_t surf = simulated.frames[0].values.size();
    loss.per_frame.resize(a.n_frames - 1);
    double total = 0.0;
    for (int fr = 1; fr < a.n_frames; ++fr) {
        const std::vector<double>& s = simulated.frames[fr].values;
        const std::vector<double>& q = measured.frames[fr].values;
        double ssq = 0.0;
        for (std::size_t i = 0; i < surf; ++i) {
            const double d = s[i] - q[i];
            ssq += d * d;
        }
        loss.per_frame[fr - 1] = w * ssq / double(surf);
        total += loss.per_frame[fr - 1];
    }
    loss.mse = total / double(a.n_frames - 1);
    return loss;
}

std::pair<LossReport, ParamGradients> grad_params(
    const ParamMaps& params, const SourceModel& src, const CaptureConfig& cap,
    const GridSpec& grid, const TsfStack& measured, const AdjointConfig& cfg) {
    params.validate();
    if (params.k.nx != grid.nx || params.k.ny != grid.ny)
        throw std::invalid_argument("param map dims do not match the grid");
    check_common(src, cap, grid, measured);
    {
        const StabilityReport rep = stability_check(params, grid);
        if (!rep.stable)
            throw StabilityError("unstable explicit step: cfl_factor=" +
                                     std::to_string(rep.cfl_factor) + " > 1",
                                 rep);
    }
    const double rise = resolve_rise_scale(measured, cfg.mode, cfg.rise_scale);
    const Map2D fs = src.spatial_profile(grid.nx, grid.ny);

    ParamGradients g;
    g.d_k = Map2D(grid.nx, grid.ny);
    g.d_eps_prime = Map2D(grid.nx, grid.ny);

    const double* k2d = params.k.values.data();
    const double* eps2d = params.eps_prime.values.data();
    const double* f = fs.values.data();
    double* dk = g.d_k.values.data();
    double* deps = g.d_eps_prime.values.data();

    LossReport loss = run_adjoint(
        src, cap, grid, measured, cfg.mode, rise, cfg.max_state_bytes,
        [&](const double* uin, bool on, double* uout) {
            kernels::heat_step_mapk(uin, grid, k2d, eps2d, on ? f : nullptr, uout);
        },
        [&](const double* lam, const double* u_prev, bool on, double* lam_next) {
            adjoint_sweep_mapk(lam, u_prev, grid, k2d, on ? f : nullptr, lam_next, dk, deps);
        });
    return {loss, std::move(g)};
}

std::pair<LossReport, TwoLayerGradients> grad_two_layer(
    double k_top, double k_bottom, int n_top, const Map2D& eps_prime,
    const SourceModel& src, const CaptureConfig& cap, const GridSpec& grid,
    const TsfStack& measured, const AdjointConfig& cfg) {
    if (!(std::isfinite(k_top) && k_top >= 0 && std::isfinite(k_bottom) && k_bottom >= 0))
        throw std::invalid_argument("slab diffusivities must be finite and non-negative");
    if (n_top < 1 || n_top > grid.nz)
        throw std::invalid_argument("n_top must lie in [1, grid.nz]");
    if (eps_prime.nx != grid.nx || eps_prime.ny != grid.ny)
        throw std::invalid_argument("eps_prime map dims do not match the grid");
    for (double v : eps_prime.values)
        if (!(std::isfinite(v) && v >= 0))
            throw std::invalid_argument("eps_prime map must be finite and non-negative");
    check_common(src, cap, grid, measured);

    std::vector<double> k_layer(grid.nz, k_bottom);
    for (int z = 0; z < n_top && z < grid.nz; ++z) k_layer[z] = k_top;
    {
        const double k_max = *std::max_element(k_layer.begin(), k_layer.end());
        const StabilityReport rep = stability_check(k_max, grid);
        if (!rep.stable)
            throw StabilityError("unstable explicit step: cfl_factor=" +
                                     std::to_string(rep.cfl_factor) + " > 1",
                                 rep);
    }
    const double rise = resolve_rise_scale(measured, cfg.mode, cfg.rise_scale);
    const Map2D fs = src.spatial_profile(grid.nx, grid.ny);

    TwoLayerGradients g;
    g.d_eps_prime = Map2D(grid.nx, grid.ny);
    std::vector<double> dk_layer(grid.nz, 0.0);

    const double* kl = k_layer.data();
    const double* eps2d = eps_prime.values.data();
    const double* f = fs.values.data();
    double* deps = g.d_eps_prime.values.data();

    LossReport loss = run_adjoint(
        src, cap, grid, measured, cfg.mode, rise, cfg.max_state_bytes,
        [&](const double* uin, bool on, double* uout) {
            kernels::heat_step_layerk(uin, grid, kl, eps2d, on ? f : nullptr, uout);
        },
        [&](const double* lam, const double* u_prev, bool on, double* lam_next) {
            adjoint_sweep_layerk(lam, u_prev, grid, kl, on ? f : nullptr, lam_next,
                                 dk_layer.data(), deps);
        });
    for (int z = 0; z < grid.nz; ++z)
        (z < n_top ? g.d_k_top : g.d_k_bottom) += dk_layer[z];
    return {loss, std::move(g)};
}

GradCheckReport gradient_check(const ParamMaps& params, const SourceModel& src,
                               const CaptureConfig& cap, const GridSpec& grid,
                               const TsfStack& measured, int n_probes,
                               double rel_tol, std::uint64_t seed,
                               const AdjointConfig& cfg) {
    if (n_probes < 1) throw std::invalid_argument("n_probes must be >= 1");
    AdjointConfig fixed = cfg;
    fixed.rise_scale = resolve_rise_scale(measured, cfg.mode, cfg.rise_scale);

    const auto [loss, grads] = grad_params(params, src, cap, grid, measured, fixed);
    (void)loss;

    auto loss_at = [&](const ParamMaps& p) {
        const TsfStack sim = simulate(p, src, cap, grid);
        return loss_mse(sim, measured, fixed.mode, fixed.rise_scale).mse;
    };
    auto map_scale = [](const Map2D& m) {
        double s = 0.0;
        for (double v : m.values) s = std::max(s, std::abs(v));
        return s;
    };
    const double k_scale = map_scale(params.k);
    const double e_scale = map_scale(params.eps_prime);

    Rng rng(seed);
    GradCheckReport rep;
    rep.n_probes = n_probes;
    rep.passed = true;
    for (int i = 0; i < n_probes; ++i) {
        const bool pick_k = (rng.next_u64() & 1) == 0;
        const int x = int(rng.next_u64() % std::uint64_t(grid.nx));
        const int y = int(rng.next_u64() % std::uint64_t(grid.ny));
        ParamMaps p = params;
        Map2D& target = pick_k ? p.k : p.eps_prime;
        const double theta = target.at(x, y);
        const double scale = std::max({std::abs(theta), 1e-3 * (pick_k ? k_scale : e_scale), 1e-12});
        const double h = 1e-6 * scale;

        target.at(x, y) = theta + h;
        const double jp = loss_at(p);
        target.at(x, y) = std::max(theta - h, 0.0);
        const double actual_h = (theta + h - target.at(x, y)) / 2.0;
        const double jm = loss_at(p);
        target.at(x, y) = theta;

        const double fd = (jp - jm) / (2.0 * actual_h);
        const double adj = pick_k ? grads.d_k.at(x, y) : grads.d_eps_prime.at(x, y);
        double err = 0.0;
        if (!(std::abs(adj) <= 1e-12 && std::abs(fd) <= 1e-12))
            err = std::abs(adj - fd) / std::max(std::abs(fd), 1e-12);
        rep.max_rel_err = std::max(rep.max_rel_err, err);
        if (err > rel_tol) rep.passed = false;
    }
    return rep;
}

}  // namespace tsf
