#include "tsf/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace tsf {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_bounds(const Bounds& b, const char* name) {
    require(std::isfinite(b.min) && std::isfinite(b.max), std::string(name) + " bounds must be finite");
    require(b.min >= 0, std::string(name) + " bounds must be non-negative");
    require(b.min < b.max, std::string(name) + " bounds need min < max");
}

// Moments for one parameter vector; update() is a textbook Adam step with
// bias correction, followed by projection onto [b.min, b.max]. Entries where
// mask == 0 are left untouched (value and moments), so frozen pixels stay at
// their initialization exactly.
struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& theta, const std::vector<double>& grad, int t,
                double lr, const OptimConfig& cfg, const Bounds& b, const double* mask) {
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, t);
        const double bc2 = 1.0 - std::pow(b2, t);
        const double step = lr * (b.max - b.min);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (mask && mask[i] == 0.0) continue;
            const double g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= step * mhat / (std::sqrt(vhat) + cfg.adam_eps);
            theta[i] = std::clamp(theta[i], b.min, b.max);
        }
    }
};

Map2D compute_roi(const TsfStack& measured, const SourceModel& src,
                  const OptimConfig& cfg, int nx, int ny) {
    Map2D roi(nx, ny, 0.0);
    if (cfg.roi_radius_px >= 0) {
        const double r2 = cfg.roi_radius_px * cfg.roi_radius_px;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double ddx = double(x) - src.center_x;
                const double ddy = double(y) - src.center_y;
                if (ddx * ddx + ddy * ddy <= r2) roi.at(x, y) = 1.0;
            }
        return roi;
    }
    // Derived mask: visible heating plus the beam support, so a sample that
    // never warms up (metal) still lets the beam region adapt.
    const Map2D fs = src.spatial_profile(nx, ny);
    const std::vector<double>& frame0 = measured.frames[0].values;
    std::vector<double> rise(frame0.size(), 0.0);
    for (std::size_t fr = 1; fr < measured.frames.size(); ++fr) {
        const std::vector<double>& f = measured.frames[fr].values;
        for (std::size_t i = 0; i < rise.size(); ++i)
            rise[i] = std::max(rise[i], f[i] - frame0[i]);
    }
    for (std::size_t i = 0; i < rise.size(); ++i)
        if (rise[i] > cfg.roi_rise_floor_K || fs.values[i] >= 1e-3 * src.amplitude)
            roi.values[i] = 1.0;
    return roi;
}

void check_stability_or_throw(double k_max, const GridSpec& grid) {
    const StabilityReport rep = stability_check(k_max, grid);
    if (!rep.stable) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "k_bounds.max violates stability: cfl_factor=%.6g > 1 (k_max=%.6g, dt=%.6g)",
                      rep.cfl_factor, rep.k_max, rep.dt);
        throw StabilityError(buf, rep);
    }
}

bool stagnated(const std::vector<LossReport>& hist, double rel) {
    const std::size_t e = hist.size() - 1;
    if (e < 20) return false;
    const double l0 = hist[e - 20].mse;
    const double l1 = hist[e].mse;
    return std::abs(l0 - l1) <= rel * std::max({l0, l1, 1e-300});
}

}  // namespace

void OptimConfig::validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(std::isfinite(lr0) && lr0 > 0, "lr0 must be finite and > 0");
    require(std::isfinite(lr_decay) && lr_decay > 0 && lr_decay <= 1,
            "lr_decay must lie in (0, 1]");
    require(decay_every >= 1, "decay_every must be >= 1");
    require(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1 must lie in [0, 1)");
    require(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2 must lie in [0, 1)");
    require(std::isfinite(adam_eps) && adam_eps > 0, "adam_eps must be finite and > 0");
    check_bounds(k_bounds, "k");
    check_bounds(eps_bounds, "eps_prime");
    require(std::isfinite(roi_rise_floor_K) && roi_rise_floor_K >= 0,
            "roi_rise_floor_K must be finite and >= 0");
    require(std::isfinite(metal_noise_floor_K) && metal_noise_floor_K >= 0,
            "metal_noise_floor_K must be finite and >= 0");
    require(std::isfinite(stagnation_rel) && stagnation_rel > 0,
            "stagnation_rel must be finite and > 0");
    require(std::isfinite(converged_loss_threshold) && converged_loss_threshold >= 0,
            "converged_loss_threshold must be finite and >= 0");
}

double lr_schedule(const OptimConfig& cfg, int epoch) {
    cfg.validate();
    require(epoch >= 0, "epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.lr_decay, double(epoch / cfg.decay_every));
}

bool detect_metal(const TsfStack& measured, double noise_floor_K) {
    measured.validate();
    require(std::isfinite(noise_floor_K) && noise_floor_K >= 0,
            "noise_floor_K must be finite and >= 0");
    const std::vector<double>& frame0 = measured.frames[0].values;
    double max_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t fr = 1; fr < measured.frames.size(); ++fr) {
        const std::vector<double>& f = measured.frames[fr].values;
        for (std::size_t i = 0; i < f.size(); ++i)
            max_rise = std::max(max_rise, f[i] - frame0[i]);
    }
    if (measured.frames.size() < 2) max_rise = 0.0;
    return max_rise < noise_floor_K;
}

RecoveryResult recover(const TsfStack& measured, const SourceModel& src,
                       const GridSpec& grid, const OptimConfig& cfg) {
    cfg.validate();
    grid.validate();
    src.validate();
    measured.validate();
    require(grid.nx == measured.grid.nx && grid.ny == measured.grid.ny,
            "solver grid raster does not match the measured stack");
    check_stability_or_throw(cfg.k_bounds.max, grid);

    const CaptureConfig cap = measured.capture;
    AdjointConfig acfg;
    acfg.mode = cfg.loss_mode;
    acfg.max_state_bytes = cfg.max_state_bytes;

    RecoveryResult res;
    res.metal_flag = detect_metal(measured, cfg.metal_noise_floor_K);
    res.roi = compute_roi(measured, src, cfg, grid.nx, grid.ny);

    res.params.k = Map2D(grid.nx, grid.ny, 0.5 * (cfg.k_bounds.min + cfg.k_bounds.max));
    res.params.eps_prime = Map2D(grid.nx, grid.ny, 0.5 * (cfg.eps_bounds.min + cfg.eps_bounds.max));

    AdamState st_k(res.params.k.size());
    AdamState st_e(res.params.eps_prime.size());
    const double* mask = res.roi.values.data();

    res.loss_history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto [loss, grads] = grad_params(res.params, src, cap, grid, measured, acfg);
        if (!std::isfinite(loss.mse))
            throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch));
        if (acfg.rise_scale <= 0) acfg.rise_scale = loss.rise_scale;
        res.loss_history.push_back(std::move(loss));
        if (stagnated(res.loss_history, cfg.stagnation_rel)) {
            res.converged = true;
            break;
        }
        const double lr = lr_schedule(cfg, epoch);
        st_k.update(res.params.k.values, grads.d_k.values, epoch + 1, lr, cfg,
                    cfg.k_bounds, mask);
        st_e.update(res.params.eps_prime.values, grads.d_eps_prime.values, epoch + 1, lr, cfg,
                    cfg.eps_bounds, mask);
    }
    if (!res.converged)
        res.converged = res.loss_history.back().mse < cfg.converged_loss_threshold;
    return res;
}

TwoLayerResult recover_two_layer(const TsfStack& measured, const SourceModel& src,
                                 const GridSpec& grid, double top_thickness_m,
                                 const OptimConfig& cfg) {
    cfg.validate();
    grid.validate();
    src.validate();
    measured.validate();
    require(grid.nx == measured.grid.nx && grid.ny == measured.grid.ny,
            "solver grid raster does not match the measured stack");
    require(std::isfinite(top_thickness_m) && top_thickness_m > 0,
            "top_thickness_m must be finite and > 0");
    const long long n_top_ll = std::llround(top_thickness_m / grid.dz);
    require(n_top_ll >= 1 && n_top_ll <= grid.nz &&
                std::abs(top_thickness_m - double(n_top_ll) * grid.dz) <= 1e-6 * grid.dz,
            "top_thickness_m must be a whole number of z layers within the grid depth");
    const int n_top = int(n_top_ll);
    check_stability_or_throw(cfg.k_bounds.max, grid);

    const CaptureConfig cap = measured.capture;
    AdjointConfig acfg;
    acfg.mode = cfg.loss_mode;
    acfg.max_state_bytes = cfg.max_state_bytes;

    TwoLayerResult res;
    res.metal_flag = detect_metal(measured, cfg.metal_noise_floor_K);
    res.roi = compute_roi(measured, src, cfg, grid.nx, grid.ny);
    res.model.top_thickness_m = top_thickness_m;
    res.model.k_top = 0.5 * (cfg.k_bounds.min + cfg.k_bounds.max);
    res.model.k_bottom = res.model.k_top;
    res.model.eps_prime_surface =
        Map2D(grid.nx, grid.ny, 0.5 * (cfg.eps_bounds.min + cfg.eps_bounds.max));

    AdamState st_e(res.model.eps_prime_surface.size());
    double m_top = 0, v_top = 0, m_bot = 0, v_bot = 0;
    double gmax_top = 0, gmax_bot = 0;
    const double* mask = res.roi.values.data();

    res.loss_history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto [loss, grads] = grad_two_layer(res.model.k_top, res.model.k_bottom, n_top,
                                            res.model.eps_prime_surface, src, cap, grid,
                                            measured, acfg);
        if (!std::isfinite(loss.mse))
            throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch));
        if (acfg.rise_scale <= 0) acfg.rise_scale = loss.rise_scale;
        res.loss_history.push_back(std::move(loss));
        gmax_top = std::max(gmax_top, std::abs(grads.d_k_top));
        gmax_bot = std::max(gmax_bot, std::abs(grads.d_k_bottom));
        if (stagnated(res.loss_history, cfg.stagnation_rel)) {
            res.converged = true;
            break;
        }
        const double lr = lr_schedule(cfg, epoch);
        const int t = epoch + 1;
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
        const double step = lr * (cfg.k_bounds.max - cfg.k_bounds.min);
        auto scalar_update = [&](double& theta, double g, double& m, double& v) {
            m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
            v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
            theta -= step * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
            theta = std::clamp(theta, cfg.k_bounds.min, cfg.k_bounds.max);
        };
        scalar_update(res.model.k_top, grads.d_k_top, m_top, v_top);
        scalar_update(res.model.k_bottom, grads.d_k_bottom, m_bot, v_bot);
        st_e.update(res.model.eps_prime_surface.values, grads.d_eps_prime.values, t, lr, cfg,
                    cfg.eps_bounds, mask);
    }
    if (!res.converged)
        res.converged = res.loss_history.back().mse < cfg.converged_loss_threshold;
    res.k_bottom_constrained = gmax_bot >= 1e-12 * gmax_top && gmax_top > 0;
    return res;
}

}  // namespace tsf
