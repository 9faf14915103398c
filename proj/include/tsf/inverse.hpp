#pragma once

#include <vector>

#include "tsf/adjoint.hpp"
#include "tsf/domain.hpp"

namespace tsf {

struct Bounds {
    double min = 0.0;
    double max = 0.0;
};

/// Adam settings plus the projection boxes and loss/stop policy that shape a
/// recovery run. Updates act on the raw map values; the per-map step size is
/// lr * (bounds width), so lr is expressed in box-normalized units and one
/// setting serves both maps despite their ten-orders-apart scales. After every
/// update the maps are clamped back into their bounds, which also keeps the
/// explicit solver inside its stability region.
struct OptimConfig {
    int epochs = 400;
    double lr0 = 1e-2;
    double lr_decay = 0.5;   // multiplicative, applied every decay_every epochs
    int decay_every = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    Bounds k_bounds{1e-9, 1e-5};   // m^2/s
    /// The normalized-units convention (amplitude 1) puts eps_prime near 1,
    /// so the box is kept tight around that scale; mid-bounds initialization
    /// then starts at 1.0, which converges far better than a wide box would.
    Bounds eps_bounds{0.0, 2.0};
    LossMode loss_mode = LossMode::normalized;
    /// Region of interest. >= 0: disk of this radius (px) around the beam
    /// center. < 0: derived mask, pixels whose measured rise exceeds
    /// roi_rise_floor_K plus the beam support (f >= 1e-3 * amplitude).
    /// Gradients outside the ROI are zeroed, freezing those pixels at their
    /// initial value.
    double roi_radius_px = -1.0;
    double roi_rise_floor_K = 0.5;
    double metal_noise_floor_K = 0.5;
    /// Stop when the relative loss change across a 20-epoch window falls
    /// below this; if epochs run out instead, converged means final loss
    /// below converged_loss_threshold.
    double stagnation_rel = 1e-6;
    double converged_loss_threshold = 1e-2;
    std::size_t max_state_bytes = std::size_t(1) << 30;

    void validate() const;
};

/// lr(epoch) = lr0 * lr_decay^floor(epoch / decay_every).
double lr_schedule(const OptimConfig& cfg, int epoch);

/// True when no pixel ever rises noise_floor_K above its frame-0 value
/// (strict comparison): the heating left no visible trace, which reads as a
/// high-conductivity sample out of the solver's reach.
bool detect_metal(const TsfStack& measured, double noise_floor_K);

struct RecoveryResult {
    ParamMaps params;
    std::vector<LossReport> loss_history;  // one entry per epoch actually run
    bool converged = false;
    bool metal_flag = false;
    Map2D roi;  // 1.0 inside the optimized region, 0.0 outside
};

/// Gradient-descent recovery of per-pixel (k, eps_prime) from a measured
/// stack. Initial maps sit at the center of their bounds. Solver grid z
/// resolution and dt are the caller's choice; stability must hold for
/// k_bounds.max (StabilityError otherwise). Non-finite loss raises
/// DivergenceError. The metal flag is informative; optimization runs anyway.
RecoveryResult recover(const TsfStack& measured, const SourceModel& src,
                       const GridSpec& grid, const OptimConfig& cfg = {});

struct TwoLayerModel {
    double top_thickness_m = 0.0;
    double k_top = 0.0;
    double k_bottom = 0.0;
    Map2D eps_prime_surface;
};

struct TwoLayerResult {
    TwoLayerModel model;
    std::vector<LossReport> loss_history;
    bool converged = false;
    bool metal_flag = false;
    /// False when k_bottom never received a meaningful gradient (its largest
    /// magnitude stayed below 1e-12 of k_top's), e.g. when the top slab
    /// spans the whole depth.
    bool k_bottom_constrained = true;
    Map2D roi;
};

/// Recovery for a two-slab material: scalar k per slab plus a surface
/// eps_prime map. top_thickness_m must be a whole number of z layers,
/// at least one and at most the full depth.
TwoLayerResult recover_two_layer(const TsfStack& measured, const SourceModel& src,
                                 const GridSpec& grid, double top_thickness_m,
                                 const OptimConfig& cfg = {});

}  // namespace tsf
