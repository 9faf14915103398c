#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tsf/domain.hpp"
#include "tsf/forward.hpp"

namespace tsf {

/// How residuals are weighted in the data-misfit loss.
/// kelvin:     plain squared kelvin residuals.
/// normalized: residuals divided by a rise scale (max measured rise above
///             ambient), making the loss dimensionless and scene-independent.
enum class LossMode { kelvin, normalized };

const char* to_string(LossMode mode);

/// Mean squared error over every recorded pixel of frames 1..n-1. Frame 0 is
/// the shared initial condition and carries no information, so it is excluded.
struct LossReport {
    double mse = 0.0;
    std::vector<double> per_frame;  // entry i covers frame i+1
    LossMode mode = LossMode::kelvin;
    double rise_scale = 1.0;        // divisor applied per residual in normalized mode
};

struct ParamGradients {
    Map2D d_k;          // dJ/dk per surface pixel
    Map2D d_eps_prime;  // dJ/deps_prime per surface pixel
};

struct AdjointConfig {
    LossMode mode = LossMode::kelvin;
    /// Rise scale for normalized mode; <= 0 derives it from the measured
    /// stack (max over frames >= 1 of frame - ambient, floored at 1e-6).
    double rise_scale = 0.0;
    /// Full forward-state storage is used while (n_steps+1) states fit in
    /// this budget; beyond it, states are checkpointed every ceil(sqrt(n))
    /// steps and segments are recomputed during the backward pass.
    std::size_t max_state_bytes = std::size_t(1) << 30;
};

/// Loss between two stacks recorded on the same frame schedule and pixel
/// raster (solver-side z resolution may differ).
LossReport loss_mse(const TsfStack& simulated, const TsfStack& measured,
                    LossMode mode = LossMode::kelvin, double rise_scale = 0.0);

/// Loss and its exact gradients for the discrete forward model. The adjoint
/// recurrence is the transpose of the explicit step: with step matrix
/// A = I + dt * diag(k) * L (L the replicate-ghost Laplacian, L = L^T),
/// lambda^t = lambda^{t+1} + dt * L(k .* lambda^{t+1}) + loss injection,
/// and the accumulated sensitivities are
///   d_k(x,y)   = sum_t sum_z dt * lambda^{t+1} * lap(u^t)
///   d_eps(x,y) = sum_{t on} dt * lambda^{t+1}(z=0) * f.
std::pair<LossReport, ParamGradients> grad_params(
    const ParamMaps& params, const SourceModel& src, const CaptureConfig& cap,
    const GridSpec& grid, const TsfStack& measured, const AdjointConfig& cfg = {});

/// Layered-material variant: k constant per z layer, split into a top slab of
/// n_top layers and the remainder. Returns scalar slab sensitivities plus the
/// surface eps_prime gradient map.
struct TwoLayerGradients {
    double d_k_top = 0.0;
    double d_k_bottom = 0.0;
    Map2D d_eps_prime;
};

std::pair<LossReport, TwoLayerGradients> grad_two_layer(
    double k_top, double k_bottom, int n_top, const Map2D& eps_prime,
    const SourceModel& src, const CaptureConfig& cap, const GridSpec& grid,
    const TsfStack& measured, const AdjointConfig& cfg = {});

struct GradCheckReport {
    double max_rel_err = 0.0;
    int n_probes = 0;
    bool passed = false;
};

/// Compares adjoint gradients against central finite differences of the loss
/// at n_probes random coordinates of both maps (relative perturbation 1e-6).
/// A probe passes when |adjoint - fd| / max(|fd|, 1e-12) <= rel_tol, or when
/// both magnitudes sit below the 1e-12 absolute floor.
GradCheckReport gradient_check(const ParamMaps& params, const SourceModel& src,
                               const CaptureConfig& cap, const GridSpec& grid,
                               const TsfStack& measured, int n_probes,
                               double rel_tol = 1e-4, std::uint64_t seed = 1,
                               const AdjointConfig& cfg = {});

}  // namespace tsf
