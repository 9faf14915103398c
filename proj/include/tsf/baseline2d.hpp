#pragma once

#include <vector>

#include "tsf/domain.hpp"

namespace tsf {

/// Forward-difference time derivative between consecutive frames:
/// out[i] = (frames[i+1] - frames[i]) / frame_dt_s, one map per interval.
std::vector<Map2D> temporal_derivative(const TsfStack& stack);

/// 5-point Laplacian of one frame with replicate ghosts, units K/m^2.
/// Requires square pixels (grid.dx == grid.dy).
Map2D laplacian2d(const Map2D& frame, const GridSpec& grid);

struct BaselineFit {
    /// Raw least-squares estimates; values can leave the physical range,
    /// that is the point of keeping this fit around as a comparison.
    ParamMaps params;
    /// 1.0 where the per-pixel system was solvable, 0.0 where it was rank
    /// deficient (those pixels carry k = eps_prime = 0).
    Map2D valid;
};

/// Per-pixel closed-form fit of u_t ~= k * lap2d(u) + eps_prime * f over all
/// frame intervals, via 2x2 normal equations. Ignores vertical conduction
/// entirely, which is what bends the recovered k into a ring around the beam
/// on data from a 3D sample.
BaselineFit fit_pixelwise(const TsfStack& stack, const SourceModel& src);

}  // namespace tsf
