#include "tsf/baseline2d.hpp"

#include <cmath>
#include <stdexcept>

namespace tsf {

namespace {
constexpr double kRankTol = 1e-12;
}

std::vector<Map2D> temporal_derivative(const TsfStack& stack) {
    stack.validate();
    if (stack.capture.n_frames < 2)
        throw std::invalid_argument("temporal derivative needs at least 2 frames");
    const double inv_dt = 1.0 / stack.capture.frame_dt_s;
    std::vector<Map2D> out;
    out.reserve(stack.frames.size() - 1);
    for (std::size_t i = 0; i + 1 < stack.frames.size(); ++i) {
        Map2D d(stack.grid.nx, stack.grid.ny);
        const std::vector<double>& a = stack.frames[i].values;
        const std::vector<double>& b = stack.frames[i + 1].values;
        for (std::size_t p = 0; p < d.values.size(); ++p)
            d.values[p] = (b[p] - a[p]) * inv_dt;
        out.push_back(std::move(d));
    }
    return out;
}

Map2D laplacian2d(const Map2D& frame, const GridSpec& grid) {
    grid.validate();
    if (frame.nx != grid.nx || frame.ny != grid.ny)
        throw std::invalid_argument("frame dims do not match the grid");
    if (std::abs(grid.dx - grid.dy) > 1e-12 * grid.dx)
        throw std::invalid_argument("laplacian2d requires square pixels (dx == dy)");
    const int nx = frame.nx, ny = frame.ny;
    const double inv_h2 = 1.0 / (grid.dx * grid.dx);
    Map2D out(nx, ny);
    for (int y = 0; y < ny; ++y) {
        const int ym = (y > 0) ? y - 1 : y;
        const int yp = (y + 1 < ny) ? y + 1 : y;
        for (int x = 0; x < nx; ++x) {
            const int xm = (x > 0) ? x - 1 : x;
            const int xp = (x + 1 < nx) ? x + 1 : x;
            const double c = frame.at(x, y);
            out.at(x, y) = inv_h2 * (frame.at(xm, y) + frame.at(xp, y) +
                                     frame.at(x, ym) + frame.at(x, yp) - 4.0 * c);
        }
    }
    return out;
}

BaselineFit fit_pixelwise(const TsfStack& stack, const SourceModel& src) {
    stack.validate();
    src.validate();
    if (stack.capture.n_frames < 3)
        throw std::invalid_argument("pixelwise fit needs at least 3 frames");
    if (std::abs(stack.capture.t_on_s - src.t_on_s) >
        1e-9 * std::max(1.0, stack.capture.t_on_s))
        throw std::invalid_argument("capture t_on_s and source t_on_s disagree");

    const int nx = stack.grid.nx, ny = stack.grid.ny;
    const std::size_t n = std::size_t(nx) * std::size_t(ny);
    const Map2D fs = src.spatial_profile(nx, ny);
    const std::vector<Map2D> dudt = temporal_derivative(stack);
    const int last_on = src.last_on_step(stack.capture.frame_dt_s);

    // Per-pixel Gram accumulators for the design [lap2d(u_t), f_t].
    std::vector<double> saa(n, 0.0), sab(n, 0.0), sbb(n, 0.0), say(n, 0.0), sby(n, 0.0);
    for (std::size_t t = 0; t < dudt.size(); ++t) {
        const Map2D lap = laplacian2d(stack.frames[t], stack.grid);
        const bool on = int(t) <= last_on;
        for (std::size_t p = 0; p < n; ++p) {
            const double a = lap.values[p];
            const double b = on ? fs.values[p] : 0.0;
            const double yv = dudt[t].values[p];
            saa[p] += a * a;
            sab[p] += a * b;
            sbb[p] += b * b;
            say[p] += a * yv;
            sby[p] += b * yv;
        }
    }

    BaselineFit fit;
    fit.params.k = Map2D(nx, ny);
    fit.params.eps_prime = Map2D(nx, ny);
    fit.valid = Map2D(nx, ny);
    for (std::size_t p = 0; p < n; ++p) {
        const double det = saa[p] * sbb[p] - sab[p] * sab[p];
        const bool ok = det > kRankTol * saa[p] * sbb[p] && saa[p] > 0 && sbb[p] > 0;
        if (!ok) continue;
        fit.params.k.values[p] = (sbb[p] * say[p] - sab[p] * sby[p]) / det;
        fit.params.eps_prime.values[p] = (saa[p] * sby[p] - sab[p] * say[p]) / det;
        fit.valid.values[p] = 1.0;
    }
    return fit;
}

}  // namespace tsf
