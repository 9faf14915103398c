#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "tsf/forward.hpp"

using namespace tsf;

TEST_SUITE("forward") {

TEST_CASE("laplacian3d: isolated unit spike produces the classic stencil") {
    // 1D-equivalent check along x on a 3x1x1 grid with pitch 1 m: the
    // continuous stencil (u[i-1] - 2 u[i] + u[i+1]) / dx^2 must appear
    // verbatim, with replicate ghosts turning the end cells into
    // single-neighbor differences.
    GridSpec g = tsft::make_grid(3, 1, 1, 1.0, 0.1, 1);
    TemperatureField u(3, 1, 1, 0.0);
    u.at(1, 0, 0) = 1.0;

    TemperatureField lap = laplacian3d(u, g);
    CHECK(lap.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(lap.at(1, 0, 0) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(lap.at(2, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("laplacian3d: uniform field has zero laplacian everywhere") {
    GridSpec g = tsft::make_grid(4, 3, 2, 5e-4, 0.1, 1);
    TemperatureField u(4, 3, 2, 321.5);
    TemperatureField lap = laplacian3d(u, g);
    for (double v : lap.values) CHECK(v == 0.0);
}

TEST_CASE("laplacian3d: anisotropic pitch weights each axis by 1/h^2") {
    // Center voxel of a 3x3x3 grid with different pitches per axis; a unit
    // spike at the center sees -2 * (1/dx^2 + 1/dy^2 + 1/dz^2).
    GridSpec g;
    g.nx = g.ny = g.nz = 3;
    g.dx = 1.0;
    g.dy = 0.5;
    g.dz = 0.25;
    g.dt = 1e-3;
    g.n_steps = 1;
    TemperatureField u(3, 3, 3, 0.0);
    u.at(1, 1, 1) = 1.0;

    TemperatureField lap = laplacian3d(u, g);
    const double expected = -2.0 * (1.0 / 1.0 + 1.0 / 0.25 + 1.0 / 0.0625);
    CHECK(lap.at(1, 1, 1) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(lap.at(0, 1, 1) == doctest::Approx(1.0).epsilon(1e-15));        // x face
    CHECK(lap.at(1, 0, 1) == doctest::Approx(1.0 / 0.25).epsilon(1e-15)); // y face
    CHECK(lap.at(1, 1, 0) == doctest::Approx(1.0 / 0.0625).epsilon(1e-15));
}

TEST_CASE("step: hand-computed 1D diffusion update") {
    // Three cells [300.1, 300.8, 300.1], k = 0.2, dt = 0.1, dx = 1, no
    // source. Update: u' = u + dt * k * lap(u).
    //   lap = [0.7, -1.4, 0.7]
    //   u'  = [300.1 + 0.02*0.7, 300.8 - 0.02*1.4, ...]
    //       = [300.114, 300.772, 300.114]
    GridSpec g = tsft::make_grid(3, 1, 1, 1.0, 0.1, 1);
    ParamMaps p;
    p.k = Map2D(3, 1, 0.2);
    p.eps_prime = Map2D(3, 1, 0.0);
    SourceModel src;
    src.amplitude = 0.0;
    src.sigma_px = 1.0;
    TemperatureField u(3, 1, 1, 300.1);
    u.at(1, 0, 0) = 300.8;

    TemperatureField next = step(u, p, src, 0.0, g);
    CHECK(next.at(0, 0, 0) == doctest::Approx(300.114).epsilon(1e-14));
    CHECK(next.at(1, 0, 0) == doctest::Approx(300.772).epsilon(1e-14));
    CHECK(next.at(2, 0, 0) == doctest::Approx(300.114).epsilon(1e-14));
}

TEST_CASE("step: source deposits eps_prime * f only on the surface layer") {
    GridSpec g = tsft::make_grid(5, 5, 3, 1.0, 0.5, 1);
    ParamMaps p;
    p.k = Map2D(5, 5, 0.0);  // pure deposition, no conduction
    p.eps_prime = Map2D(5, 5, 2.0);
    SourceModel src;
    src.amplitude = 3.0;
    src.center_x = 2.0;
    src.center_y = 2.0;
    src.sigma_px = 1.5;
    src.t_on_s = 10.0;

    TemperatureField u(5, 5, 3, 300.0);
    TemperatureField next = step(u, p, src, 0.0, g);

    Map2D f = src.spatial_profile(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            const double dep = 0.5 * 2.0 * f.at(x, y);
            CHECK(next.at(x, y, 0) == doctest::Approx(300.0 + dep).epsilon(1e-15));
            CHECK(next.at(x, y, 1) == 300.0);  // no heat below the surface
            CHECK(next.at(x, y, 2) == 300.0);
        }
}

TEST_CASE("step: source switches off strictly after t_on") {
    GridSpec g = tsft::make_grid(3, 3, 2, 1.0, 0.25, 1);
    ParamMaps p;
    p.k = Map2D(3, 3, 0.0);
    p.eps_prime = Map2D(3, 3, 1.0);
    SourceModel src;
    src.amplitude = 1.0;
    src.center_x = 1.0;
    src.center_y = 1.0;
    src.sigma_px = 1.0;
    src.t_on_s = 0.5;

    TemperatureField u(3, 3, 2, 300.0);
    // t = 0.5 is the last heated state (inclusive boundary); t = 0.75 is not.
    TemperatureField heated = step(u, p, src, 0.5, g);
    TemperatureField cold = step(u, p, src, 0.75, g);
    CHECK(heated.at(1, 1, 0) > 300.0);
    CHECK(cold.at(1, 1, 0) == 300.0);
}

TEST_CASE("step: rejects an unstable configuration") {
    GridSpec g = tsft::make_grid(4, 4, 4, 5e-4, 10.0, 1);  // dt far too large
    ParamMaps p;
    p.k = Map2D(4, 4, 1e-6);
    p.eps_prime = Map2D(4, 4, 0.0);
    SourceModel src;
    TemperatureField u(4, 4, 4, 300.0);
    CHECK_THROWS_AS(step(u, p, src, 0.0, g), StabilityError);
}

TEST_CASE("stability_check: CFL factor formula") {
    // k = 1.069e-7, dt = 0.25, isotropic 0.5 mm pitch:
    // cfl = k * dt * 3 * 2 / (2.5e-7) = 1.069e-7 * 0.25 * 2.4e7 = 0.6414
    GridSpec g = tsft::make_grid(8, 8, 8, 5e-4, 0.25, 1);
    StabilityReport rep = stability_check(1.069e-7, g);
    CHECK(rep.cfl_factor == doctest::Approx(0.6414).epsilon(1e-12));
    CHECK(rep.stable);
    CHECK(rep.k_max == 1.069e-7);

    // Push past the bound: dt scaled so the factor just exceeds 1.
    GridSpec bad = g;
    bad.dt = 0.25 / 0.6414 * 1.01;
    CHECK_FALSE(stability_check(1.069e-7, bad).stable);
}

TEST_CASE("stability_check on maps uses the maximum k") {
    GridSpec g = tsft::make_grid(4, 4, 4, 5e-4, 0.25, 1);
    ParamMaps p;
    p.k = Map2D(4, 4, 1e-8);
    p.k.at(2, 3) = 9e-7;  // dominates: cfl = 9e-7 * 0.25 * 2.4e7 = 5.4
    p.eps_prime = Map2D(4, 4, 0.0);
    StabilityReport rep = stability_check(p, g);
    CHECK(rep.k_max == 9e-7);
    CHECK_FALSE(rep.stable);
}

TEST_CASE("simulate: zero source holds the ambient state exactly") {
    tsft::Scene sc = tsft::tiny_scene();
    sc.truth.eps_prime = Map2D(sc.grid.nx, sc.grid.ny, 0.0);
    TsfStack stack = simulate(sc.truth, sc.source, sc.capture, sc.grid);
    REQUIRE(stack.frames.size() == std::size_t(sc.capture.n_frames));
    for (const Map2D& fr : stack.frames)
        for (double v : fr.values) CHECK(v == sc.capture.ambient_K);
}

TEST_CASE("simulate: conservation with the source off") {
    // Replicate ghosts mean zero boundary flux: with no source, the sum of
    // all voxel temperatures is invariant. Run 1000 steps from a random
    // positive field and compare sums.
    GridSpec g = tsft::make_grid(12, 10, 6, 5e-4, 0.25, 1000);
    ParamMaps p;
    p.k = Map2D(12, 10, 1.069e-7);
    p.eps_prime = Map2D(12, 10, 0.0);
    SourceModel src;
    src.amplitude = 0.0;
    src.sigma_px = 1.0;

    tsft::FixtureRng rng(99);
    TemperatureField u(12, 10, 6);
    for (double& v : u.values) v = 300.0 + rng.uniform(-5.0, 5.0);
    const double sum0 = std::accumulate(u.values.begin(), u.values.end(), 0.0);
    const double min0 = *std::min_element(u.values.begin(), u.values.end());
    const double max0 = *std::max_element(u.values.begin(), u.values.end());

    for (int s = 0; s < g.n_steps; ++s) u = step(u, p, src, s * g.dt, g);

    const double sum1 = std::accumulate(u.values.begin(), u.values.end(), 0.0);
    CHECK(std::abs(sum1 - sum0) / std::abs(sum0) <= 1e-12);

    // Maximum principle: diffusion alone never leaves the initial range.
    for (double v : u.values) {
        CHECK(v >= min0 - 1e-12);
        CHECK(v <= max0 + 1e-12);
    }
}

TEST_CASE("simulate: frame schedule and monotone heating at the center") {
    tsft::Scene sc = tsft::tiny_scene();
    TsfStack stack = simulate(sc.truth, sc.source, sc.capture, sc.grid);
    REQUIRE(stack.frames.size() == std::size_t(sc.capture.n_frames));
    CHECK(stack.temp_mode == TempMode::kelvin);
    CHECK(stack.frames[0].at(3, 3) == sc.capture.ambient_K);

    // While the source is on, the beam center is non-decreasing.
    const int cx = 3, cy = 3;
    int last_on_frame = int(sc.capture.t_on_s / sc.capture.frame_dt_s);
    for (int i = 1; i <= last_on_frame; ++i)
        CHECK(stack.frames[i].at(cx, cy) >= stack.frames[i - 1].at(cx, cy));
    // And after it turns off, the center cools.
    CHECK(stack.frames.back().at(cx, cy) < stack.frames[last_on_frame].at(cx, cy));
}

TEST_CASE("simulate: frame/step mismatch is rejected") {
    tsft::Scene sc = tsft::tiny_scene();
    sc.grid.n_steps += 1;  // no longer steps_per_frame * (n_frames - 1)
    CHECK_THROWS_AS(simulate(sc.truth, sc.source, sc.capture, sc.grid),
                    std::invalid_argument);
}

TEST_CASE("simulate: translation equivariance of the beam") {
    // Shifting the beam center by a whole pixel shifts the response by the
    // same pixel, exactly, as long as both beams stay away from the walls.
    GridSpec g = tsft::make_grid(40, 40, 6, 5e-4, 0.25, 40);
    CaptureConfig cap;
    cap.n_frames = 11;
    cap.frame_dt_s = 1.0;
    cap.t_on_s = 5.0;
    cap.ambient_K = 300.0;
    ParamMaps p;
    p.k = Map2D(40, 40, 1.069e-7);
    p.eps_prime = Map2D(40, 40, 1.0);

    SourceModel a;
    a.amplitude = 1.0;
    a.center_x = 19.0;
    a.center_y = 20.0;
    a.sigma_px = 1.0;
    a.t_on_s = cap.t_on_s;
    SourceModel b = a;
    b.center_x = 22.0;
    b.center_y = 18.0;

    TsfStack sa = simulate(p, a, cap, g);
    TsfStack sb = simulate(p, b, cap, g);

    // Compare a 7x7 patch around each center. Walls break exact global
    // equality two ways: the beam tail touches them, and diffused heat
    // reflects off them. Both effects fall off like exp(-d^2 / 4kt); at
    // >= 17 px of clearance over a 10 s run they sit below 1e-26 of the
    // rise, so the patches must match to machine precision.
    for (std::size_t f = 0; f < sa.frames.size(); ++f)
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                const double va = sa.frames[f].at(19 + dx, 20 + dy);
                const double vb = sb.frames[f].at(22 + dx, 18 + dy);
                CHECK(va == doctest::Approx(vb).epsilon(1e-12));
            }
}

TEST_CASE("simulate_layered matches the map solver when layers are uniform") {
    // A layered run with every layer at the same k must agree with the
    // 2D-map solver broadcasting that k, bit for bit.
    tsft::Scene sc = tsft::tiny_scene();
    std::vector<double> k_layer(sc.grid.nz, 1.069e-7);
    TsfStack a = simulate_layered(k_layer, sc.truth.eps_prime, sc.source,
                                  sc.capture, sc.grid);
    TsfStack b = simulate(sc.truth, sc.source, sc.capture, sc.grid);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f)
        for (std::size_t i = 0; i < a.frames[f].values.size(); ++i)
            CHECK(a.frames[f].values[i] == b.frames[f].values[i]);
}

TEST_CASE("simulate_layered: interface exchange uses the receiving layer's k") {
    // Contract check on the variable-k discretization: each voxel applies
    // ITS OWN layer k to the whole Laplacian, so across a material boundary
    // the two sides exchange heat at different rates. A 1x1x4 column makes
    // this exact: the x/y terms vanish under replicate ghosts and the
    // update reduces to a four-entry recurrence we replay bit for bit.
    GridSpec g = tsft::make_grid(1, 1, 4, 5e-4, 0.1, 3);
    CaptureConfig cap;
    cap.n_frames = 4;
    cap.frame_dt_s = 0.1;
    cap.t_on_s = 0.3;
    cap.ambient_K = 300.0;
    SourceModel src;
    src.amplitude = 1.0;
    src.center_x = 0.0;
    src.center_y = 0.0;
    src.sigma_px = 1.0;
    src.t_on_s = cap.t_on_s;
    Map2D eps(1, 1, 2.0);
    const std::vector<double> k_layer = {1e-7, 4e-7, 4e-7, 1e-7};

    TsfStack got = simulate_layered(k_layer, eps, src, cap, g);

    // Independent replay of the column recurrence (beam value at the only
    // pixel is exactly the amplitude).
    const double az = g.dt / (g.dz * g.dz);
    std::vector<double> u(4, cap.ambient_K), v(4);
    for (int s = 0; s < 3; ++s) {
        for (int z = 0; z < 4; ++z) {
            const double um = u[z > 0 ? z - 1 : z];
            const double up = u[z < 3 ? z + 1 : z];
            v[z] = u[z] + k_layer[z] * (az * (um - 2.0 * u[z] + up));
        }
        v[0] += g.dt * eps.at(0, 0) * src.amplitude;
        u = v;
        CHECK(got.frames[std::size_t(s) + 1].at(0, 0) == u[0]);
    }

    // Consequence at realistic scale: the surface trace must respond to a
    // change of the deep slab's k, or the two-layer inverse problem would
    // have nothing to grab onto.
    GridSpec g2 = tsft::make_grid(16, 16, 8, 5e-4, 0.04, 250);
    CaptureConfig cap2;
    cap2.n_frames = 11;
    cap2.frame_dt_s = 1.0;
    cap2.t_on_s = 10.0;
    cap2.ambient_K = 300.0;
    SourceModel src2;
    src2.amplitude = 1.0;
    src2.center_x = 7.5;
    src2.center_y = 7.5;
    src2.sigma_px = 2.0;
    src2.t_on_s = cap2.t_on_s;
    Map2D eps2(16, 16, 1.0);
    std::vector<double> slow(8, 1e-7);
    std::vector<double> fast = slow;
    for (int z = 2; z < 8; ++z) fast[z] = 8e-7;
    TsfStack a = simulate_layered(slow, eps2, src2, cap2, g2);
    TsfStack b = simulate_layered(fast, eps2, src2, cap2, g2);
    double max_gap = 0.0;
    for (std::size_t f = 0; f < a.frames.size(); ++f)
        max_gap = std::max(max_gap,
                           std::abs(a.frames[f].at(7, 7) - b.frames[f].at(7, 7)));
    CHECK(max_gap > 1e-3);
}

TEST_CASE("grid refinement: halved pitch converges at second order") {
    // Three resolutions of the same physical slab: 1 mm, 0.5 mm, 0.25 mm
    // pitch with dt scaled by 4x per halving (diffusion number preserved),
    // the beam sigma and center scaled to the same physical footprint, and
    // the amplitude doubled per halving because the source deposits into a
    // half-thickness surface layer. Averaging each run down to the coarsest
    // lattice, consecutive levels should disagree by O(h^2): the gap must
    // shrink by clearly more than half per refinement (4x would be clean
    // second order; 0.4x allows for the odd lower-order term).
    CaptureConfig cap;
    cap.n_frames = 9;
    cap.frame_dt_s = 2.0;
    cap.t_on_s = 8.0;
    cap.ambient_K = 300.0;

    // One simulate() per level, block-averaged down to the 32x32 lattice.
    const auto rise_on_coarse = [&](int refine) -> Map2D {
        const int s = 1 << refine;  // fine cells per coarse cell and axis
        GridSpec g = tsft::make_grid(32 * s, 32 * s, 12 * s, 1e-3 / s,
                                     1.0 / (s * s), 16 * s * s);
        SourceModel src;
        src.amplitude = double(s);
        src.center_x = s * 16.0 + 0.5 * (s - 1);
        src.center_y = s * 16.0 + 0.5 * (s - 1);
        src.sigma_px = 2.0 * s;
        src.t_on_s = cap.t_on_s;
        ParamMaps p;
        p.k = Map2D(32 * s, 32 * s, 1.069e-7);
        p.eps_prime = Map2D(32 * s, 32 * s, 1.0);
        const TsfStack stack = simulate(p, src, cap, g);
        const Map2D& last = stack.frames.back();
        Map2D out(32, 32, 0.0);
        for (int y = 0; y < 32 * s; ++y)
            for (int x = 0; x < 32 * s; ++x)
                out.at(x / s, y / s) += (last.at(x, y) - cap.ambient_K) / double(s * s);
        return out;
    };

    const Map2D r0 = rise_on_coarse(0);
    const Map2D r1 = rise_on_coarse(1);
    const Map2D r2 = rise_on_coarse(2);

    // Gap between consecutive levels over the beam patch, relative to rise.
    double e01 = 0.0, e12 = 0.0;
    for (int y = 14; y <= 18; ++y)
        for (int x = 14; x <= 18; ++x) {
            REQUIRE(r0.at(x, y) > 0.05);  // patch must carry real signal
            e01 = std::max(e01, std::abs(r1.at(x, y) - r0.at(x, y)) / r1.at(x, y));
            e12 = std::max(e12, std::abs(r2.at(x, y) - r1.at(x, y)) / r1.at(x, y));
        }
    CHECK(e01 < 0.15);        // coarse level already in the right ballpark
    CHECK(e12 < 0.4 * e01);   // and the gap closes at better than first order
}

TEST_CASE("kernels: heat_step_mapk agrees with laplacian_into composition") {
    GridSpec g = tsft::make_grid(6, 5, 4, 5e-4, 0.2, 1);
    tsft::FixtureRng rng(5);
    TemperatureField u(6, 5, 4);
    for (double& v : u.values) v = 300.0 + rng.uniform(0.0, 2.0);
    Map2D k(6, 5), eps(6, 5);
    for (double& v : k.values) v = rng.uniform(5e-8, 1.5e-7);
    for (double& v : eps.values) v = rng.uniform(0.0, 1.0);
    SourceModel src;
    src.amplitude = 1.0;
    src.center_x = 2.5;
    src.center_y = 2.0;
    src.sigma_px = 1.2;
    src.t_on_s = 1.0;
    Map2D f = src.spatial_profile(6, 5);

    std::vector<double> lap(g.n_voxels());
    kernels::laplacian_into(u.values.data(), g, lap.data());
    std::vector<double> out(g.n_voxels());
    kernels::heat_step_mapk(u.values.data(), g, k.values.data(), eps.values.data(),
                            f.values.data(), out.data());

    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const std::size_t i = g.idx(x, y, z);
                double expect = u.values[i] + g.dt * k.at(x, y) * lap[i];
                if (z == 0) expect += g.dt * eps.at(x, y) * f.at(x, y);
                CHECK(out[i] == doctest::Approx(expect).epsilon(1e-15));
            }
}

}  // TEST_SUITE
