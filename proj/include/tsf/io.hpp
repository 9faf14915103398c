#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tsf/classify.hpp"
#include "tsf/domain.hpp"
#include "tsf/inverse.hpp"

namespace tsf {

/// On-disk frame-stack bundle: a directory holding `meta.txt` (UTF-8
/// key=value lines) and `frames.bin` (little-endian IEEE-754 binary32,
/// layout [t][y][x], exactly nt*ny*nx values). meta.txt keys, in write
/// order: format_version, nx, ny, nt, dt_s, dx_m, t_on_s, ambient_K,
/// temp_mode. Unknown, missing, or repeated keys are format errors.
void write_bundle(const TsfStack& stack, const std::filesystem::path& dir);

/// Reads and validates a bundle. The returned stack carries a minimal
/// surface grid (nz = 1, dz = dx = dy = dx_m, dt = dt_s): depth extent and
/// substepping are solver choices, not measurement facts — see
/// derive_solver_setup. Any malformed content throws FormatError naming the
/// offending key, row, or byte count.
TsfStack read_bundle(const std::filesystem::path& dir);

/// Writes text to path through a temp file + rename, so concurrent readers
/// never see a partial file. All emitters in this module write this way.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// One row per y, comma-separated, full decimal (%.17g) precision.
void write_map_csv(const Map2D& map, const std::filesystem::path& path);
Map2D read_map_csv(const std::filesystem::path& path);

/// Binary (P5) 16-bit PGM, big-endian samples per the netpbm convention;
/// pixel = round(65535 * clamp((v - lo) / (hi - lo), 0, 1)). Requires a
/// finite map and lo < hi.
void write_map_pgm(const Map2D& map, const std::filesystem::path& path,
                   double lo, double hi);

/// Time series export: header `time_s,px_{x}_{y},...`, one row per frame.
/// Pixel coords must lie inside the frames.
void write_curve_csv(const TsfStack& stack,
                     const std::vector<std::pair<int, int>>& pixels,
                     const std::filesystem::path& path);

/// Square matrix with a header row/column of label names; rows are true
/// labels, columns predictions.
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);

/// Adds i.i.d. Gaussian noise (sigma in kelvin) to every pixel of every
/// frame, including frame 0. Deterministic in the seed; frame i draws from
/// the seed's substream i, so truncating a stack does not reshuffle noise.
void add_gaussian_noise(TsfStack& stack, double sigma_K, std::uint64_t seed);

/// Full description of one synthetic experiment: scene, capture schedule,
/// beam, ground-truth material, noise, and the optimizer settings used when
/// the scene is inverted. Defaults describe the wood reference scene
/// (50 x 50 x 30 mm at 0.5 mm pitch, dt 0.25 s, 40 s horizon, 20 s heating).
struct RunConfig {
    GridSpec grid;          // n_steps derived from the capture schedule
    CaptureConfig capture;
    SourceModel source;
    OptimConfig optim;
    double k_true = 1.069e-7;      // m^2/s, uniform truth map
    double eps_prime_true = 1.0;   // normalized source units
    double noise_sigma_K = 0.05;
    std::uint64_t seed = 1;
};

RunConfig default_run_config();

/// Parses a UTF-8 key=value file ('#' lines and blank lines ignored).
/// Every key is optional and falls back to default_run_config(); keys that
/// were defaulted are reported through defaulted_keys (when non-null) so the
/// caller can log them. Unknown or repeated keys, or unparseable values,
/// throw FormatError naming the key. grid.n_steps and the beam center
/// (default: image center) are derived, not configured.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::vector<std::string>* defaulted_keys = nullptr);

/// The recognized RunConfig keys, in documentation order.
const std::vector<std::string>& run_config_keys();

/// Solver lattice for inverting a measured surface stack: extrudes the
/// surface pixel pitch to an isotropic grid of depth_m (rounded to whole
/// layers, clamped to [8, 128]), and subdivides the frame interval into the
/// fewest equal substeps that keep the explicit scheme at or below CFL 0.95
/// for diffusivities up to k_max.
struct SolverSetup {
    GridSpec grid;
    int substeps = 1;  // grid.dt = capture.frame_dt_s / substeps
};

SolverSetup derive_solver_setup(const TsfStack& measured, double k_max,
                                double depth_m = 0.03);

/// One row of a dataset manifest: CSV with header
/// `bundle_path,label,center_x,center_y`. bundle_path is resolved relative
/// to the manifest file and may point at a TsfBundle directory (recovery is
/// run to obtain maps) or at a directory holding precomputed k.csv and
/// eps_prime.csv.
struct ManifestRow {
    std::filesystem::path bundle_path;
    std::string label;
    int center_x = 0;
    int center_y = 0;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Settings for turning manifest rows into feature vectors.
struct DatasetOptions {
    int window = 3;              // odd feature window width
    double sigma_px = 3.0;       // beam width assumed for recovery runs
    double k_max = 1.5e-7;       // stability cap for recovery runs [m^2/s]
    OptimConfig optim;           // k_bounds.max is overridden by k_max
    double depth_m = 0.03;       // solver depth for recovery runs
};

/// Loads every manifest row: reads cached maps when present, otherwise
/// recovers them from the bundle. Stacks with no visible heating are marked
/// metal and skip recovery (their features are zero placeholders; routing
/// ignores them). label_names are in order of first appearance. Errors
/// name the 1-based data row that caused them.
MaterialDataset load_dataset(const std::filesystem::path& manifest_path,
                             const DatasetOptions& opts = {});

}  // namespace tsf
