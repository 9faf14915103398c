#include "tsf/io.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tsf/errors.hpp"
#include "tsf/forward.hpp"
#include "tsf/rng.hpp"

namespace fs = std::filesystem;

namespace tsf {

namespace {

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    // ERANGE with a finite result is an underflow to a subnormal or zero;
    // that is still the nearest representable value, so only overflow
    // (non-finite result) and outright syntax errors are rejected.
    if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
        throw FormatError(what + ": cannot parse '" + text + "' as a finite number");
    return v;
}

long long parse_int(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        throw FormatError(what + ": cannot parse '" + text + "' as an integer");
    return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE || text.find('-') != std::string::npos)
        throw FormatError(what + ": cannot parse '" + text + "' as an unsigned integer");
    return v;
}

/// Writes the whole buffer to path via a temp file + rename so readers never
/// observe a half-written file.
void write_file_atomic(const fs::path& path, const void* data, std::size_t size) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
        out.write(static_cast<const char*>(data), std::streamsize(size));
        out.flush();
        if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

namespace {

std::vector<unsigned char> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    std::vector<unsigned char> bytes;
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    if (size < 0) throw FormatError("cannot determine size of '" + path.string() + "'");
    bytes.resize(std::size_t(size));
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw FormatError("read from '" + path.string() + "' failed");
    return bytes;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

constexpr const char* kMetaKeys[] = {"format_version", "nx", "ny", "nt", "dt_s",
                                     "dx_m", "t_on_s", "ambient_K", "temp_mode"};

}  // namespace

void write_bundle(const TsfStack& stack, const fs::path& dir) {
    stack.validate();
    fs::create_directories(dir);

    std::string meta;
    meta += "format_version=1\n";
    meta += "nx=" + std::to_string(stack.grid.nx) + "\n";
    meta += "ny=" + std::to_string(stack.grid.ny) + "\n";
    meta += "nt=" + std::to_string(stack.capture.n_frames) + "\n";
    meta += "dt_s=" + fmt_g(stack.capture.frame_dt_s) + "\n";
    meta += "dx_m=" + fmt_g(stack.grid.dx) + "\n";
    meta += "t_on_s=" + fmt_g(stack.capture.t_on_s) + "\n";
    meta += "ambient_K=" + fmt_g(stack.capture.ambient_K) + "\n";
    meta += std::string("temp_mode=") + to_string(stack.temp_mode) + "\n";
    write_text_file(dir / "meta.txt", meta);

    std::vector<unsigned char> bytes;
    bytes.reserve(std::size_t(4) * stack.frames.size() * stack.grid.ny * stack.grid.nx);
    for (std::size_t t = 0; t < stack.frames.size(); ++t) {
        const Map2D& fr = stack.frames[t];
        for (int y = 0; y < fr.ny; ++y)
            for (int x = 0; x < fr.nx; ++x) {
                const float f = float(fr.at(x, y));
                if (!std::isfinite(f))
                    throw FormatError("frames.bin: value at frame " + std::to_string(t) +
                                      ", pixel x=" + std::to_string(x) + " y=" + std::to_string(y) +
                                      " does not fit binary32");
                const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
                bytes.push_back(u & 0xffu);
                bytes.push_back((u >> 8) & 0xffu);
                bytes.push_back((u >> 16) & 0xffu);
                bytes.push_back((u >> 24) & 0xffu);
            }
    }
    write_file_atomic(dir / "frames.bin", bytes.data(), bytes.size());
}

TsfStack read_bundle(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.txt";
    std::map<std::string, std::string> kv;
    for (const std::string& line : read_lines(meta_path)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("meta.txt: line '" + line + "' is not key=value");
        const std::string key = line.substr(0, eq);
        if (kv.count(key)) throw FormatError("meta.txt: repeated key '" + key + "'");
        kv[key] = line.substr(eq + 1);
    }
    for (const char* key : kMetaKeys)
        if (!kv.count(key)) throw FormatError("meta.txt: missing key '" + std::string(key) + "'");
    for (const auto& [key, value] : kv)
        if (std::find_if(std::begin(kMetaKeys), std::end(kMetaKeys),
                         [&](const char* k) { return key == k; }) == std::end(kMetaKeys))
            throw FormatError("meta.txt: unknown key '" + key + "'");
    if (kv["format_version"] != "1")
        throw FormatError("meta.txt: unknown format_version '" + kv["format_version"] + "'");

    TsfStack stack;
    try {
        const long long nx = parse_int(kv["nx"], "meta.txt: key 'nx'");
        const long long ny = parse_int(kv["ny"], "meta.txt: key 'ny'");
        const long long nt = parse_int(kv["nt"], "meta.txt: key 'nt'");
        if (nx < 1 || ny < 1 || nt < 1)
            throw FormatError("meta.txt: nx, ny, nt must all be >= 1");
        const double dt_s = parse_double(kv["dt_s"], "meta.txt: key 'dt_s'");
        const double dx_m = parse_double(kv["dx_m"], "meta.txt: key 'dx_m'");

        stack.grid.nx = int(nx);
        stack.grid.ny = int(ny);
        stack.grid.nz = 1;
        stack.grid.dx = stack.grid.dy = stack.grid.dz = dx_m;
        stack.grid.dt = dt_s;
        stack.grid.n_steps = int(nt) - 1;
        stack.capture.t_on_s = parse_double(kv["t_on_s"], "meta.txt: key 't_on_s'");
        stack.capture.frame_dt_s = dt_s;
        stack.capture.n_frames = int(nt);
        stack.capture.ambient_K = parse_double(kv["ambient_K"], "meta.txt: key 'ambient_K'");
        stack.temp_mode = temp_mode_from_string(kv["temp_mode"]);
        stack.grid.validate();
        stack.capture.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError("meta.txt: " + std::string(e.what()));
    }

    const std::vector<unsigned char> bytes = read_file_bytes(dir / "frames.bin");
    const unsigned long long expected =
        4ull * std::uint64_t(stack.capture.n_frames) * stack.grid.ny * stack.grid.nx;
    if (bytes.size() != expected)
        throw FormatError("frames.bin: expected " + std::to_string(expected) + " bytes (" +
                          std::to_string(stack.capture.n_frames) + " frames of " +
                          std::to_string(stack.grid.nx) + "x" + std::to_string(stack.grid.ny) +
                          " binary32), got " + std::to_string(bytes.size()));

    stack.frames.assign(std::size_t(stack.capture.n_frames), Map2D(stack.grid.nx, stack.grid.ny));
    std::size_t off = 0;
    for (int t = 0; t < stack.capture.n_frames; ++t) {
        Map2D& fr = stack.frames[std::size_t(t)];
        for (int y = 0; y < fr.ny; ++y)
            for (int x = 0; x < fr.nx; ++x, off += 4) {
                const std::uint32_t u = std::uint32_t(bytes[off]) |
                                        (std::uint32_t(bytes[off + 1]) << 8) |
                                        (std::uint32_t(bytes[off + 2]) << 16) |
                                        (std::uint32_t(bytes[off + 3]) << 24);
                const float f = std::bit_cast<float>(u);
                if (!std::isfinite(f))
                    throw FormatError("frames.bin: non-finite value at index " +
                                      std::to_string(off / 4) + " (frame " + std::to_string(t) +
                                      ", pixel x=" + std::to_string(x) + " y=" + std::to_string(y) + ")");
                fr.at(x, y) = double(f);
            }
    }
    try {
        stack.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError("bundle '" + dir.string() + "': " + e.what());
    }
    return stack;
}

void write_map_csv(const Map2D& map, const fs::path& path) {
    if (map.nx < 1 || map.ny < 1 || map.values.size() != std::size_t(map.nx) * map.ny)
        throw std::invalid_argument("map must be non-empty with matching value count");
    std::string text;
    for (int y = 0; y < map.ny; ++y) {
        for (int x = 0; x < map.nx; ++x) {
            if (x) text += ',';
            const double v = map.at(x, y);
            if (!std::isfinite(v)) throw std::invalid_argument("map contains a non-finite value");
            text += fmt_g(v);
        }
        text += '\n';
    }
    write_text_file(path, text);
}

Map2D read_map_csv(const fs::path& path) {
    std::vector<std::string> lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw FormatError("'" + path.string() + "': empty map file");
    Map2D map;
    map.ny = int(lines.size());
    for (std::size_t y = 0; y < lines.size(); ++y) {
        const std::vector<std::string> fields = split_csv(lines[y]);
        if (y == 0) {
            map.nx = int(fields.size());
        } else if (int(fields.size()) != map.nx) {
            throw FormatError("'" + path.string() + "': row " + std::to_string(y + 1) + " has " +
                              std::to_string(fields.size()) + " values, expected " +
                              std::to_string(map.nx));
        }
        for (const std::string& f : fields)
            map.values.push_back(
                parse_double(f, "'" + path.string() + "': row " + std::to_string(y + 1)));
    }
    return map;
}

void write_map_pgm(const Map2D& map, const fs::path& path, double lo, double hi) {
    if (map.nx < 1 || map.ny < 1 || map.values.size() != std::size_t(map.nx) * map.ny)
        throw std::invalid_argument("map must be non-empty with matching value count");
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
        throw std::invalid_argument("pgm range must be finite with lo < hi");
    for (double v : map.values)
        if (!std::isfinite(v)) throw std::invalid_argument("map contains a non-finite value");

    char header[64];
    std::snprintf(header, sizeof header, "P5\n%d %d\n65535\n", map.nx, map.ny);
    std::vector<unsigned char> bytes(header, header + std::strlen(header));
    bytes.reserve(bytes.size() + std::size_t(2) * map.nx * map.ny);
    const double span = hi - lo;
    for (int y = 0; y < map.ny; ++y)
        for (int x = 0; x < map.nx; ++x) {
            const double unit = std::clamp((map.at(x, y) - lo) / span, 0.0, 1.0);
            const unsigned val = unsigned(std::llround(65535.0 * unit));
            bytes.push_back((val >> 8) & 0xffu);  // most significant byte first
            bytes.push_back(val & 0xffu);
        }
    write_file_atomic(path, bytes.data(), bytes.size());
}

void write_curve_csv(const TsfStack& stack, const std::vector<std::pair<int, int>>& pixels,
                     const fs::path& path) {
    stack.validate();
    for (const auto& [x, y] : pixels)
        if (x < 0 || x >= stack.grid.nx || y < 0 || y >= stack.grid.ny)
            throw std::invalid_argument("curve pixel (" + std::to_string(x) + ", " +
                                        std::to_string(y) + ") lies outside the frames");
    std::string text = "time_s";
    for (const auto& [x, y] : pixels)
        text += ",px_" + std::to_string(x) + "_" + std::to_string(y);
    text += '\n';
    if (!pixels.empty()) {
        for (std::size_t t = 0; t < stack.frames.size(); ++t) {
            text += fmt_g(double(t) * stack.capture.frame_dt_s);
            for (const auto& [x, y] : pixels) text += ',' + fmt_g(stack.frames[t].at(x, y));
            text += '\n';
        }
    }
    write_text_file(path, text);
}

void write_confusion_csv(const ConfusionMatrix& cm, const fs::path& path) {
    if (cm.counts.size() != cm.labels.size())
        throw std::invalid_argument("confusion matrix row count does not match its labels");
    std::string text = "label";
    for (const std::string& name : cm.labels) text += ',' + name;
    text += '\n';
    for (std::size_t i = 0; i < cm.labels.size(); ++i) {
        if (cm.counts[i].size() != cm.labels.size())
            throw std::invalid_argument("confusion matrix is not square");
        text += cm.labels[i];
        for (int v : cm.counts[i]) text += ',' + std::to_string(v);
        text += '\n';
    }
    write_text_file(path, text);
}

void add_gaussian_noise(TsfStack& stack, double sigma_K, std::uint64_t seed) {
    if (!(std::isfinite(sigma_K) && sigma_K >= 0))
        throw std::invalid_argument("noise sigma must be finite and >= 0");
    if (sigma_K == 0) return;
    Rng root(seed);
    for (std::size_t t = 0; t < stack.frames.size(); ++t) {
        Rng frame_rng = root.split(t);
        for (double& v : stack.frames[t].values) v += sigma_K * frame_rng.normal();
    }
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.grid.nx = 100;
    cfg.grid.ny = 100;
    cfg.grid.nz = 60;
    cfg.grid.dx = cfg.grid.dy = cfg.grid.dz = 5e-4;
    cfg.grid.dt = 0.25;
    cfg.capture.t_on_s = 20.0;
    cfg.capture.frame_dt_s = 0.25;
    cfg.capture.n_frames = 161;
    cfg.capture.ambient_K = 300.0;
    cfg.grid.n_steps = steps_per_frame(cfg.grid, cfg.capture) * (cfg.capture.n_frames - 1);
    cfg.source.amplitude = 1.0;
    cfg.source.center_x = double(cfg.grid.nx - 1) / 2.0;
    cfg.source.center_y = double(cfg.grid.ny - 1) / 2.0;
    cfg.source.sigma_px = 3.0;
    cfg.source.t_on_s = cfg.capture.t_on_s;
    // The generic OptimConfig k ceiling (1e-5) is far above this scene's
    // stability limit; cap it so recovery runs without substepping.
    cfg.optim.k_bounds = Bounds{1e-9, 1.5e-7};
    return cfg;
}

const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys = {
        "nx", "ny", "nz", "dx_m", "dy_m", "dz_m", "dt_s",
        "n_frames", "frame_dt_s", "t_on_s", "ambient_K",
        "amplitude", "center_x", "center_y", "sigma_px",
        "k_true", "eps_prime_true", "noise_sigma_K", "seed",
        "epochs", "lr0", "lr_decay", "decay_every",
        "adam_beta1", "adam_beta2", "adam_eps",
        "k_min", "k_max", "eps_min", "eps_max",
        "loss_mode", "roi_radius_px", "roi_rise_floor_K", "metal_noise_floor_K",
        "stagnation_rel", "converged_loss_threshold",
    };
    return keys;
}

RunConfig load_run_config(const fs::path& path, std::vector<std::string>* defaulted_keys) {
    const std::string where = "config '" + path.string() + "'";
    std::map<std::string, std::string> kv;
    for (const std::string& raw : read_lines(path)) {
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        line = line.substr(start);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(where + ": line '" + line + "' is not key=value");
        // Hand-written files get whitespace latitude around '='.
        const auto trim = [](std::string s) {
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
            std::size_t i = 0;
            while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
            return s.substr(i);
        };
        const std::string key = trim(line.substr(0, eq));
        if (std::find(run_config_keys().begin(), run_config_keys().end(), key) ==
            run_config_keys().end())
            throw FormatError(where + ": unknown key '" + key + "'");
        if (kv.count(key)) throw FormatError(where + ": repeated key '" + key + "'");
        kv[key] = trim(line.substr(eq + 1));
    }

    RunConfig cfg = default_run_config();
    const auto geti = [&](const char* key, int& out) {
        if (auto it = kv.find(key); it != kv.end())
            out = int(parse_int(it->second, where + ": key '" + std::string(key) + "'"));
    };
    const auto getd = [&](const char* key, double& out) {
        if (auto it = kv.find(key); it != kv.end())
            out = parse_double(it->second, where + ": key '" + std::string(key) + "'");
    };

    geti("nx", cfg.grid.nx);
    geti("ny", cfg.grid.ny);
    geti("nz", cfg.grid.nz);
    getd("dx_m", cfg.grid.dx);
    getd("dy_m", cfg.grid.dy);
    getd("dz_m", cfg.grid.dz);
    getd("dt_s", cfg.grid.dt);
    geti("n_frames", cfg.capture.n_frames);
    getd("frame_dt_s", cfg.capture.frame_dt_s);
    getd("t_on_s", cfg.capture.t_on_s);
    getd("ambient_K", cfg.capture.ambient_K);
    getd("amplitude", cfg.source.amplitude);
    getd("sigma_px", cfg.source.sigma_px);
    getd("k_true", cfg.k_true);
    getd("eps_prime_true", cfg.eps_prime_true);
    getd("noise_sigma_K", cfg.noise_sigma_K);
    if (auto it = kv.find("seed"); it != kv.end())
        cfg.seed = parse_u64(it->second, where + ": key 'seed'");
    geti("epochs", cfg.optim.epochs);
    getd("lr0", cfg.optim.lr0);
    getd("lr_decay", cfg.optim.lr_decay);
    geti("decay_every", cfg.optim.decay_every);
    getd("adam_beta1", cfg.optim.adam_beta1);
    getd("adam_beta2", cfg.optim.adam_beta2);
    getd("adam_eps", cfg.optim.adam_eps);
    getd("k_min", cfg.optim.k_bounds.min);
    getd("k_max", cfg.optim.k_bounds.max);
    getd("eps_min", cfg.optim.eps_bounds.min);
    getd("eps_max", cfg.optim.eps_bounds.max);
    if (auto it = kv.find("loss_mode"); it != kv.end()) {
        if (it->second == "kelvin")
            cfg.optim.loss_mode = LossMode::kelvin;
        else if (it->second == "normalized")
            cfg.optim.loss_mode = LossMode::normalized;
        else
            throw FormatError(where + ": key 'loss_mode': expected 'kelvin' or 'normalized', got '" +
                              it->second + "'");
    }
    getd("roi_radius_px", cfg.optim.roi_radius_px);
    getd("roi_rise_floor_K", cfg.optim.roi_rise_floor_K);
    getd("metal_noise_floor_K", cfg.optim.metal_noise_floor_K);
    getd("stagnation_rel", cfg.optim.stagnation_rel);
    getd("converged_loss_threshold", cfg.optim.converged_loss_threshold);

    // Derived values: the beam tracks the image center unless placed
    // explicitly, the source burn time follows the capture schedule, and the
    // step count covers the recorded span exactly.
    if (auto it = kv.find("center_x"); it != kv.end())
        cfg.source.center_x = parse_double(it->second, where + ": key 'center_x'");
    else
        cfg.source.center_x = double(cfg.grid.nx - 1) / 2.0;
    if (auto it = kv.find("center_y"); it != kv.end())
        cfg.source.center_y = parse_double(it->second, where + ": key 'center_y'");
    else
        cfg.source.center_y = double(cfg.grid.ny - 1) / 2.0;
    cfg.source.t_on_s = cfg.capture.t_on_s;

    try {
        cfg.grid.n_steps = 0;
        cfg.grid.n_steps = steps_per_frame(cfg.grid, cfg.capture) * (cfg.capture.n_frames - 1);
        cfg.capture.validate();
        cfg.source.validate();
        cfg.optim.validate();
        if (!(std::isfinite(cfg.k_true) && cfg.k_true >= 0))
            throw std::invalid_argument("k_true must be finite and >= 0");
        if (!(std::isfinite(cfg.eps_prime_true) && cfg.eps_prime_true >= 0))
            throw std::invalid_argument("eps_prime_true must be finite and >= 0");
        if (!(std::isfinite(cfg.noise_sigma_K) && cfg.noise_sigma_K >= 0))
            throw std::invalid_argument("noise_sigma_K must be finite and >= 0");
    } catch (const std::invalid_argument& e) {
        throw FormatError(where + ": " + e.what());
    }

    if (defaulted_keys) {
        defaulted_keys->clear();
        for (const std::string& key : run_config_keys())
            if (!kv.count(key)) defaulted_keys->push_back(key);
    }
    return cfg;
}

SolverSetup derive_solver_setup(const TsfStack& measured, double k_max, double depth_m) {
    measured.validate();
    if (!(std::isfinite(k_max) && k_max > 0))
        throw std::invalid_argument("k_max must be finite and > 0");
    if (!(std::isfinite(depth_m) && depth_m > 0))
        throw std::invalid_argument("depth_m must be finite and > 0");

    SolverSetup setup;
    setup.grid = measured.grid;
    setup.grid.dz = setup.grid.dx;
    setup.grid.nz = int(std::clamp(std::llround(depth_m / setup.grid.dz), 8ll, 128ll));

    const double frame_dt = measured.capture.frame_dt_s;
    const double sum = 2.0 / (setup.grid.dx * setup.grid.dx) +
                       2.0 / (setup.grid.dy * setup.grid.dy) +
                       2.0 / (setup.grid.dz * setup.grid.dz);
    int n_sub = std::max(1, int(std::ceil(frame_dt * k_max * sum / 0.95 - 1e-12)));
    for (;;) {
        setup.grid.dt = frame_dt / n_sub;
        if (stability_check(k_max, setup.grid).cfl_factor <= 0.95) break;
        ++n_sub;
    }
    setup.substeps = n_sub;
    setup.grid.n_steps = n_sub * (measured.capture.n_frames - 1);
    return setup;
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    const std::string where = "manifest '" + path.string() + "'";
    std::vector<std::string> lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw FormatError(where + ": empty file");
    if (lines[0] != "bundle_path,label,center_x,center_y")
        throw FormatError(where + ": header must be 'bundle_path,label,center_x,center_y', got '" +
                          lines[0] + "'");
    std::vector<ManifestRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string at_row = where + ": row " + std::to_string(i);
        const std::vector<std::string> fields = split_csv(lines[i]);
        if (fields.size() != 4)
            throw FormatError(at_row + ": expected 4 fields, got " + std::to_string(fields.size()));
        if (fields[0].empty()) throw FormatError(at_row + ": empty bundle_path");
        if (fields[1].empty()) throw FormatError(at_row + ": empty label");
        ManifestRow row;
        fs::path bundle(fields[0]);
        row.bundle_path = bundle.is_absolute() ? bundle : path.parent_path() / bundle;
        row.label = fields[1];
        row.center_x = int(parse_int(fields[2], at_row + ": center_x"));
        row.center_y = int(parse_int(fields[3], at_row + ": center_y"));
        rows.push_back(row);
    }
    if (rows.empty()) throw FormatError(where + ": no data rows");
    return rows;
}

MaterialDataset load_dataset(const fs::path& manifest_path, const DatasetOptions& opts) {
    if (opts.window < 1 || opts.window % 2 == 0)
        throw std::invalid_argument("window size must be odd and >= 1");
    const std::vector<ManifestRow> rows = read_manifest(manifest_path);

    MaterialDataset data;
    const auto intern = [&](const std::string& label) {
        for (std::size_t i = 0; i < data.label_names.size(); ++i)
            if (data.label_names[i] == label) return int(i);
        data.label_names.push_back(label);
        return int(data.label_names.size() - 1);
    };

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ManifestRow& row = rows[i];
        const std::string at_row =
            "manifest '" + manifest_path.string() + "' row " + std::to_string(i + 1) + " ('" +
            row.bundle_path.string() + "')";
        FeatureVector fv;
        try {
            const fs::path k_csv = row.bundle_path / "k.csv";
            const fs::path eps_csv = row.bundle_path / "eps_prime.csv";
            if (fs::exists(k_csv) && fs::exists(eps_csv)) {
                ParamMaps maps;
                maps.k = read_map_csv(k_csv);
                maps.eps_prime = read_map_csv(eps_csv);
                if (!maps.k.same_shape(maps.eps_prime))
                    throw FormatError("k.csv and eps_prime.csv shapes differ");
                fv = extract_features(maps, row.center_x, row.center_y, opts.window);
            } else {
                const TsfStack stack = read_bundle(row.bundle_path);
                if (row.center_x < 0 || row.center_x >= stack.grid.nx || row.center_y < 0 ||
                    row.center_y >= stack.grid.ny)
                    throw FormatError("beam center lies outside the frames");
                if (detect_metal(stack, opts.optim.metal_noise_floor_K)) {
                    fv.values.assign(std::size_t(2) * opts.window * opts.window, 0.0);
                    fv.metal = true;
                } else {
                    SolverSetup setup = derive_solver_setup(stack, opts.k_max, opts.depth_m);
                    SourceModel src;
                    src.amplitude = 1.0;
                    src.center_x = double(row.center_x);
                    src.center_y = double(row.center_y);
                    src.sigma_px = opts.sigma_px;
                    src.t_on_s = stack.capture.t_on_s;
                    OptimConfig oc = opts.optim;
                    oc.k_bounds.max = opts.k_max;
                    const RecoveryResult rec = recover(stack, src, setup.grid, oc);
                    fv = extract_features(rec.params, row.center_x, row.center_y, opts.window);
                    fv.metal = rec.metal_flag;
                }
            }
        } catch (const StabilityError&) {
            throw;
        } catch (const DivergenceError&) {
            throw;
        } catch (const TrainingError&) {
            throw;
        } catch (const std::exception& e) {
            throw FormatError(at_row + ": " + e.what());
        }
        fv.label = intern(row.label);
        data.samples.push_back(std::move(fv));
    }
    return data;
}

}  // namespace tsf
