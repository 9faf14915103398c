// tsf: simulate, invert, and classify thermal spread function stacks.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error,
// 3 numerical error (instability, divergence, failed training/check).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "tsf/baseline2d.hpp"
#include "tsf/classify.hpp"
#include "tsf/domain.hpp"
#include "tsf/errors.hpp"
#include "tsf/forward.hpp"
#include "tsf/inverse.hpp"
#include "tsf/io.hpp"

namespace fs = std::filesystem;
using namespace tsf;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

const char* yesno(bool b) { return b ? "true" : "false"; }

void log_defaulted(const fs::path& config, const std::vector<std::string>& keys) {
    if (keys.empty()) return;
    std::string msg = "note: " + config.string() + ": using defaults for: ";
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i) msg += ", ";
        msg += keys[i];
    }
    std::cerr << msg << "\n";
}

double peak_rise(const TsfStack& stack) {
    double peak = 0.0;
    for (std::size_t t = 1; t < stack.frames.size(); ++t)
        for (std::size_t i = 0; i < stack.frames[t].values.size(); ++i)
            peak = std::max(peak, stack.frames[t].values[i] - stack.frames[0].values[i]);
    return peak;
}

/// Shared flags describing the heating beam for commands that invert a
/// measured bundle (the bundle records the schedule but not the beam shape).
struct BeamFlags {
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma_px = 3.0;
    bool has_center_x = false;
    bool has_center_y = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--center-x", center_x,
                        "Beam center x [px]; default: image center")
            ->check(CLI::Number);
        cmd->add_option("--center-y", center_y,
                        "Beam center y [px]; default: image center")
            ->check(CLI::Number);
        cmd->add_option("--sigma-px", sigma_px, "Beam Gaussian sigma [px]")
            ->capture_default_str();
        // option presence is resolved in resolve(); CLI11 keeps counts
        cx_opt = cmd->get_option("--center-x");
        cy_opt = cmd->get_option("--center-y");
    }

    SourceModel resolve(const TsfStack& stack) {
        has_center_x = cx_opt && cx_opt->count() > 0;
        has_center_y = cy_opt && cy_opt->count() > 0;
        SourceModel src;
        src.amplitude = 1.0;
        src.center_x = has_center_x ? center_x : double(stack.grid.nx - 1) / 2.0;
        src.center_y = has_center_y ? center_y : double(stack.grid.ny - 1) / 2.0;
        src.sigma_px = sigma_px;
        src.t_on_s = stack.capture.t_on_s;
        return src;
    }

private:
    CLI::Option* cx_opt = nullptr;
    CLI::Option* cy_opt = nullptr;
};

void write_loss_history(const std::vector<LossReport>& history, const fs::path& path) {
    std::string text = "epoch,mse\n";
    for (std::size_t e = 0; e < history.size(); ++e)
        text += std::to_string(e) + ',' + fmt(history[e].mse) + '\n';
    write_text_file(path, text);
}

struct RoiStats {
    int pixels = 0;
    double mean_k = 0.0;
    double mean_eps = 0.0;
};

RoiStats roi_stats(const ParamMaps& params, const Map2D& roi) {
    RoiStats s;
    double sk = 0.0, se = 0.0;
    for (std::size_t i = 0; i < roi.values.size(); ++i)
        if (roi.values[i] > 0.0) {
            sk += params.k.values[i];
            se += params.eps_prime.values[i];
            ++s.pixels;
        }
    if (s.pixels > 0) {
        s.mean_k = sk / s.pixels;
        s.mean_eps = se / s.pixels;
    }
    return s;
}

int run_simulate(const fs::path& config, const fs::path& out, double noise_sigma,
                 bool has_noise, std::uint64_t seed, bool has_seed) {
    std::vector<std::string> defaulted;
    RunConfig cfg = load_run_config(config, &defaulted);
    log_defaulted(config, defaulted);
    if (has_noise) cfg.noise_sigma_K = noise_sigma;
    if (has_seed) cfg.seed = seed;

    ParamMaps truth;
    truth.k = Map2D(cfg.grid.nx, cfg.grid.ny, cfg.k_true);
    truth.eps_prime = Map2D(cfg.grid.nx, cfg.grid.ny, cfg.eps_prime_true);

    TsfStack stack = simulate(truth, cfg.source, cfg.capture, cfg.grid);
    add_gaussian_noise(stack, cfg.noise_sigma_K, cfg.seed);
    write_bundle(stack, out);

    const StabilityReport rep = stability_check(truth, cfg.grid);
    std::cout << "wrote " << (out / "meta.txt").string() << " + frames.bin ("
              << cfg.capture.n_frames << " frames of " << cfg.grid.nx << "x" << cfg.grid.ny
              << ")\n"
              << "cfl_factor=" << fmt(rep.cfl_factor, "%.6g")
              << " peak_rise_K=" << fmt(peak_rise(stack), "%.6g")
              << " noise_sigma_K=" << fmt(cfg.noise_sigma_K, "%.6g") << " seed=" << cfg.seed
              << "\n";
    return 0;
}

int run_recover(const fs::path& in, const fs::path& out, BeamFlags& beam, OptimConfig oc,
                double k_max, double depth_m) {
    const TsfStack stack = read_bundle(in);
    const SolverSetup setup = derive_solver_setup(stack, k_max, depth_m);
    const SourceModel src = beam.resolve(stack);
    oc.k_bounds.max = k_max;

    const RecoveryResult res = recover(stack, src, setup.grid, oc);

    fs::create_directories(out);
    write_map_csv(res.params.k, out / "k.csv");
    write_map_pgm(res.params.k, out / "k.pgm", oc.k_bounds.min, oc.k_bounds.max);
    write_map_csv(res.params.eps_prime, out / "eps_prime.csv");
    write_map_pgm(res.params.eps_prime, out / "eps_prime.pgm", oc.eps_bounds.min,
                  oc.eps_bounds.max);
    write_loss_history(res.loss_history, out / "loss_history.csv");

    const RoiStats roi = roi_stats(res.params, res.roi);
    const double final_mse = res.loss_history.empty() ? 0.0 : res.loss_history.back().mse;
    std::string summary;
    summary += std::string("loss_mode=") + to_string(oc.loss_mode) + "\n";
    summary += "epochs_run=" + std::to_string(res.loss_history.size()) + "\n";
    summary += std::string("converged=") + yesno(res.converged) + "\n";
    summary += std::string("metal_flag=") + yesno(res.metal_flag) + "\n";
    summary += "final_mse=" + fmt(final_mse) + "\n";
    summary += "solver_nz=" + std::to_string(setup.grid.nz) + "\n";
    summary += "solver_substeps=" + std::to_string(setup.substeps) + "\n";
    summary += "roi_pixels=" + std::to_string(roi.pixels) + "\n";
    summary += "roi_mean_k_m2s=" + fmt(roi.mean_k) + "\n";
    summary += "roi_mean_eps_prime=" + fmt(roi.mean_eps) + "\n";
    write_text_file(out / "summary.txt", summary);

    std::cout << "roi_mean_k_m2s=" << fmt(roi.mean_k, "%.6g")
              << " roi_mean_eps_prime=" << fmt(roi.mean_eps, "%.6g")
              << " final_mse=" << fmt(final_mse, "%.6g") << " converged=" << yesno(res.converged)
              << " metal_flag=" << yesno(res.metal_flag) << "\n";
    return 0;
}

int run_recover2(const fs::path& in, const fs::path& out, double thickness_m, BeamFlags& beam,
                 OptimConfig oc, double k_max, double depth_m) {
    const TsfStack stack = read_bundle(in);
    const SolverSetup setup = derive_solver_setup(stack, k_max, depth_m);
    const SourceModel src = beam.resolve(stack);
    oc.k_bounds.max = k_max;

    const TwoLayerResult res = recover_two_layer(stack, src, setup.grid, thickness_m, oc);

    fs::create_directories(out);
    write_map_csv(res.model.eps_prime_surface, out / "eps_prime.csv");
    write_map_pgm(res.model.eps_prime_surface, out / "eps_prime.pgm", oc.eps_bounds.min,
                  oc.eps_bounds.max);
    write_loss_history(res.loss_history, out / "loss_history.csv");

    const double final_mse = res.loss_history.empty() ? 0.0 : res.loss_history.back().mse;
    std::string summary;
    summary += std::string("loss_mode=") + to_string(oc.loss_mode) + "\n";
    summary += "epochs_run=" + std::to_string(res.loss_history.size()) + "\n";
    summary += std::string("converged=") + yesno(res.converged) + "\n";
    summary += std::string("metal_flag=") + yesno(res.metal_flag) + "\n";
    summary += "final_mse=" + fmt(final_mse) + "\n";
    summary += "top_thickness_m=" + fmt(res.model.top_thickness_m) + "\n";
    summary += "k_top_m2s=" + fmt(res.model.k_top) + "\n";
    summary += "k_bottom_m2s=" + fmt(res.model.k_bottom) + "\n";
    summary += std::string("k_bottom_constrained=") + yesno(res.k_bottom_constrained) + "\n";
    write_text_file(out / "summary.txt", summary);

    std::cout << "k_top_m2s=" << fmt(res.model.k_top, "%.6g")
              << " k_bottom_m2s=" << fmt(res.model.k_bottom, "%.6g")
              << " k_bottom_constrained=" << yesno(res.k_bottom_constrained)
              << " converged=" << yesno(res.converged) << "\n";
    return 0;
}

int run_baseline2d(const fs::path& in, const fs::path& out, BeamFlags& beam, double k_max) {
    const TsfStack stack = read_bundle(in);
    const SourceModel src = beam.resolve(stack);
    const BaselineFit fit = fit_pixelwise(stack, src);

    fs::create_directories(out);
    write_map_csv(fit.params.k, out / "k.csv");
    write_map_pgm(fit.params.k, out / "k.pgm", 0.0, k_max);
    write_map_csv(fit.params.eps_prime, out / "eps_prime.csv");
    write_map_pgm(fit.params.eps_prime, out / "eps_prime.pgm", 0.0, 10.0);
    write_map_csv(fit.valid, out / "valid.csv");

    int n_valid = 0;
    for (double v : fit.valid.values) n_valid += v > 0.0 ? 1 : 0;
    const int cx = stack.grid.nx / 2, cy = stack.grid.ny / 2;
    std::string summary;
    summary += "n_pixels=" + std::to_string(fit.valid.values.size()) + "\n";
    summary += "n_valid=" + std::to_string(n_valid) + "\n";
    summary += "k_center_m2s=" + fmt(fit.params.k.at(cx, cy)) + "\n";
    summary += "eps_prime_center=" + fmt(fit.params.eps_prime.at(cx, cy)) + "\n";
    write_text_file(out / "summary.txt", summary);

    std::cout << "n_valid=" << n_valid << "/" << fit.valid.values.size()
              << " k_center_m2s=" << fmt(fit.params.k.at(cx, cy), "%.6g") << "\n";
    return 0;
}

int run_gradcheck(const fs::path& config, int probes, double rel_tol) {
    std::vector<std::string> defaulted;
    RunConfig cfg = load_run_config(config, &defaulted);
    log_defaulted(config, defaulted);

    ParamMaps truth;
    truth.k = Map2D(cfg.grid.nx, cfg.grid.ny, cfg.k_true);
    truth.eps_prime = Map2D(cfg.grid.nx, cfg.grid.ny, cfg.eps_prime_true);
    TsfStack measured = simulate(truth, cfg.source, cfg.capture, cfg.grid);
    add_gaussian_noise(measured, cfg.noise_sigma_K, cfg.seed);

    // Probe away from the loss minimum so the gradients are non-trivial.
    ParamMaps probe;
    probe.k = Map2D(cfg.grid.nx, cfg.grid.ny,
                    0.5 * (cfg.optim.k_bounds.min + cfg.optim.k_bounds.max));
    probe.eps_prime = Map2D(cfg.grid.nx, cfg.grid.ny,
                            0.5 * (cfg.optim.eps_bounds.min + cfg.optim.eps_bounds.max));

    AdjointConfig acfg;
    acfg.mode = cfg.optim.loss_mode;
    const GradCheckReport rep = gradient_check(probe, cfg.source, cfg.capture, cfg.grid,
                                               measured, probes, rel_tol, cfg.seed, acfg);
    std::cout << "probes=" << rep.n_probes << " max_rel_err=" << fmt(rep.max_rel_err, "%.6g")
              << " rel_tol=" << fmt(rel_tol, "%.6g") << " passed=" << yesno(rep.passed) << "\n";
    if (!rep.passed) {
        std::cerr << "error: adjoint gradients disagree with finite differences (max_rel_err="
                  << fmt(rep.max_rel_err, "%.6g") << " > " << fmt(rel_tol, "%.6g") << ")\n";
        return 3;
    }
    return 0;
}

int run_classify(const fs::path& manifest, const fs::path& out, int window,
                 const std::string& model, bool loo, std::uint64_t seed, double sigma_px,
                 double k_max, int epochs) {
    DatasetOptions dopts;
    dopts.window = window;
    dopts.sigma_px = sigma_px;
    dopts.k_max = k_max;
    dopts.optim.epochs = epochs;
    const MaterialDataset data = load_dataset(manifest, dopts);

    MlpOptions mopts;
    mopts.seed = seed;
    const ClassifierKind kind =
        model == "centroid" ? ClassifierKind::centroid : ClassifierKind::mlp;

    ConfusionMatrix cm;
    if (loo) {
        cm = loo_cv(data, kind, mopts);
    } else {
        // Evaluate on the training set itself (no held-out folds).
        cm.labels = data.label_names;
        int metal_id = -1;
        for (std::size_t i = 0; i < cm.labels.size(); ++i)
            if (cm.labels[i] == kMetalLabel) metal_id = int(i);
        bool any_metal = false;
        for (const FeatureVector& fv : data.samples) any_metal = any_metal || fv.metal;
        if (any_metal && metal_id < 0) {
            metal_id = int(cm.labels.size());
            cm.labels.push_back(kMetalLabel);
        }
        cm.counts.assign(cm.labels.size(), std::vector<int>(cm.labels.size(), 0));
        if (kind == ClassifierKind::centroid) {
            const CentroidModel m = train_centroid(data);
            for (const FeatureVector& fv : data.samples)
                cm.counts[fv.label][predict_routed(m, fv, metal_id)] += 1;
        } else {
            const MlpModel m = train_mlp(data, mopts);
            for (const FeatureVector& fv : data.samples)
                cm.counts[fv.label][predict_routed(m, fv, metal_id)] += 1;
        }
    }

    fs::create_directories(out);
    write_confusion_csv(cm, out / "confusion.csv");
    std::string summary;
    summary += "model=" + model + "\n";
    summary += "window=" + std::to_string(window) + "\n";
    summary += std::string("loo=") + yesno(loo) + "\n";
    summary += "samples=" + std::to_string(cm.total()) + "\n";
    summary += "accuracy=" + fmt(cm.accuracy()) + "\n";
    write_text_file(out / "summary.txt", summary);

    std::cout << "samples=" << cm.total() << " accuracy=" << fmt(cm.accuracy(), "%.6g") << "\n";
    return 0;
}

int run_info(const fs::path& in, double k_max, double depth_m) {
    const TsfStack stack = read_bundle(in);
    const SolverSetup setup = derive_solver_setup(stack, k_max, depth_m);
    const StabilityReport rep = stability_check(k_max, setup.grid);

    std::cout << "nx=" << stack.grid.nx << "\n"
              << "ny=" << stack.grid.ny << "\n"
              << "nt=" << stack.capture.n_frames << "\n"
              << "dt_s=" << fmt(stack.capture.frame_dt_s) << "\n"
              << "dx_m=" << fmt(stack.grid.dx) << "\n"
              << "t_on_s=" << fmt(stack.capture.t_on_s) << "\n"
              << "ambient_K=" << fmt(stack.capture.ambient_K) << "\n"
              << "temp_mode=" << to_string(stack.temp_mode) << "\n"
              << "peak_rise_K=" << fmt(peak_rise(stack), "%.6g") << "\n"
              << "solver_nz=" << setup.grid.nz << "\n"
              << "solver_substeps=" << setup.substeps << "\n"
              << "solver_dt_s=" << fmt(setup.grid.dt) << "\n"
              << "k_max_m2s=" << fmt(k_max) << "\n"
              << "cfl_factor=" << fmt(rep.cfl_factor) << "\n"
              << "stable=" << yesno(rep.stable) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermal spread function toolkit: forward simulation, "
                 "gradient-based property recovery, and material classification"};
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "Simulate a stack from a config and write a bundle");
    fs::path sim_config, sim_out;
    double sim_noise = 0.05;
    std::uint64_t sim_seed = 1;
    sim->add_option("--config", sim_config, "Run config file")->required();
    sim->add_option("--out", sim_out, "Output bundle directory")->required();
    auto* sim_noise_opt = sim->add_option("--noise-sigma", sim_noise,
                                          "Override config noise sigma [K]");
    auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Override config seed");

    // ---- recover ----
    auto* rec = app.add_subcommand("recover", "Recover per-pixel k and eps_prime from a bundle");
    fs::path rec_in, rec_out;
    BeamFlags rec_beam;
    OptimConfig rec_oc;
    double rec_kmax = 1.5e-7, rec_depth = 0.03;
    rec->add_option("--in", rec_in, "Input bundle directory")->required();
    rec->add_option("--out", rec_out, "Output directory")->required();
    rec->add_option("--epochs", rec_oc.epochs, "Adam epochs")->capture_default_str();
    rec->add_option("--lr0", rec_oc.lr0, "Initial learning rate")->capture_default_str();
    rec->add_option("--lr-decay", rec_oc.lr_decay, "Learning-rate decay factor")
        ->capture_default_str();
    rec->add_option("--decay-every", rec_oc.decay_every, "Epochs between decays")
        ->capture_default_str();
    rec->add_option("--eps-max", rec_oc.eps_bounds.max, "Upper bound for eps_prime")
        ->capture_default_str();
    rec->add_option("--roi-radius", rec_oc.roi_radius_px,
                    "ROI disk radius [px]; negative derives the ROI from the data")
        ->capture_default_str();
    rec->add_option("--k-max", rec_kmax, "Upper bound for k [m^2/s]")->capture_default_str();
    rec->add_option("--depth-m", rec_depth, "Solver depth [m]")->capture_default_str();
    rec->add_option("--loss-mode", rec_oc.loss_mode, "Loss weighting")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, LossMode>{{"kelvin", LossMode::kelvin},
                                            {"normalized", LossMode::normalized}}))
        ->default_str("normalized");
    rec_beam.add_to(rec);

    // ---- recover2 ----
    auto* rec2 = app.add_subcommand("recover2", "Recover a two-layer model from a bundle");
    fs::path rec2_in, rec2_out;
    BeamFlags rec2_beam;
    OptimConfig rec2_oc;
    double rec2_thickness = 0.0, rec2_kmax = 1.5e-7, rec2_depth = 0.03;
    rec2->add_option("--in", rec2_in, "Input bundle directory")->required();
    rec2->add_option("--out", rec2_out, "Output directory")->required();
    rec2->add_option("--thickness-m", rec2_thickness, "Known top-layer thickness [m]")
        ->required();
    rec2->add_option("--epochs", rec2_oc.epochs, "Adam epochs")->capture_default_str();
    rec2->add_option("--lr0", rec2_oc.lr0, "Initial learning rate")->capture_default_str();
    rec2->add_option("--lr-decay", rec2_oc.lr_decay, "Learning-rate decay factor")
        ->capture_default_str();
    rec2->add_option("--decay-every", rec2_oc.decay_every, "Epochs between decays")
        ->capture_default_str();
    rec2->add_option("--eps-max", rec2_oc.eps_bounds.max, "Upper bound for eps_prime")
        ->capture_default_str();
    rec2->add_option("--k-max", rec2_kmax, "Upper bound for k [m^2/s]")->capture_default_str();
    rec2->add_option("--depth-m", rec2_depth, "Solver depth [m]")->capture_default_str();
    rec2_beam.add_to(rec2);

    // ---- baseline2d ----
    auto* base = app.add_subcommand("baseline2d",
                                    "Per-pixel 2D least-squares fit (comparison method)");
    fs::path base_in, base_out;
    BeamFlags base_beam;
    double base_kmax = 1.5e-7;
    base->add_option("--in", base_in, "Input bundle directory")->required();
    base->add_option("--out", base_out, "Output directory")->required();
    base->add_option("--k-max", base_kmax, "PGM scale ceiling for k [m^2/s]")
        ->capture_default_str();
    base_beam.add_to(base);

    // ---- gradcheck ----
    auto* gc = app.add_subcommand("gradcheck",
                                  "Verify adjoint gradients against finite differences");
    fs::path gc_config;
    int gc_probes = 32;
    double gc_tol = 1e-4;
    gc->add_option("--config", gc_config, "Run config file")->required();
    gc->add_option("--probes", gc_probes, "Probe count")->capture_default_str();
    gc->add_option("--rel-tol", gc_tol, "Relative tolerance")->capture_default_str();

    // ---- classify ----
    auto* cls = app.add_subcommand("classify", "Train/evaluate material classifiers");
    fs::path cls_manifest, cls_out;
    int cls_window = 3, cls_epochs = 400;
    std::string cls_model = "centroid";
    bool cls_loo = false;
    std::uint64_t cls_seed = 1;
    double cls_sigma = 3.0, cls_kmax = 1.5e-7;
    cls->add_option("--manifest", cls_manifest, "Dataset manifest CSV")->required();
    cls->add_option("--out", cls_out, "Output directory")->required();
    cls->add_option("--window", cls_window, "Feature window width")
        ->check(CLI::IsMember({1, 3, 5}))
        ->capture_default_str();
    cls->add_option("--model", cls_model, "Classifier")
        ->check(CLI::IsMember({"centroid", "mlp"}))
        ->capture_default_str();
    cls->add_flag("--loo", cls_loo, "Leave-one-out cross-validation");
    cls->add_option("--seed", cls_seed, "MLP init seed")->capture_default_str();
    cls->add_option("--sigma-px", cls_sigma, "Beam sigma for recovery runs [px]")
        ->capture_default_str();
    cls->add_option("--k-max", cls_kmax, "Upper bound for k in recovery runs [m^2/s]")
        ->capture_default_str();
    cls->add_option("--epochs", cls_epochs, "Adam epochs for recovery runs")
        ->capture_default_str();

    // ---- info ----
    auto* inf = app.add_subcommand("info", "Print bundle metadata and solver stability");
    fs::path inf_in;
    double inf_kmax = 1.5e-7, inf_depth = 0.03;
    inf->add_option("--in", inf_in, "Input bundle directory")->required();
    inf->add_option("--k-max", inf_kmax, "Diffusivity ceiling to check [m^2/s]")
        ->capture_default_str();
    inf->add_option("--depth-m", inf_depth, "Solver depth [m]")->capture_default_str();

    int rc = 0;
    try {
        app.parse(argc, argv);
        if (sim->parsed())
            rc = run_simulate(sim_config, sim_out, sim_noise, sim_noise_opt->count() > 0,
                              sim_seed, sim_seed_opt->count() > 0);
        else if (rec->parsed())
            rc = run_recover(rec_in, rec_out, rec_beam, rec_oc, rec_kmax, rec_depth);
        else if (rec2->parsed())
            rc = run_recover2(rec2_in, rec2_out, rec2_thickness, rec2_beam, rec2_oc, rec2_kmax,
                              rec2_depth);
        else if (base->parsed())
            rc = run_baseline2d(base_in, base_out, base_beam, base_kmax);
        else if (gc->parsed())
            rc = run_gradcheck(gc_config, gc_probes, gc_tol);
        else if (cls->parsed())
            rc = run_classify(cls_manifest, cls_out, cls_window, cls_model, cls_loo, cls_seed,
                              cls_sigma, cls_kmax, cls_epochs);
        else if (inf->parsed())
            rc = run_info(inf_in, inf_kmax, inf_depth);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const StabilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
