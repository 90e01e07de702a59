// foredif: dataset generation, training, evaluation, the one-step
// predictive-ability probe and ablation sweeps for the two-stream
// rectified-flow forecaster.
//
// Exit codes: 0 ok, 2 bad configuration, 3 I/O failure, 4 training
// divergence, 5 checkpoint incompatibility.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "foredif/checkpoint.hpp"
#include "foredif/common.hpp"
#include "foredif/dataset.hpp"
#include "foredif/digest.hpp"
#include "foredif/kvconfig.hpp"
#include "foredif/metrics.hpp"
#include "foredif/rng.hpp"
#include "foredif/trainer.hpp"

using namespace foredif;
using nlohmann::json;

namespace {

using KvMap = std::map<std::string, std::string>;

/// Config file merged with command-line flags; flags win.
class Settings {
public:
    Settings(const std::string& config_path, const std::set<std::string>& allowed,
             const CLI::App* cmd)
        : cmd_(cmd) {
        if (!config_path.empty()) {
            kv_ = parse_kv_file(config_path);
            reject_unknown_keys(kv_, allowed, config_path);
        }
    }

    /// Returns the flag value when the flag was given, else the config
    /// value, else the built-in default already stored in `flag_value`.
    template <typename T>
    T pick(const std::string& flag, const std::string& key, T flag_value) const {
        const CLI::Option* opt = cmd_->get_option_no_throw(flag);
        if (opt != nullptr && opt->count() > 0) return flag_value;
        auto it = kv_.find(key);
        if (it == kv_.end()) return flag_value;
        return parse_value<T>(it->second, key);
    }

    std::string canonical_text() const {
        std::ostringstream os;
        for (const auto& [k, v] : kv_) os << k << "=" << v << "\n";
        return os.str();
    }

private:
    template <typename T>
    static T parse_value(const std::string& text, const std::string& key) {
        std::istringstream is(text);
        T value{};
        is >> value;
        FD_CHECK_T(ConfigError, !is.fail(), "config key '", key, "': cannot parse '", text,
                   "'");
        return value;
    }

    KvMap kv_;
    const CLI::App* cmd_;
};

template <>
std::string Settings::parse_value<std::string>(const std::string& text, const std::string&) {
    return text;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::vector<spectral::Forcing> parse_forcing_list(const std::string& text) {
    std::vector<spectral::Forcing> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        if (!item.empty() && (item[0] == 'F' || item[0] == 'f')) item = item.substr(1);
        out.push_back(spectral::forcing_from_index(std::stoi(item)));
    }
    return out;
}

struct ManifestWriter {
    json doc;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit ManifestWriter(const std::string& command, uint64_t seed) {
        doc["command"] = command;
        doc["seed"] = seed;
        doc["inputs"] = json::object();
        doc["outputs"] = json::object();
    }

    void config_text(const std::string& text) { doc["config_sha256"] = sha256_hex(text.data(), text.size()); }
    void input(const std::string& path) {
        if (!path.empty()) doc["inputs"][path] = sha256_file(path);
    }
    void output(const std::string& path) {
        if (!path.empty() && std::filesystem::exists(path)) {
            doc["outputs"][path] = sha256_file(path);
        }
    }
    void write(const std::string& next_to) {
        doc["wall_ms"] = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        std::ofstream out(next_to + ".manifest.json");
        FD_CHECK_T(IoError, out.good(), "cannot write manifest next to ", next_to);
        out << doc.dump(2) << "\n";
    }
};

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
    std::string config, out = "heterns.hns", viscosities, forcings;
    uint64_t seed = 0;
    int n = 32, per_config = 100, frames = 20;
    double dt = 1e-3, frame_interval = 1.0;
};

int cmd_gen_data(const GenDataArgs& args, const CLI::App* cmd) {
    static const std::set<std::string> keys = {"out",        "seed",  "n",
                                               "per_config", "frames", "dt",
                                               "frame_interval", "viscosities", "forcings"};
    Settings s(args.config, keys, cmd);

    GenerateConfig cfg;
    cfg.seed = s.pick("--seed", "seed", args.seed);
    cfg.per_config = s.pick("--per-config", "per_config", args.per_config);
    cfg.sim.n = s.pick("--n", "n", args.n);
    cfg.sim.frames = s.pick("--frames", "frames", args.frames);
    cfg.sim.dt = s.pick("--dt", "dt", args.dt);
    cfg.sim.frame_interval = s.pick("--frame-interval", "frame_interval", args.frame_interval);
    std::string vis = s.pick<std::string>("--viscosities", "viscosities", args.viscosities);
    if (!vis.empty()) cfg.viscosities = parse_double_list(vis);
    std::string frc = s.pick<std::string>("--forcings", "forcings", args.forcings);
    if (!frc.empty()) cfg.variants = parse_forcing_list(frc);
    std::string out = s.pick<std::string>("--out", "out", args.out);

    ManifestWriter manifest("gen-data", cfg.seed);
    manifest.config_text(s.canonical_text());

    std::cerr << "generating " << cfg.viscosities.size() * cfg.variants.size() << " configs x "
              << cfg.per_config << " trajectories at n=" << cfg.sim.n << " dt=" << cfg.sim.dt
              << "\n";
    uint64_t crc = generate_dataset(cfg, out);
    Dataset header = load_dataset_header(out);

    std::cout << "dataset=" << out << " trajectories=" << header.trajectories.size()
              << " frames=" << header.frames << " n=" << header.n << " crc64=" << std::hex
              << crc << std::dec << "\n";

    manifest.output(out);
    manifest.output(out + ".meta");
    manifest.write(out);
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string config, variant = "vanilla", data, out = "model.fdck", stage1_ckpt, loss_csv;
    int steps = 50000, batch = 16, eval_every = 500;
    double lr = 1e-4, weight_decay = 0.0, test_fraction = 0.1;
    uint64_t seed = 0;
    int vit_blocks = 6, dit_blocks = 12, hidden = 384, heads = 6, patch = 4, grid = 32;
    int frames_obs = 10, frames_pred = 10;
    double mlp_ratio = 4.0;
};

TrainConfig make_train_config(const TrainArgs& args, const Settings& s) {
    TrainConfig cfg;
    cfg.variant = variant_from_name(s.pick<std::string>("--variant", "variant", args.variant));
    cfg.steps = s.pick("--steps", "steps", args.steps);
    cfg.batch = s.pick("--batch", "batch", args.batch);
    cfg.lr = static_cast<float>(s.pick("--lr", "lr", args.lr));
    cfg.weight_decay = static_cast<float>(s.pick("--weight-decay", "weight_decay", args.weight_decay));
    cfg.seed = s.pick("--seed", "seed", args.seed);
    cfg.eval_every = s.pick("--eval-every", "eval_every", args.eval_every);
    cfg.test_fraction = static_cast<float>(s.pick("--test-fraction", "test_fraction", args.test_fraction));
    cfg.stage1_checkpoint = s.pick<std::string>("--stage1-ckpt", "stage1_ckpt", args.stage1_ckpt);

    cfg.arch.vit_blocks = s.pick("--vit-blocks", "vit_blocks", args.vit_blocks);
    cfg.arch.dit_blocks = s.pick("--dit-blocks", "dit_blocks", args.dit_blocks);
    cfg.arch.hidden = s.pick("--hidden", "hidden", args.hidden);
    cfg.arch.heads = s.pick("--heads", "heads", args.heads);
    cfg.arch.patch = s.pick("--patch", "patch", args.patch);
    cfg.arch.grid = s.pick("--grid", "grid", args.grid);
    cfg.arch.frames_obs = s.pick("--frames-obs", "frames_obs", args.frames_obs);
    cfg.arch.frames_pred = s.pick("--frames-pred", "frames_pred", args.frames_pred);
    cfg.arch.mlp_ratio = static_cast<float>(s.pick("--mlp-ratio", "mlp_ratio", args.mlp_ratio));
    if (cfg.variant == Variant::Vanilla || cfg.variant == Variant::VanillaExtended) {
        cfg.arch.vit_blocks = 0;
    }
    return cfg;
}

const std::set<std::string> kTrainKeys = {
    "variant",   "data",        "out",        "stage1_ckpt", "loss_csv",    "steps",
    "batch",     "eval_every",  "lr",         "weight_decay", "test_fraction", "seed",
    "vit_blocks", "dit_blocks", "hidden",     "heads",       "patch",       "grid",
    "frames_obs", "frames_pred", "mlp_ratio"};

int cmd_train(const TrainArgs& args, const CLI::App* cmd) {
    Settings s(args.config, kTrainKeys, cmd);
    TrainConfig cfg = make_train_config(args, s);
    std::string data = s.pick<std::string>("--data", "data", args.data);
    std::string out = s.pick<std::string>("--out", "out", args.out);
    std::string loss_csv = s.pick<std::string>("--loss-csv", "loss_csv", args.loss_csv);
    FD_CHECK_T(ConfigError, !data.empty(), "train needs --data");
    if (cfg.variant == Variant::ForeDiffStage2 ||
        cfg.variant == Variant::ForeDiffPredHeadAblation) {
        FD_CHECK_T(ConfigError, !cfg.stage1_checkpoint.empty(), variant_name(cfg.variant),
                   " requires --stage1-ckpt");
    }
    if (loss_csv.empty()) loss_csv = out + ".loss.csv";

    ManifestWriter manifest("train", cfg.seed);
    manifest.config_text(s.canonical_text());
    manifest.input(data);
    manifest.input(cfg.stage1_checkpoint);
    manifest.doc["variant"] = variant_name(cfg.variant);
    manifest.doc["steps"] = cfg.steps;
    manifest.doc["vit_blocks"] =
        cfg.variant == Variant::VanillaExtended ? 0 : cfg.arch.vit_blocks;
    manifest.doc["dit_blocks"] =
        cfg.variant == Variant::VanillaExtended ? 18 : cfg.arch.dit_blocks;

    Dataset dataset = load_dataset(data);
    std::cerr << "training " << variant_name(cfg.variant) << " for " << cfg.steps
              << " steps on " << dataset.trajectories.size() << " trajectories\n";

    std::ofstream csv(loss_csv);
    FD_CHECK_T(IoError, csv.good(), "cannot open loss log: ", loss_csv);
    csv << "step,wall_ms,variant,stage,loss\n";
    int stage = (cfg.variant == Variant::ForeDiffStage2 ||
                 cfg.variant == Variant::ForeDiffPredHeadAblation)
                    ? 2
                    : 1;
    const std::string vname = variant_name(cfg.variant);
    auto on_step = [&](const StepRecord& rec) {
        csv << rec.step << "," << rec.wall_ms << "," << vname << "," << stage << ","
            << rec.loss << "\n";
        if (cfg.eval_every > 0 && (rec.step + 1) % cfg.eval_every == 0) {
            std::cerr << "step " << rec.step + 1 << "/" << cfg.steps << " loss " << rec.loss
                      << "\n";
        }
    };

    TrainResult result = train(cfg, dataset, on_step);
    save_checkpoint(out, result.model);
    manifest.output(out);
    manifest.output(loss_csv);
    manifest.write(out);

    if (result.diverged) {
        std::cerr << "training diverged at step " << result.log.back().step
                  << "; wrote the last good snapshot to " << out << "\n";
        return 4;
    }
    std::cout << "checkpoint=" << out << " final_loss=" << result.log.back().loss << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string config, ckpt, data, out = "report.csv";
    int samples = 8, steps = 50;
    uint64_t seed = 0;
    double test_fraction = 0.1;
};

int cmd_eval(const EvalArgs& args, const CLI::App* cmd) {
    static const std::set<std::string> keys = {"ckpt", "data", "out",         "samples",
                                               "steps", "seed", "test_fraction"};
    Settings s(args.config, keys, cmd);
    std::string ckpt = s.pick<std::string>("--ckpt", "ckpt", args.ckpt);
    std::string data = s.pick<std::string>("--data", "data", args.data);
    std::string out = s.pick<std::string>("--out", "out", args.out);
    metrics::EvalConfig ecfg;
    ecfg.samples = s.pick("--samples", "samples", args.samples);
    ecfg.euler_steps = s.pick("--steps", "steps", args.steps);
    ecfg.seed = s.pick("--seed", "seed", args.seed);
    double test_fraction = s.pick("--test-fraction", "test_fraction", args.test_fraction);
    FD_CHECK_T(ConfigError, !ckpt.empty() && !data.empty(), "eval needs --ckpt and --data");

    ManifestWriter manifest("eval", ecfg.seed);
    manifest.config_text(s.canonical_text());
    manifest.input(ckpt);
    manifest.input(data);

    ModelBundle model = load_checkpoint(ckpt);
    Dataset dataset = load_dataset(data);
    auto [train_idx, test_idx] = split_dataset(dataset, static_cast<float>(test_fraction));
    FD_CHECK_T(ConfigError, !test_idx.empty(),
               "the held-out split is empty; raise --test-fraction");

    std::cerr << "evaluating " << variant_name(model.variant) << " on " << test_idx.size()
              << " held-out conditions, N=" << ecfg.samples << " K=" << ecfg.euler_steps
              << "\n";
    metrics::MetricReport report = metrics::evaluate_run(model, dataset, test_idx, ecfg);
    metrics::write_report_csv(report, out, sha256_file(ckpt));

    // aggregate table, metrics scaled by 100 for display
    std::cout << "variant,l2_x100,rel_l2_x100,std_l2_x100,std_rel_l2_x100,psnr_db,"
                 "ssim_x100,std_psnr_db,std_ssim_x100\n";
    std::cout << variant_name(model.variant) << "," << 100.0 * report.mean.l2 << ","
              << 100.0 * report.mean.rel_l2 << "," << 100.0 * report.std.l2 << ","
              << 100.0 * report.std.rel_l2 << "," << report.mean.psnr << ","
              << 100.0 * report.mean.ssim << "," << report.std.psnr << ","
              << 100.0 * report.std.ssim << "\n";

    manifest.output(out);
    manifest.write(out);
    return 0;
}

// ---------------------------------------------------------------------------
// lemma-check

struct LemmaArgs {
    std::string config, diff_ckpt, det_ckpt, data;
    int trials = 8;
    uint64_t seed = 0;
    double test_fraction = 0.1;
};

int cmd_lemma_check(const LemmaArgs& args, const CLI::App* cmd) {
    static const std::set<std::string> keys = {"diff_ckpt", "det_ckpt", "data",
                                               "trials",    "seed",     "test_fraction"};
    Settings s(args.config, keys, cmd);
    std::string diff_ckpt = s.pick<std::string>("--diff-ckpt", "diff_ckpt", args.diff_ckpt);
    std::string det_ckpt = s.pick<std::string>("--det-ckpt", "det_ckpt", args.det_ckpt);
    std::string data = s.pick<std::string>("--data", "data", args.data);
    int trials = s.pick("--trials", "trials", args.trials);
    uint64_t seed = s.pick("--seed", "seed", args.seed);
    double test_fraction = s.pick("--test-fraction", "test_fraction", args.test_fraction);
    FD_CHECK_T(ConfigError, !diff_ckpt.empty() && !det_ckpt.empty() && !data.empty(),
               "lemma-check needs --diff-ckpt, --det-ckpt and --data");

    ManifestWriter manifest("lemma-check", seed);
    manifest.config_text(s.canonical_text());
    manifest.input(diff_ckpt);
    manifest.input(det_ckpt);
    manifest.input(data);

    ModelBundle diffusion = load_checkpoint(diff_ckpt);
    ModelBundle deterministic = load_checkpoint(det_ckpt);
    Dataset dataset = load_dataset(data);
    auto [train_idx, test_idx] = split_dataset(dataset, static_cast<float>(test_fraction));
    FD_CHECK_T(ConfigError, !test_idx.empty(),
               "the held-out split is empty; raise --test-fraction");

    metrics::LemmaReport rep =
        metrics::lemma_check(diffusion, deterministic, dataset, test_idx, trials, seed);
    std::cout << "single_step_mse=" << rep.single_step_mse
              << " deterministic_mse=" << rep.deterministic_mse << " ratio=" << rep.ratio
              << " trials=" << rep.trials << " conditions=" << rep.conditions << "\n";

    manifest.doc["single_step_mse"] = rep.single_step_mse;
    manifest.doc["deterministic_mse"] = rep.deterministic_mse;
    manifest.doc["ratio"] = rep.ratio;
    manifest.write(diff_ckpt + ".lemma");
    return 0;  // a measurement, not a gate
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
    std::string config, sweep, data, out = "ablation";
    TrainArgs train;  // shared training knobs
    int samples = 8, eval_steps = 25;
    double stage1_fraction = 0.4;
};

struct SweepRow {
    std::string label;
    int64_t params = 0;
    metrics::MetricReport report;
};

SweepRow run_variant_pipeline(const std::string& label, Variant variant, TrainConfig cfg,
                              const Dataset& dataset, const std::vector<int>& test_idx,
                              const std::string& out_dir, int samples, int eval_steps,
                              double stage1_fraction) {
    namespace fs = std::filesystem;
    cfg.variant = variant;
    ModelBundle final_model;

    const bool two_stage =
        variant == Variant::ForeDiffStage2 || variant == Variant::ForeDiffPredHeadAblation;
    if (two_stage) {
        std::string stage1_path = (fs::path(out_dir) / "stage1.fdck").string();
        if (!fs::exists(stage1_path)) {
            TrainConfig s1 = cfg;
            s1.variant = Variant::ForeDiffStage1;
            s1.steps = std::max(1, static_cast<int>(std::lround(cfg.steps * stage1_fraction)));
            std::cerr << "[" << label << "] stage 1: " << s1.steps << " steps\n";
            TrainResult r1 = train(s1, dataset);
            FD_CHECK_T(DivergenceError, !r1.diverged, "stage-1 training diverged");
            save_checkpoint(stage1_path, r1.model);
        }
        cfg.stage1_checkpoint = stage1_path;
        cfg.steps = std::max(1, cfg.steps - static_cast<int>(std::lround(cfg.steps * stage1_fraction)));
    }
    std::cerr << "[" << label << "] training " << variant_name(variant) << ": " << cfg.steps
              << " steps\n";
    TrainResult result = train(cfg, dataset);
    FD_CHECK_T(DivergenceError, !result.diverged, "training diverged for ", label);
    final_model = std::move(result.model);

    std::string ckpt_path = (fs::path(out_dir) / (label + ".fdck")).string();
    save_checkpoint(ckpt_path, final_model);

    metrics::EvalConfig ecfg;
    ecfg.samples = samples;
    ecfg.euler_steps = eval_steps;
    ecfg.seed = cfg.seed;
    SweepRow row;
    row.label = label;
    row.params = final_model.parameter_count();
    row.report = metrics::evaluate_run(final_model, dataset, test_idx, ecfg);
    return row;
}

int cmd_ablate(const AblateArgs& args, const CLI::App* cmd) {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k = kTrainKeys;
        k.insert("sweep");
        k.insert("samples");
        k.insert("eval_steps");
        k.insert("stage1_fraction");
        return k;
    }();
    Settings s(args.config, keys, cmd);
    TrainConfig base = make_train_config(args.train, s);
    std::string sweep = s.pick<std::string>("--sweep", "sweep", args.sweep);
    std::string data = s.pick<std::string>("--data", "data", args.train.data);
    std::string out_dir = s.pick<std::string>("--out", "out", args.out);
    int samples = s.pick("--samples", "samples", args.samples);
    int eval_steps = s.pick("--eval-steps", "eval_steps", args.eval_steps);
    double stage1_fraction = s.pick("--stage1-fraction", "stage1_fraction", args.stage1_fraction);
    FD_CHECK_T(ConfigError, !data.empty(), "ablate needs --data");
    FD_CHECK_T(ConfigError,
               sweep == "vit_blocks" || sweep == "predhead" || sweep == "scaling",
               "unknown sweep '", sweep, "' (expected vit_blocks, predhead or scaling)");

    std::filesystem::create_directories(out_dir);
    Dataset dataset = load_dataset(data);
    auto [train_idx, test_idx] = split_dataset(dataset, base.test_fraction);
    FD_CHECK_T(ConfigError, !test_idx.empty(), "held-out split is empty");

    ManifestWriter manifest("ablate", base.seed);
    manifest.config_text(s.canonical_text());
    manifest.input(data);
    manifest.doc["sweep"] = sweep;

    std::vector<SweepRow> rows;
    auto run = [&](const std::string& label, Variant v, TrainConfig cfg) {
        rows.push_back(run_variant_pipeline(label, v, cfg, dataset, test_idx, out_dir,
                                            samples, eval_steps, stage1_fraction));
    };

    if (sweep == "vit_blocks") {
        for (int m : {0, 3, 6, 9, 12}) {
            TrainConfig cfg = base;
            cfg.arch.vit_blocks = m;
            std::string fresh = (std::filesystem::path(out_dir) / "stage1.fdck").string();
            std::filesystem::remove(fresh);  // every M needs its own stage 1
            if (m == 0) {
                run("M0_vanilla", Variant::Vanilla, cfg);
            } else {
                run("M" + std::to_string(m), Variant::ForeDiffStage2, cfg);
            }
        }
    } else if (sweep == "predhead") {
        run("foredif", Variant::ForeDiffStage2, base);
        run("foredif_predhead", Variant::ForeDiffPredHeadAblation, base);
    } else {  // scaling
        TrainConfig vanilla = base;
        vanilla.arch.vit_blocks = 0;
        run("vanilla", Variant::Vanilla, vanilla);

        TrainConfig det = base;
        det.variant = Variant::ForeDiffStage1;
        std::cerr << "[deterministic] training foredif_stage1: " << det.steps << " steps\n";
        TrainResult det_result = train(det, dataset);
        FD_CHECK_T(DivergenceError, !det_result.diverged, "deterministic training diverged");
        std::string det_path = (std::filesystem::path(out_dir) / "deterministic.fdck").string();
        save_checkpoint(det_path, det_result.model);
        metrics::EvalConfig ecfg;
        ecfg.samples = samples;
        ecfg.euler_steps = eval_steps;
        ecfg.seed = base.seed;
        SweepRow det_row;
        det_row.label = "deterministic";
        det_row.params = det_result.model.parameter_count();
        det_row.report = metrics::evaluate_run(det_result.model, dataset, test_idx, ecfg);
        rows.push_back(det_row);

        run("foredif_zero", Variant::ForeDiffZero, base);
        run("foredif", Variant::ForeDiffStage2, base);
        run("vanilla_extended", Variant::VanillaExtended, vanilla);
    }

    std::string summary = (std::filesystem::path(out_dir) / "summary.csv").string();
    std::ofstream out(summary);
    FD_CHECK_T(IoError, out.good(), "cannot write ", summary);
    out << "variant,params,l2_x100,rel_l2_x100,std_l2_x100,std_rel_l2_x100,psnr_db,ssim_x100\n";
    std::cout << "variant,params,l2_x100,rel_l2_x100,std_l2_x100,std_rel_l2_x100,psnr_db,ssim_x100\n";
    for (const auto& row : rows) {
        std::ostringstream line;
        line << row.label << "," << row.params << "," << 100.0 * row.report.mean.l2 << ","
             << 100.0 * row.report.mean.rel_l2 << "," << 100.0 * row.report.std.l2 << ","
             << 100.0 * row.report.std.rel_l2 << "," << row.report.mean.psnr << ","
             << 100.0 * row.report.mean.ssim;
        out << line.str() << "\n";
        std::cout << line.str() << "\n";
    }
    manifest.output(summary);
    manifest.write(summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stream rectified-flow forecaster for the heterogeneous "
                 "Navier-Stokes benchmark"};
    app.require_subcommand(1);
    app.footer("FOREDIFF_THREADS caps internal parallelism (default: hardware count).");

    GenDataArgs gen;
    CLI::App* cgen = app.add_subcommand("gen-data", "simulate the vorticity dataset");
    cgen->add_option("--config", gen.config, "key=value config file");
    cgen->add_option("--out", gen.out, "output dataset path");
    cgen->add_option("--seed", gen.seed, "master seed");
    cgen->add_option("--n", gen.n, "grid resolution (power of two)");
    cgen->add_option("--per-config", gen.per_config, "trajectories per (viscosity, forcing)");
    cgen->add_option("--frames", gen.frames, "recorded frames per trajectory");
    cgen->add_option("--dt", gen.dt, "solver timestep");
    cgen->add_option("--frame-interval", gen.frame_interval, "time between frames");
    cgen->add_option("--viscosities", gen.viscosities, "comma list, e.g. 1e-5,1e-4,1e-3");
    cgen->add_option("--forcings", gen.forcings, "comma list of variants 1..5");

    TrainArgs tr;
    CLI::App* ctrain = app.add_subcommand("train", "train one variant");
    ctrain->add_option("--config", tr.config, "key=value config file");
    ctrain->add_option("--variant", tr.variant,
                       "vanilla|foredif_zero|foredif_stage1|foredif_stage2|"
                       "foredif_predhead_ablation|vanilla_extended");
    ctrain->add_option("--data", tr.data, "dataset path");
    ctrain->add_option("--out", tr.out, "checkpoint path");
    ctrain->add_option("--stage1-ckpt", tr.stage1_ckpt, "stage-1 checkpoint (stage-2 variants)");
    ctrain->add_option("--loss-csv", tr.loss_csv, "loss log path");
    ctrain->add_option("--steps", tr.steps, "training steps");
    ctrain->add_option("--batch", tr.batch, "batch size");
    ctrain->add_option("--lr", tr.lr, "constant learning rate");
    ctrain->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
    ctrain->add_option("--eval-every", tr.eval_every, "progress/snapshot cadence");
    ctrain->add_option("--test-fraction", tr.test_fraction, "held-out fraction per group");
    ctrain->add_option("--seed", tr.seed, "master seed");
    ctrain->add_option("--vit-blocks", tr.vit_blocks, "predictive-stream depth M");
    ctrain->add_option("--dit-blocks", tr.dit_blocks, "generative-stream depth N");
    ctrain->add_option("--hidden", tr.hidden, "hidden width");
    ctrain->add_option("--heads", tr.heads, "attention heads");
    ctrain->add_option("--patch", tr.patch, "patch size");
    ctrain->add_option("--grid", tr.grid, "field resolution n");
    ctrain->add_option("--frames-obs", tr.frames_obs, "observed frames O");
    ctrain->add_option("--frames-pred", tr.frames_pred, "predicted frames S");
    ctrain->add_option("--mlp-ratio", tr.mlp_ratio, "MLP expansion ratio");

    EvalArgs ev;
    CLI::App* ceval = app.add_subcommand("eval", "evaluate a checkpoint on held-out data");
    ceval->add_option("--config", ev.config, "key=value config file");
    ceval->add_option("--ckpt", ev.ckpt, "checkpoint path");
    ceval->add_option("--data", ev.data, "dataset path");
    ceval->add_option("--out", ev.out, "report CSV path");
    ceval->add_option("--samples", ev.samples, "samples per condition N");
    ceval->add_option("--steps", ev.steps, "sampler steps K");
    ceval->add_option("--seed", ev.seed, "evaluation seed");
    ceval->add_option("--test-fraction", ev.test_fraction, "held-out fraction per group");

    LemmaArgs lm;
    CLI::App* clemma = app.add_subcommand("lemma-check",
                                          "one-step t=1 probe vs deterministic predictor");
    clemma->add_option("--config", lm.config, "key=value config file");
    clemma->add_option("--diff-ckpt", lm.diff_ckpt, "diffusion checkpoint");
    clemma->add_option("--det-ckpt", lm.det_ckpt, "deterministic checkpoint");
    clemma->add_option("--data", lm.data, "dataset path");
    clemma->add_option("--trials", lm.trials, "fresh noise draws per condition");
    clemma->add_option("--seed", lm.seed, "probe seed");
    clemma->add_option("--test-fraction", lm.test_fraction, "held-out fraction per group");

    AblateArgs ab;
    CLI::App* cablate = app.add_subcommand("ablate", "run a comparison sweep");
    cablate->add_option("--config", ab.config, "key=value config file");
    cablate->add_option("--sweep", ab.sweep, "vit_blocks|predhead|scaling");
    cablate->add_option("--data", ab.train.data, "dataset path");
    cablate->add_option("--out", ab.out, "output directory");
    cablate->add_option("--samples", ab.samples, "samples per condition N");
    cablate->add_option("--eval-steps", ab.eval_steps, "sampler steps K for the sweep eval");
    cablate->add_option("--stage1-fraction", ab.stage1_fraction,
                        "share of steps spent on deterministic pretraining");
    cablate->add_option("--steps", ab.train.steps, "total steps per variant");
    cablate->add_option("--batch", ab.train.batch, "batch size");
    cablate->add_option("--lr", ab.train.lr, "constant learning rate");
    cablate->add_option("--seed", ab.train.seed, "master seed");
    cablate->add_option("--vit-blocks", ab.train.vit_blocks, "predictive-stream depth M");
    cablate->add_option("--dit-blocks", ab.train.dit_blocks, "generative-stream depth N");
    cablate->add_option("--hidden", ab.train.hidden, "hidden width");
    cablate->add_option("--heads", ab.train.heads, "attention heads");
    cablate->add_option("--patch", ab.train.patch, "patch size");
    cablate->add_option("--grid", ab.train.grid, "field resolution n");
    cablate->add_option("--frames-obs", ab.train.frames_obs, "observed frames O");
    cablate->add_option("--frames-pred", ab.train.frames_pred, "predicted frames S");
    cablate->add_option("--test-fraction", ab.train.test_fraction, "held-out fraction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cgen->parsed()) return cmd_gen_data(gen, cgen);
        if (ctrain->parsed()) return cmd_train(tr, ctrain);
        if (ceval->parsed()) return cmd_eval(ev, ceval);
        if (clemma->parsed()) return cmd_lemma_check(lm, clemma);
        if (cablate->parsed()) return cmd_ablate(ab, cablate);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CflError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
