#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "affield/binary_io.hpp"
#include "affield/config.hpp"
#include "affield/dataset.hpp"
#include "affield/error.hpp"
#include "affield/eval.hpp"
#include "affield/gradcheck_suite.hpp"
#include "affield/image_io.hpp"
#include "affield/parallel.hpp"
#include "affield/pipeline.hpp"
#include "affield/synth.hpp"

namespace fs = std::filesystem;
using namespace affield;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
};

PyramidConfig resolve_config(const Common& c, const PyramidConfig& base = PyramidConfig::defaults()) {
    PyramidConfig cfg = c.config_path.empty() ? base : load_config(c.config_path, base);
    for (const auto& o : c.overrides) apply_override(cfg, o);
    if (c.seed_given) cfg.train.seed = c.seed;
    cfg.validate();
    return cfg;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string file_hash(const fs::path& p) {
    const auto bytes = io::read_file(p);
    return hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
}

void write_text(const fs::path& p, const std::string& s) {
    io::write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data, out;
    bool finetune = false;
};

int cmd_train(const Common& common, const TrainArgs& a) {
    const PyramidConfig cfg = resolve_config(common);
    if (!fs::is_directory(a.data)) throw InvalidArgument("dataset directory not found: " + a.data);
    const auto dataset = load_dataset(a.data);
    if (dataset.empty()) throw InvalidArgument("dataset lists no pairs: " + a.data);
    fs::create_directories(a.out);

    const TrainingRun run = train_pyramid(dataset, cfg, a.finetune);
    save_pyramid(run.params, a.out);
    write_text(fs::path(a.out) / "config.txt", cfg.canonical());

    Manifest m;
    m.set("seed", std::to_string(cfg.train.seed));
    m.set("config_hash", config_hash(cfg));
    m.set("config", "config.txt");
    m.set("pairs", std::to_string(dataset.size()));
    for (int k = 1; k <= cfg.levels; ++k) {
        const std::string name = "level_" + std::to_string(k) + ".pnp";
        m.set("checkpoint.level_" + std::to_string(k), name);
        m.set("checkpoint_hash.level_" + std::to_string(k), file_hash(fs::path(a.out) / name));
    }
    m.set("checkpoint.pixel", "pixel.pnp");
    m.set("checkpoint_hash.pixel", file_hash(fs::path(a.out) / "pixel.pnp"));
    for (std::size_t i = 0; i < run.loss_curves.size(); ++i) {
        const int k = static_cast<int>(i) + 1;
        const std::string tag = k <= cfg.levels ? "level_" + std::to_string(k) : k == cfg.levels + 1 ? "pixel" : "finetune";
        write_loss_csv(run.loss_curves[i], fs::path(a.out) / ("loss_" + tag + ".csv"));
        m.set("loss." + tag, "loss_" + tag + ".csv");
    }
    m.save(fs::path(a.out) / "manifest.txt");
    std::cout << "trained " << cfg.levels << " grid levels and the pixel level on " << dataset.size()
              << " pairs; config " << config_hash(cfg) << "\n";
    return 0;
}

// ---- infer -----------------------------------------------------------------

struct InferArgs {
    std::string checkpoint, source, target, out;
    bool per_level = false;
    bool identity = false;
};

int cmd_infer(const Common& common, const InferArgs& a) {
    const Image src = load_pnm(a.source);
    const Image tgt = load_pnm(a.target);
    if (!src.same_shape(tgt)) throw ShapeError("source and target must have the same size and channel count");

    PyramidConfig base = PyramidConfig::defaults();
    if (!a.checkpoint.empty() && fs::exists(fs::path(a.checkpoint) / "config.txt"))
        base = load_config(fs::path(a.checkpoint) / "config.txt");
    const PyramidConfig cfg = resolve_config(common, base);

    PyramidParams params;
    if (a.identity) {
        params = identity_params(cfg, tgt.height(), tgt.width());
    } else {
        if (a.checkpoint.empty()) throw InvalidArgument("infer needs --checkpoint or --identity");
        params = load_pyramid(a.checkpoint);
    }
    const InferenceResult r = run_inference(src, tgt, cfg, params);
    fs::create_directories(a.out);
    save_flow(flow_from_field(r.final_field), fs::path(a.out) / "flow.pff");
    save_affine_field(r.final_field, fs::path(a.out) / "field.paf");
    save_pnm(r.warped, fs::path(a.out) / (r.warped.channels() == 1 ? "warped.pgm" : "warped.ppm"));
    if (a.per_level) {
        for (std::size_t i = 0; i < r.level_fields.size(); ++i) {
            const int k = static_cast<int>(i) + 1;
            const std::string tag = k <= cfg.levels ? "level_" + std::to_string(k) : "pixel";
            save_affine_field(r.level_fields[i], fs::path(a.out) / (tag + ".paf"));
            save_affine_field(r.cumulative[i], fs::path(a.out) / ("through_" + tag + ".paf"));
        }
    }
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    std::string protocol = "flow";
    std::string flow, gt, mask, field, kp_source, kp_target, mask_source, mask_target, out, sweep;
    double threshold = 5.0;
    std::vector<double> bbox;
    std::vector<double> alphas{std::begin(kPckAlphas), std::end(kPckAlphas)};
};

std::string param_text(const char* name, double v) {
    std::ostringstream o;
    o << name << "=" << v;
    return o.str();
}

int cmd_eval(const EvalArgs& a) {
    std::vector<MetricRow> rows;
    if (a.protocol == "flow") {
        if (a.flow.empty() || a.gt.empty()) throw InvalidArgument("flow protocol needs --flow and --gt");
        const FlowField flow = load_flow(a.flow), gt = load_flow(a.gt);
        if (flow.height() != gt.height() || flow.width() != gt.width())
            throw ShapeError("flow and ground truth sizes differ");
        const ObjectMask fg = a.mask.empty() ? ObjectMask::full(gt.height(), gt.width()) : load_mask(a.mask);
        const auto r = endpoint_accuracy(flow, gt, fg, a.threshold);
        rows.push_back({"endpoint_accuracy", param_text("T", a.threshold), r.fraction, r.count});
        rows.push_back({"mean_endpoint_error", "full_resolution", mean_endpoint_error(flow, gt, fg), fg.count()});
        if (!a.sweep.empty()) {
            std::ofstream s(a.sweep);
            if (!s) throw InvalidArgument("cannot write " + a.sweep);
            write_sweep_csv(s, accuracy_sweep(flow, gt, fg));
        }
    } else if (a.protocol == "pck") {
        if (a.field.empty() || a.kp_source.empty() || a.kp_target.empty())
            throw InvalidArgument("pck protocol needs --field, --keypoints-source and --keypoints-target");
        const AffineField field = load_affine_field(a.field);
        const auto src = load_keypoints(a.kp_source), tgt = load_keypoints(a.kp_target);
        if (src.size() != tgt.size()) throw ShapeError("keypoint lists differ in length");
        for (const auto& p : tgt)
            if (p.x < 0 || p.y < 0 || p.x > field.width() - 1 || p.y > field.height() - 1)
                throw InvalidArgument("target keypoint outside the field");
        double bh = field.height(), bw = field.width();
        if (!a.bbox.empty()) {
            if (a.bbox.size() != 2) throw InvalidArgument("--bbox expects h,w");
            bh = a.bbox[0];
            bw = a.bbox[1];
        }
        const auto moved = transfer_points(field, tgt);
        for (double alpha : a.alphas)
            rows.push_back({"pck", param_text("alpha", alpha), pck(moved, src, bh, bw, alpha), src.size()});
    } else if (a.protocol == "iou") {
        if (a.field.empty() || a.mask_source.empty() || a.mask_target.empty())
            throw InvalidArgument("iou protocol needs --field, --mask-source and --mask-target");
        const AffineField field = load_affine_field(a.field);
        const ObjectMask ms = load_mask(a.mask_source), mt = load_mask(a.mask_target);
        if (mt.height() != field.height() || mt.width() != field.width())
            throw ShapeError("target mask does not match the field");
        const auto warped = warp_mask(ms.values(), ms.height(), ms.width(), field);
        rows.push_back({"mask_iou", "-", mask_iou(warped, mt.values()), mt.values().size()});
    } else {
        throw InvalidArgument("unknown protocol '" + a.protocol + "' (flow, pck, iou)");
    }
    if (a.out.empty()) {
        write_metric_csv(std::cout, rows);
    } else {
        std::ofstream o(a.out);
        if (!o) throw InvalidArgument("cannot write " + a.out);
        write_metric_csv(o, rows);
    }
    return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string images, out, mode = "global";
    int count = 8;
    int size = 128;
};

std::vector<Image> gather_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InvalidArgument("image directory not found: " + dir);
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw InvalidArgument("no PGM/PPM images in " + dir);
    std::vector<Image> out;
    for (const auto& p : paths) out.push_back(load_pnm(p));
    return out;
}

int cmd_synth(const Common& common, const SynthArgs& a) {
    if (a.count < 0) throw InvalidArgument("--count must be non-negative");
    const SynthMode mode = parse_synth_mode(a.mode);
    std::vector<Image> images;
    if (!a.images.empty()) images = gather_images(a.images);
    else if (a.size < 64) throw InvalidArgument("--size must be at least 64");
    fs::create_directories(a.out);
    std::mt19937_64 rng(common.seed);
    std::string listing = "# name source target mask gt\n";
    for (int i = 0; i < a.count; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "pair_%04d", i);
        const Image base = images.empty() ? procedural_texture(rng, a.size, a.size)
                                          : images[static_cast<std::size_t>(i) % images.size()];
        // Quantize first so the written target is the exact warp of the written source up to 8-bit rounding.
        const SyntheticPair s = synth_pair(quantize8(base), rng, mode);
        const std::string ext = s.source.channels() == 1 ? ".pgm" : ".ppm";
        const std::string S = stem;
        save_pnm(s.source, fs::path(a.out) / (S + "_source" + ext));
        save_pnm(s.target, fs::path(a.out) / (S + "_target" + ext));
        save_mask(s.mask, fs::path(a.out) / (S + "_mask.pgm"));
        save_affine_field(s.gt, fs::path(a.out) / (S + "_gt.paf"));
        save_flow(flow_from_field(s.gt), fs::path(a.out) / (S + "_gt.pff"));
        listing += S + " " + S + "_source" + ext + " " + S + "_target" + ext + " " + S + "_mask.pgm " + S + "_gt.paf\n";
    }
    write_text(fs::path(a.out) / "pairs.txt", listing);
    Manifest m;
    m.set("seed", std::to_string(common.seed));
    m.set("mode", synth_mode_name(mode));
    m.set("count", std::to_string(a.count));
    m.set("listing", "pairs.txt");
    m.save(fs::path(a.out) / "manifest.txt");
    return 0;
}

// ---- gradcheck -------------------------------------------------------------

int cmd_gradcheck(const std::string& inject) {
    std::optional<LayerKind> fault;
    if (!inject.empty()) {
        for (int k = 0; k <= static_cast<int>(LayerKind::Reduce); ++k)
            if (inject == layer_name(static_cast<LayerKind>(k))) fault = static_cast<LayerKind>(k);
        if (!fault) throw InvalidArgument("unknown layer kind '" + inject + "'");
    }
    bool ok = true;
    for (const auto& c : run_gradcheck_suite(fault)) {
        std::printf("%-24s %s  max_rel_error %.3e  worst %s\n", c.name.c_str(), c.report.passed ? "pass" : "FAIL",
                    c.report.max_rel_error, c.report.worst_block.c_str());
        ok = ok && c.report.passed;
    }
    std::printf("%s\n", ok ? "gradcheck passed" : "gradcheck FAILED");
    return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense affine-field correspondence: training, inference, evaluation and synthetic data"};
    app.require_subcommand(1);
    Common common;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) {
            sub->add_option("--config", common.config_path, "Key=value configuration file")->check(CLI::ExistingFile);
            sub->add_option("--set", common.overrides, "Override one configuration key (key=value)");
        }
        sub->add_option("--seed", common.seed, "Random seed")->each([&](const std::string&) { common.seed_given = true; });
        sub->add_option("--threads", common.threads, "Worker threads (1 = reproducible mode)")->check(CLI::PositiveNumber);
    };

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train every level, optionally finetune end to end");
    add_common(train, true);
    train->add_option("--data", ta.data, "Dataset directory holding pairs.txt")->required();
    train->add_option("--out", ta.out, "Output checkpoint directory")->required();
    train->add_flag("--finetune", ta.finetune, "Finetune all levels jointly after sequential training");

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "Estimate the affine field between two images");
    add_common(infer, true);
    infer->add_option("--checkpoint", ia.checkpoint, "Checkpoint directory");
    infer->add_option("--source", ia.source, "Source image (PGM/PPM)")->required();
    infer->add_option("--target", ia.target, "Target image (PGM/PPM)")->required();
    infer->add_option("--out", ia.out, "Output directory")->required();
    infer->add_flag("--per-level", ia.per_level, "Also write every level's field");
    infer->add_flag("--identity", ia.identity, "Use zero-head networks instead of a checkpoint");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Compute accuracy metrics");
    add_common(eval, false);
    eval->add_option("--protocol", ea.protocol, "flow, pck or iou")->capture_default_str();
    eval->add_option("--flow", ea.flow, "Predicted flow (PFF1)");
    eval->add_option("--gt", ea.gt, "Ground-truth flow (PFF1)");
    eval->add_option("--mask", ea.mask, "Foreground mask (PGM)");
    eval->add_option("--threshold", ea.threshold, "Endpoint threshold in pixels")->capture_default_str();
    eval->add_option("--sweep", ea.sweep, "Write the accuracy-vs-threshold CSV here");
    eval->add_option("--field", ea.field, "Predicted affine field (PAF1)");
    eval->add_option("--keypoints-source", ea.kp_source, "Source keypoints, one 'x y' per line");
    eval->add_option("--keypoints-target", ea.kp_target, "Target keypoints, one 'x y' per line");
    eval->add_option("--bbox", ea.bbox, "Object box h,w for the PCK radius")->delimiter(',');
    eval->add_option("--alpha", ea.alphas, "PCK alphas")->delimiter(',');
    eval->add_option("--mask-source", ea.mask_source, "Source object mask (PGM)");
    eval->add_option("--mask-target", ea.mask_target, "Target object mask (PGM)");
    eval->add_option("--out", ea.out, "Metric CSV path (default stdout)");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate synthetic pairs with ground truth");
    add_common(synth, false);
    synth->add_option("--images", sa.images, "Directory of PGM/PPM base images (default: procedural textures)");
    synth->add_option("--mode", sa.mode, "global, quadsplit or flip")->capture_default_str();
    synth->add_option("--count", sa.count, "Number of pairs")->capture_default_str();
    synth->add_option("--size", sa.size, "Procedural texture side")->capture_default_str();
    synth->add_option("--out", sa.out, "Output directory")->required();

    std::string inject;
    auto* gradcheck = app.add_subcommand("gradcheck", "Check reverse-mode gradients against finite differences");
    add_common(gradcheck, false);
    gradcheck->add_option("--inject", inject, "Corrupt the backward rule of one layer kind");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    if (common.threads > 0) set_thread_count(common.threads);

    try {
        if (*train) return cmd_train(common, ta);
        if (*infer) return cmd_infer(common, ia);
        if (*eval) return cmd_eval(ea);
        if (*synth) return cmd_synth(common, sa);
        if (*gradcheck) return cmd_gradcheck(inject);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
