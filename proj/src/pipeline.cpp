#include "affield/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "affield/error.hpp"
#include "affield/parallel.hpp"

namespace affield {

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string level_key(int k, int levels) { return k > levels ? "pixel" : std::to_string(k); }

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

AffineField compose_two(const AffineField& a, const AffineField& b) {
    const std::vector<AffineField> pair{a, b};
    return compose_fields(pair);
}

/// Composition of the first `count` grid levels of params over the pair.
AffineField compose_grids(const Image& source, const Image& target, const PyramidConfig& config,
                          const PyramidParams& params, int count) {
    const int h = target.height(), w = target.width();
    AffineField composed(h, w);
    for (int k = 1; k <= count; ++k) {
        const Image warped = warp_image(source, composed);
        const CostVolume c = level_volume(warped, target, config.specs[k - 1], config.volume_budget);
        composed = compose_two(composed, grid_to_dense(forward_grid(params.grids[k - 1], c, k, h, w)));
    }
    return composed;
}

double clip_gradients(Gradients& g, double max_norm) {
    const double n = gradient_norm(g);
    if (max_norm > 0.0 && n > max_norm) {
        for (auto& b : g)
            for (auto& v : b) v *= max_norm / n;
    }
    return n;
}

// Losses are reported in squared pixels; updates use the loss in units of
// the larger image side so one learning rate fits every image size.
double optimizer_scale(int h, int w) {
    const double s = std::max(h, w);
    return 1.0 / (s * s);
}

std::vector<std::size_t> batch_order(std::size_t count, int iterations, int batch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(count), out;
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t pos = count;
    out.reserve(static_cast<std::size_t>(iterations) * batch);
    for (long i = 0; i < static_cast<long>(iterations) * batch; ++i) {
        if (pos == count) {
            std::shuffle(perm.begin(), perm.end(), rng);
            pos = 0;
        }
        out.push_back(perm[pos++]);
    }
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

PyramidConfig PyramidConfig::defaults() {
    PyramidConfig c;
    c.levels = 3;
    c.specs = {LevelSpec{1, {4, 3}, 1.0 / 10.0, 4}, LevelSpec{2, {3, 2}, 1.0 / 10.0, 4},
               LevelSpec{3, {2, 1}, 1.0 / 15.0, 4}, LevelSpec{4, {1, 0}, 1.0 / 15.0, 4}};
    return c;
}

void PyramidConfig::validate() const {
    if (levels < 1) throw InvalidArgument("pyramid needs at least one grid level");
    if (specs.size() != static_cast<std::size_t>(levels) + 1)
        throw InvalidArgument("pyramid needs levels + 1 level specs (grid levels and the pixel level)");
    for (const auto& s : specs) s.validate();
    if (grid_widths.size() < 3 || grid_widths.size() > 6) throw InvalidArgument("grid regressor needs 3-6 layers");
    if (pixel_widths.size() != 3) throw InvalidArgument("pixel regressor needs three widths");
    for (int w : grid_widths)
        if (w < 1) throw InvalidArgument("layer widths must be positive");
    for (int w : pixel_widths)
        if (w < 1) throw InvalidArgument("layer widths must be positive");
    if (train.iterations < 0 || train.pixel_iterations < 0 || train.finetune_steps < 0)
        throw InvalidArgument("iteration counts must be non-negative");
    if (train.batch < 1) throw InvalidArgument("batch size must be positive");
    if (!(train.lr > 0.0) || !(train.finetune_lr > 0.0)) throw InvalidArgument("learning rates must be positive");
    if (train.momentum < 0.0 || train.momentum >= 1.0) throw InvalidArgument("momentum must be in [0, 1)");
    if (train.msac_stride < 1 || train.msac_scales.empty() || !(train.msac_ratio > 0.0 && train.msac_ratio <= 1.0))
        throw InvalidArgument("invalid MSAC matching setup");
    if (train.msac.iterations < 1 || !(train.msac.inlier_threshold_px > 0.0))
        throw InvalidArgument("invalid MSAC options");
}

std::vector<double> PyramidConfig::window_ratios() const {
    std::vector<double> r;
    for (const auto& s : specs) r.push_back(s.window_ratio);
    return r;
}

PyramidConfig PyramidConfig::truncated(int k) const {
    if (k < 1 || k > levels) throw InvalidArgument("truncation level out of range");
    PyramidConfig c = *this;
    c.levels = k;
    c.specs.assign(specs.begin(), specs.begin() + k);
    c.specs.push_back(specs.back());
    return c;
}

std::string PyramidConfig::canonical() const {
    std::ostringstream o;
    o << "pyramid.levels=" << levels << "\n";
    for (int k = 1; k <= levels + 1; ++k) {
        const auto& s = specs.at(k - 1);
        const std::string p = "level." + level_key(k, levels) + ".";
        o << p << "scales=" << join_ints(s.scale_indices) << "\n";
        o << p << "ratio=" << num(s.window_ratio) << "\n";
        o << p << "stride=" << s.stride << "\n";
    }
    o << "net.grid_widths=" << join_ints(grid_widths) << "\n";
    o << "net.pixel_widths=" << join_ints(pixel_widths) << "\n";
    o << "volume.budget_bytes=" << volume_budget << "\n";
    o << "train.iterations=" << train.iterations << "\n";
    o << "train.pixel_iterations=" << train.pixel_iterations << "\n";
    o << "train.batch=" << train.batch << "\n";
    o << "train.lr=" << num(train.lr) << "\n";
    o << "train.momentum=" << num(train.momentum) << "\n";
    o << "train.clip=" << num(train.clip) << "\n";
    o << "train.finetune_steps=" << train.finetune_steps << "\n";
    o << "train.finetune_lr=" << num(train.finetune_lr) << "\n";
    o << "train.seed=" << train.seed << "\n";
    o << "msac.iterations=" << train.msac.iterations << "\n";
    o << "msac.threshold=" << num(train.msac.inlier_threshold_px) << "\n";
    o << "msac.stride=" << train.msac_stride << "\n";
    o << "msac.scales=" << join_ints(train.msac_scales) << "\n";
    o << "msac.ratio=" << num(train.msac_ratio) << "\n";
    o << "msac.seed=" << train.msac.seed << "\n";
    o << "supervision.filter_radius=" << num(train.filter_radius_px) << "\n";
    o << "supervision.min_samples=" << train.min_samples << "\n";
    o << "supervision.min_inlier_ratio=" << num(train.min_inlier_ratio) << "\n";
    return o.str();
}

int volume_channels(const LevelSpec& spec, int image_h, int image_w) {
    const int r = window_radius(spec.window_ratio, sampled_extent(image_h, spec.stride),
                                sampled_extent(image_w, spec.stride));
    return (2 * r + 1) * (2 * r + 1);
}

PyramidParams identity_params(const PyramidConfig& config, int image_h, int image_w, bool with_pixel) {
    config.validate();
    PyramidParams p;
    for (int k = 1; k <= config.levels; ++k)
        p.grids.push_back(init_grid_regressor(
            {k, volume_channels(config.specs[k - 1], image_h, image_w), config.grid_widths}, mix(config.train.seed, k)));
    if (with_pixel)
        p.pixel = init_pixel_regressor({volume_channels(config.specs.back(), image_h, image_w), config.pixel_widths},
                                       mix(config.train.seed, 0));
    return p;
}

CostVolume level_volume(const Image& warped_source, const Image& target, const LevelSpec& spec, std::size_t budget) {
    const DescriptorMap ft = extract_handcrafted(target, spec);
    const DescriptorMap fs = extract_handcrafted(warped_source, spec);
    return build_constrained(ft, fs, spec.window_ratio, budget);
}

InferenceResult run_inference(const Image& source, const Image& target, const PyramidConfig& config,
                              const PyramidParams& params) {
    config.validate();
    if (params.grids.size() != static_cast<std::size_t>(config.levels))
        throw InvalidArgument("checkpoint has " + std::to_string(params.grids.size()) + " grid levels, config expects " +
                              std::to_string(config.levels));
    if (source.height() != target.height() || source.width() != target.width())
        throw ShapeError("source and target must have the same size");
    const int h = target.height(), w = target.width();
    InferenceResult r;
    AffineField composed(h, w);
    for (int k = 1; k <= config.levels; ++k) {
        const Image warped = warp_image(source, composed);
        const CostVolume c = level_volume(warped, target, config.specs[k - 1], config.volume_budget);
        r.grids.push_back(forward_grid(params.grids[k - 1], c, k, h, w));
        r.level_fields.push_back(grid_to_dense(r.grids.back()));
        composed = compose_two(composed, r.level_fields.back());
        r.cumulative.push_back(composed);
    }
    if (params.pixel) {
        const Image warped = warp_image(source, composed);
        const CostVolume c = level_volume(warped, target, config.specs.back(), config.volume_budget);
        r.level_fields.push_back(forward_pixel(*params.pixel, c, h, w));
        composed = compose_two(composed, r.level_fields.back());
        r.cumulative.push_back(composed);
    }
    r.warped = warp_image(source, composed);
    r.final_field = std::move(composed);
    return r;
}

std::optional<LevelExample> level_example(const TrainingPair& pair, int level, const PyramidConfig& config,
                                          const PyramidParams& frozen, PairDiagnostic& diag) {
    const int h = pair.target.height(), w = pair.target.width();
    const bool pixel = level == config.levels + 1;
    diag = PairDiagnostic{pair.name, level, 0, 1.0, {}};
    if (static_cast<int>(frozen.grids.size()) < level - 1)
        throw InvalidArgument("coarser levels must be trained before level " + std::to_string(level));
    const AffineField composed = compose_grids(pair.source, pair.target, config, frozen, level - 1);
    const Image warped = warp_image(pair.source, composed);
    const LevelSpec& spec = config.specs[level - 1];
    const DescriptorMap ft = extract_handcrafted(pair.target, spec);
    const DescriptorMap fs = extract_handcrafted(warped, spec);
    const CostVolume c = build_constrained(ft, fs, spec.window_ratio, config.volume_budget);

    auto masked = [&](int stride) -> std::optional<ObjectMask> {
        if (!pair.target_mask) return std::nullopt;
        return pair.target_mask->subsample(stride);
    };

    LevelExample ex;
    ex.input = volume_to_tensor(c);
    ex.layout = pixel ? pixel_layout(c.height(), c.width(), h, w) : grid_layout(level, h, w);
    try {
        if (level == 1) {
            LevelSpec ms{1, config.train.msac_scales, config.train.msac_ratio, config.train.msac_stride};
            const DescriptorMap mt = extract_handcrafted(pair.target, ms);
            const DescriptorMap msrc = extract_handcrafted(warped, ms);
            const CostVolume full = build_constrained(mt, msrc, ms.window_ratio, config.volume_budget);
            const SampleSet all = generate_samples(full, masked(ms.stride), 1, ms.stride);
            diag.samples = all.size();
            if (all.size() < config.train.min_samples) {
                diag.reason = "below sample floor";
                return std::nullopt;
            }
            MsacOptions mo = config.train.msac;
            mo.seed = mix(mo.seed, fnv1a64(pair.name));
            const MsacResult fit = msac_affine(all, mo);
            diag.inlier_ratio = static_cast<double>(fit.inliers.size()) / static_cast<double>(all.size());
            if (diag.inlier_ratio < config.train.min_inlier_ratio) {
                diag.reason = "MSAC inlier ratio below limit";
                return std::nullopt;
            }
            if (fit.inliers.size() < config.train.min_samples) {
                diag.reason = "below sample floor";
                return std::nullopt;
            }
            for (const auto& m : fit.inliers.samples) {
                const Point2 p = fit.inliers.image_point(m.pixel);
                const Point2 q = apply_affine(fit.model, p);
                ex.targets.push_back({p, {q.x - p.x, q.y - p.y}});
            }
        } else {
            const SampleSet s = generate_samples(c, masked(spec.stride), level, spec.stride);
            diag.samples = s.size();
            if (s.size() < config.train.min_samples) {
                diag.reason = "below sample floor";
                return std::nullopt;
            }
            ex.targets = to_flow_targets(s);
        }
    } catch (const DegenerateError& e) {
        diag.reason = std::string("degenerate samples: ") + e.what();
        return std::nullopt;
    } catch (const InvalidArgument& e) {
        diag.reason = e.what();
        return std::nullopt;
    }
    return ex;
}

namespace {

struct ExampleGrad {
    double loss = 0.0;
    Gradients grads;
};

ExampleGrad example_gradient(const NetParams& params, const LevelExample& ex, bool pixel) {
    Graph g;
    const auto leaves = param_leaves(g, params);
    const Var in = g.constant(ex.input);
    const Var raw = pixel ? pixel_network(g, params, leaves, in) : grid_network(g, params, leaves, in);
    const Var loss = g.affine_flow_loss({{raw, &ex.layout}}, ex.targets);
    g.backward(loss);
    return {g.value(loss)[0], collect_gradients(g, params, leaves)};
}

}  // namespace

LevelTrainingResult train_level(int k, const std::vector<TrainingPair>& dataset, const PyramidConfig& config,
                                const PyramidParams& frozen) {
    config.validate();
    if (k < 1 || k > config.levels + 1) throw InvalidArgument("level out of range");
    if (dataset.empty()) throw TrainingError("training dataset is empty");
    const bool pixel = k == config.levels + 1;

    std::vector<std::optional<LevelExample>> slots(dataset.size());
    std::vector<PairDiagnostic> diags(dataset.size());
    parallel_for(dataset.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) slots[i] = level_example(dataset[i], k, config, frozen, diags[i]);
    });
    LevelTrainingResult result;
    std::vector<LevelExample> examples;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) {
            examples.push_back(std::move(*slots[i]));
        } else {
            result.dropped.push_back(diags[i]);
        }
    }
    result.used_pairs = examples.size();
    if (examples.empty()) {
        std::string msg = "level " + level_key(k, config.levels) + ": every pair was dropped";
        for (const auto& d : result.dropped) msg += "\n  " + d.pair + ": " + d.reason;
        throw TrainingError(msg);
    }

    const int h = dataset.front().target.height(), w = dataset.front().target.width();
    LevelFit fit = fit_level(k, examples, config, h, w);
    result.params = std::move(fit.params);
    result.loss_curve = std::move(fit.loss_curve);
    return result;
}

LevelFit fit_level(int k, const std::vector<LevelExample>& examples, const PyramidConfig& config, int h, int w) {
    if (examples.empty()) throw TrainingError("no training examples");
    const bool pixel = k == config.levels + 1;
    LevelFit result;
    const LevelSpec& spec = config.specs[k - 1];
    result.params = pixel ? init_pixel_regressor({volume_channels(spec, h, w), config.pixel_widths},
                                                 mix(config.train.seed, 0))
                          : init_grid_regressor({k, volume_channels(spec, h, w), config.grid_widths},
                                                mix(config.train.seed, k));
    const int iterations = pixel ? config.train.pixel_iterations : config.train.iterations;
    const int batch = std::min<int>(config.train.batch, static_cast<int>(examples.size()));
    const auto order = batch_order(examples.size(), iterations, batch, mix(config.train.seed, 100 + k));
    MomentumSgd opt(config.train.lr, config.train.momentum);
    const double grad_scale = optimizer_scale(h, w);
    std::vector<ExampleGrad> parts(batch);
    for (int it = 0; it < iterations; ++it) {
        parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b, std::size_t e) {
            for (std::size_t j = b; j < e; ++j)
                parts[j] = example_gradient(result.params, examples[order[static_cast<std::size_t>(it) * batch + j]], pixel);
        });
        Gradients total = zero_gradients(result.params);
        double loss = 0.0;
        for (const auto& p : parts) {
            accumulate(total, p.grads, grad_scale / batch);
            loss += p.loss / batch;
        }
        if (!std::isfinite(loss)) throw TrainingError("non-finite loss at level " + level_key(k, config.levels) +
                                                      ", iteration " + std::to_string(it));
        result.loss_curve.push_back(loss);
        clip_gradients(total, config.train.clip);
        opt.step(result.params, total);
    }
    return result;
}

FinetuneResult finetune_end_to_end(const PyramidParams& params, const std::vector<TrainingPair>& dataset,
                                   const PyramidConfig& config) {
    config.validate();
    if (dataset.empty()) throw TrainingError("training dataset is empty");
    if (params.grids.size() != static_cast<std::size_t>(config.levels))
        throw InvalidArgument("finetuning needs every grid level");
    FinetuneResult out{params, {}, 0.0, 0.0};
    const std::size_t nets = params.grids.size() + (params.pixel ? 1 : 0);
    auto net = [&](PyramidParams& p, std::size_t i) -> NetParams& { return i < p.grids.size() ? p.grids[i] : *p.pixel; };
    std::vector<MomentumSgd> opts(nets, MomentumSgd(config.train.finetune_lr, config.train.momentum));
    const int batch = std::min<int>(config.train.batch, static_cast<int>(dataset.size()));
    const auto order = batch_order(dataset.size(), config.train.finetune_steps, batch, mix(config.train.seed, 999));

    struct Part {
        bool used = false;
        double loss = 0.0;
        std::vector<Gradients> grads;
    };

    for (int step = 0; step < config.train.finetune_steps; ++step) {
        std::vector<Part> parts(batch);
        parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b, std::size_t e) {
            for (std::size_t j = b; j < e; ++j) {
                const TrainingPair& pair = dataset[order[static_cast<std::size_t>(step) * batch + j]];
                const int h = pair.target.height(), w = pair.target.width();
                Graph g;
                std::vector<std::vector<Var>> leaves;
                std::vector<Graph::AffineTerm> terms;
                std::vector<CellLayout> layouts(nets);
                AffineField composed(h, w);
                CostVolume last(1, 1, 1);
                AffineField before_last = composed;
                for (std::size_t n = 0; n < nets; ++n) {
                    const bool pixel = n == params.grids.size();
                    const NetParams& p = net(out.params, n);
                    const Image warped = warp_image(pair.source, composed);
                    const CostVolume c = level_volume(warped, pair.target, config.specs[pixel ? config.levels : n],
                                                      config.volume_budget);
                    leaves.push_back(param_leaves(g, p));
                    const Var in = g.constant(volume_to_tensor(c));
                    const Var raw = pixel ? pixel_network(g, p, leaves.back(), in) : grid_network(g, p, leaves.back(), in);
                    layouts[n] = pixel ? pixel_layout(c.height(), c.width(), h, w)
                                       : grid_layout(static_cast<int>(n) + 1, h, w);
                    const auto cells = cells_from_raw(g.value(raw), layouts[n]);
                    before_last = composed;
                    composed = compose_two(composed, upsample_cells(cells, layouts[n].rows, layouts[n].cols, h, w));
                    terms.push_back({raw, nullptr});
                    last = c;
                }
                for (std::size_t n = 0; n < nets; ++n) terms[n].layout = &layouts[n];
                const LevelSpec& spec = params.pixel ? config.specs.back() : config.specs[config.levels - 1];
                std::optional<ObjectMask> mask;
                if (pair.target_mask) {
                    try {
                        mask = pair.target_mask->subsample(spec.stride);
                    } catch (const InvalidArgument&) {
                        continue;
                    }
                }
                const SampleSet s = generate_samples(last, mask, static_cast<int>(nets), spec.stride);
                if (s.size() < config.train.min_samples) continue;
                std::vector<FlowTarget> targets;
                for (const auto& m : s.samples) {
                    const Point2 p = s.image_point(m.pixel);
                    const Point2 q = s.image_point(m.match);
                    const int qx = std::clamp(static_cast<int>(q.x), 0, w - 1);
                    const int qy = std::clamp(static_cast<int>(q.y), 0, h - 1);
                    const Point2 src = apply_affine(before_last.at(qy, qx), q);
                    targets.push_back({p, {src.x - p.x, src.y - p.y}});
                }
                const Var loss = g.affine_flow_loss(terms, targets);
                g.backward(loss);
                parts[j].used = true;
                parts[j].loss = g.value(loss)[0];
                for (std::size_t n = 0; n < nets; ++n)
                    parts[j].grads.push_back(collect_gradients(g, net(out.params, n), leaves[n]));
            }
        });
        std::vector<Gradients> total;
        for (std::size_t n = 0; n < nets; ++n) total.push_back(zero_gradients(net(out.params, n)));
        double loss = 0.0;
        int used = 0;
        for (const auto& p : parts) used += p.used;
        if (used == 0) {
            out.loss_curve.push_back(out.loss_curve.empty() ? 0.0 : out.loss_curve.back());
            continue;
        }
        for (const auto& p : parts) {
            if (!p.used) continue;
            loss += p.loss / used;
            const double gs = optimizer_scale(dataset.front().target.height(), dataset.front().target.width());
            for (std::size_t n = 0; n < nets; ++n) accumulate(total[n], p.grads[n], gs / used);
        }
        if (!std::isfinite(loss)) throw TrainingError("non-finite loss during finetuning, step " + std::to_string(step));
        out.loss_curve.push_back(loss);
        double sq = 0.0;
        for (const auto& t : total) sq += std::pow(gradient_norm(t), 2);
        if (step == 0) {
            out.first_gradient_norm = std::sqrt(sq);
            out.first_level1_gradient_norm = gradient_norm(total[0]);
        }
        const double norm = std::sqrt(sq);
        const double scale = config.train.clip > 0.0 && norm > config.train.clip ? config.train.clip / norm : 1.0;
        for (std::size_t n = 0; n < nets; ++n) {
            for (auto& blk : total[n])
                for (auto& v : blk) v *= scale;
            opts[n].step(net(out.params, n), total[n]);
        }
    }
    return out;
}

TrainingRun train_pyramid(const std::vector<TrainingPair>& dataset, const PyramidConfig& config, bool finetune) {
    TrainingRun run;
    for (int k = 1; k <= config.levels + 1; ++k) {
        LevelTrainingResult r = train_level(k, dataset, config, run.params);
        if (k <= config.levels) {
            run.params.grids.push_back(std::move(r.params));
        } else {
            run.params.pixel = std::move(r.params);
        }
        run.loss_curves.push_back(std::move(r.loss_curve));
    }
    if (finetune) {
        FinetuneResult f = finetune_end_to_end(run.params, dataset, config);
        run.params = std::move(f.params);
        run.loss_curves.push_back(std::move(f.loss_curve));
    }
    return run;
}

void save_pyramid(const PyramidParams& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < params.grids.size(); ++k)
        save_params(params.grids[k], dir / ("level_" + std::to_string(k + 1) + ".pnp"));
    if (params.pixel) save_params(*params.pixel, dir / "pixel.pnp");
}

PyramidParams load_pyramid(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InvalidArgument("checkpoint directory not found: " + dir.string());
    PyramidParams p;
    for (int k = 1;; ++k) {
        const auto path = dir / ("level_" + std::to_string(k) + ".pnp");
        if (!std::filesystem::exists(path)) break;
        p.grids.push_back(load_params(path));
        if (grid_arch_of(p.grids.back()).level != k) throw ShapeError(path.string() + " holds a different level");
    }
    if (p.grids.empty()) throw InvalidArgument("checkpoint directory holds no level_1.pnp: " + dir.string());
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        files += name.starts_with("level_") && name.ends_with(".pnp");
    }
    if (files != p.grids.size()) throw InvalidArgument("checkpoint levels are not contiguous: " + dir.string());
    if (std::filesystem::exists(dir / "pixel.pnp")) {
        p.pixel = load_params(dir / "pixel.pnp");
        pixel_arch_of(*p.pixel);
    }
    return p;
}

}  // namespace affield
