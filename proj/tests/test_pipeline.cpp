#include <doctest.h>

#include <cmath>
#include <random>

#include "affield/error.hpp"
#include "affield/pipeline.hpp"
#include "affield/synth.hpp"
#include "test_support.hpp"

using namespace affield;

namespace {

PyramidConfig small_config() {
    PyramidConfig c = PyramidConfig::defaults();
    c.grid_widths = {8, 8, 16};
    c.pixel_widths = {4, 8, 8};
    c.train.iterations = 12;
    c.train.pixel_iterations = 6;
    c.train.batch = 2;
    c.train.lr = 1e-2;
    c.train.finetune_steps = 4;
    return c;
}

PyramidParams random_params(const PyramidConfig& config, int h, int w, std::uint64_t seed) {
    PyramidParams p;
    for (int k = 1; k <= config.levels; ++k)
        p.grids.push_back(init_grid_regressor(
            {k, volume_channels(config.specs[k - 1], h, w), config.grid_widths}, seed + k, 0.01));
    p.pixel = init_pixel_regressor({volume_channels(config.specs.back(), h, w), config.pixel_widths}, seed, 0.01);
    return p;
}

std::vector<TrainingPair> synthetic_set(std::uint64_t seed, int count, int side, SynthMode mode,
                                        const SynthOptions& opts = {}) {
    std::mt19937_64 rng(seed);
    std::vector<TrainingPair> out;
    for (int i = 0; i < count; ++i) {
        const Image tex = procedural_texture(rng, side, side);
        auto s = synth_pair(tex, rng, mode, opts);
        out.push_back({s.source, s.target, s.mask, s.gt, "pair" + std::to_string(i)});
    }
    return out;
}

}  // namespace

TEST_CASE("identity parameters give the identity pipeline") {
    std::mt19937_64 rng(5);
    const auto config = PyramidConfig::defaults();
    const Image src = testing::random_image(rng, 64, 64);
    const Image tgt = testing::random_image(rng, 64, 64);
    const auto r = run_inference(src, tgt, config, identity_params(config, 64, 64));
    CHECK(r.final_field.is_identity());
    CHECK(r.warped == src);
    CHECK(r.level_fields.size() == 4);
    for (const auto& f : r.level_fields) CHECK(f.is_identity());

    const auto same = run_inference(src, src, config, identity_params(config, 64, 64));
    const FlowField zero = flow_from_field(same.final_field);
    for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("inference rejects mismatched parameters") {
    std::mt19937_64 rng(6);
    const auto config = PyramidConfig::defaults();
    const Image img = testing::random_image(rng, 64, 64);
    auto p = identity_params(config, 64, 64);
    p.grids.pop_back();
    CHECK_THROWS_AS(run_inference(img, img, config, p), InvalidArgument);
    auto q = identity_params(config, 64, 64);
    std::swap(q.grids[0], q.grids[1]);
    CHECK_THROWS(run_inference(img, img, config, q));
}

TEST_CASE("final field equals sequential application of the level fields") {
    std::mt19937_64 rng(7);
    const auto config = PyramidConfig::defaults();
    const Image src = testing::smooth_texture(rng, 64, 64);
    const Image tgt = testing::smooth_texture(rng, 64, 64);
    const auto r = run_inference(src, tgt, config, random_params(config, 64, 64, 11));
    CHECK_FALSE(r.final_field.is_identity());
    const FlowField flow = flow_from_field(r.final_field);
    double worst = 0.0;
    for (int y = 0; y < 64; y += 3)
        for (int x = 0; x < 64; x += 3) {
            Point2 q{double(x), double(y)};
            for (auto it = r.level_fields.rbegin(); it != r.level_fields.rend(); ++it) q = apply_affine(it->at(y, x), q);
            worst = std::max({worst, std::abs(q.x - x - flow.at(y, x).x), std::abs(q.y - y - flow.at(y, x).y)});
        }
    CHECK(worst < 1e-9);
    CHECK(r.cumulative.back() == r.final_field);
    CHECK(r.warped == warp_image(src, r.final_field));
}

TEST_CASE("synthetic pair invariants") {
    std::mt19937_64 rng(8);
    const Image tex = procedural_texture(rng, 64, 80);
    for (auto v : tex.data()) REQUIRE((v >= 0.0 && v <= 1.0));

    SynthOptions ident;
    ident.identity = true;
    for (SynthMode m : {SynthMode::Global, SynthMode::Quadsplit}) {
        const auto s = synth_pair(tex, rng, m, ident);
        CHECK(s.target == s.source);
        CHECK(s.gt.is_identity());
    }

    SynthOptions tr;
    tr.translation_only = true;
    const auto t = synth_pair(tex, rng, SynthMode::Global, tr);
    const FlowField f = flow_from_field(t.gt);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 80; ++x) {
            CHECK(f.at(y, x).x == doctest::Approx(f.at(0, 0).x).epsilon(1e-12));
            CHECK(f.at(y, x).y == doctest::Approx(f.at(0, 0).y).epsilon(1e-12));
        }

    for (SynthMode m : {SynthMode::Global, SynthMode::Quadsplit, SynthMode::Flip})
        for (int i = 0; i < 3; ++i) {
            const auto s = synth_pair(tex, rng, m);
            CHECK(warp_image(s.source, s.gt) == s.target);
            CHECK(s.mask.count() > 0);
        }
    CHECK_THROWS_AS(synth_pair(Image(32, 80, 1), rng, SynthMode::Global), InvalidArgument);
    CHECK(parse_synth_mode("quadsplit") == SynthMode::Quadsplit);
    CHECK_THROWS_AS(parse_synth_mode("warp"), InvalidArgument);
}

TEST_CASE("global draws stay within the configured ranges") {
    std::mt19937_64 rng(9);
    const SynthOptions opts;
    for (int i = 0; i < 200; ++i) {
        const Affine2D a = random_global_affine(rng, 128, 128, opts);
        const double det = a.determinant();
        CHECK(std::sqrt(std::abs(det)) >= 0.8 * 0.9);
        CHECK(std::sqrt(std::abs(det)) <= 1.25 * 1.1);
        // The image center moves by at most the translation bound.
        const Point2 c = apply_affine(a, {63.5, 63.5});
        CHECK(std::abs(c.x - 63.5) <= 12.8 + 1e-9);
        CHECK(std::abs(c.y - 63.5) <= 12.8 + 1e-9);
    }
}

TEST_CASE("config validation and truncation") {
    auto c = PyramidConfig::defaults();
    CHECK_NOTHROW(c.validate());
    CHECK(c.window_ratios() == std::vector<double>{0.1, 0.1, 1.0 / 15, 1.0 / 15});
    const auto t = c.truncated(1);
    CHECK(t.levels == 1);
    CHECK(t.specs.size() == 2);
    CHECK(t.specs.back().window_ratio == c.specs.back().window_ratio);
    c.specs.pop_back();
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    auto z = PyramidConfig::defaults();
    z.levels = 0;
    CHECK_THROWS_AS(z.validate(), InvalidArgument);
    CHECK(PyramidConfig::defaults().canonical() == PyramidConfig::defaults().canonical());
}

TEST_CASE("identity pairs leave level training at its initialization") {
    auto config = small_config();
    std::mt19937_64 rng(10);
    std::vector<TrainingPair> data;
    for (int i = 0; i < 3; ++i) {
        const Image tex = procedural_texture(rng, 64, 64);
        data.push_back({tex, tex, std::nullopt, std::nullopt, "same" + std::to_string(i)});
    }
    const auto init = identity_params(config, 64, 64);
    const auto r = train_level(1, data, config, PyramidParams{});
    REQUIRE(r.used_pairs == 3);
    CHECK(r.loss_curve.front() < 1e-12);
    double drift = 0.0;
    for (std::size_t b = 0; b < r.params.blocks.size(); ++b)
        for (std::size_t i = 0; i < r.params.blocks[b].values.size(); ++i)
            drift = std::max(drift, std::abs(r.params.blocks[b].values[i] - init.grids[0].blocks[b].values[i]));
    CHECK(drift < 1e-6);
}

TEST_CASE("training is deterministic and reduces the level loss") {
    auto config = small_config();
    config.train.iterations = 30;
    const auto data = synthetic_set(12, 4, 64, SynthMode::Global);
    const auto a = train_level(1, data, config, PyramidParams{});
    const auto b = train_level(1, data, config, PyramidParams{});
    CHECK(a.params == b.params);
    CHECK(a.loss_curve == b.loss_curve);
    REQUIRE(a.loss_curve.size() == 30);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 5; ++i) {
        head += a.loss_curve[i];
        tail += a.loss_curve[a.loss_curve.size() - 1 - i];
    }
    CHECK(tail < head);

    CHECK_THROWS_AS(train_level(1, {}, config, PyramidParams{}), TrainingError);
    auto tiny = data;
    for (auto& p : tiny) p.target_mask = ObjectMask::from_box(64, 64, 0, 0, 1, 1);
    CHECK_THROWS_AS(train_level(1, tiny, config, PyramidParams{}), TrainingError);
}

TEST_CASE("finetuning reaches level 1 and is a no-op on identity pairs") {
    auto config = small_config();
    const auto data = synthetic_set(13, 2, 64, SynthMode::Global);
    const auto start = random_params(config, 64, 64, 21);
    const auto f = finetune_end_to_end(start, data, config);
    CHECK(f.first_level1_gradient_norm > 0.0);
    CHECK(f.loss_curve.size() == 4);

    std::mt19937_64 rng(14);
    const Image tex = procedural_texture(rng, 64, 64);
    const std::vector<TrainingPair> same{{tex, tex, std::nullopt, std::nullopt, "same"}};
    const auto ident = identity_params(config, 64, 64);
    const auto g = finetune_end_to_end(ident, same, config);
    CHECK(g.params == ident);
    CHECK(g.first_gradient_norm == 0.0);
}

TEST_CASE("pyramid checkpoints round-trip") {
    const auto config = PyramidConfig::defaults();
    const auto p = random_params(config, 64, 64, 31);
    const auto dir = std::filesystem::temp_directory_path() / "affield_pyramid_rt";
    std::filesystem::remove_all(dir);
    save_pyramid(p, dir);
    CHECK(load_pyramid(dir) == p);
    std::filesystem::remove(dir / "level_2.pnp");
    CHECK_THROWS(load_pyramid(dir));
    std::filesystem::remove_all(dir);
}
