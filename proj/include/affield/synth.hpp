#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "affield/field.hpp"
#include "affield/image.hpp"
#include "affield/supervision.hpp"

namespace affield {

enum class SynthMode { Global, Quadsplit, Flip };

SynthMode parse_synth_mode(std::string_view name);
const char* synth_mode_name(SynthMode mode);

struct SynthOptions {
    double max_rotation_deg = 20.0;
    double min_scale = 0.8;
    double max_scale = 1.25;
    double max_translation = 0.1;  // fraction of the image side
    double max_shear = 0.1;
    // Per-quadrant perturbation on top of the global draw (quadsplit).
    double quad_rotation_deg = 6.0;
    double quad_scale = 0.06;
    double quad_translation = 0.03;
    // Forced draws, for tests.
    bool identity = false;
    bool translation_only = false;
};

/// Random affine about the image center mapping target pixels to source pixels.
Affine2D random_global_affine(std::mt19937_64& rng, int height, int width, const SynthOptions& opts);

/// A generated pair: target = warp_image(source, gt) exactly.
struct SyntheticPair {
    Image source;
    Image target;
    AffineField gt;
    /// Target pixels whose ground-truth source location lies inside the source.
    ObjectMask mask;
};

/// Requires a minimum side of 64 pixels.
SyntheticPair synth_pair(const Image& source, std::mt19937_64& rng, SynthMode mode, const SynthOptions& opts = {});

/// Foreground of a target->source field: pixels mapped inside the source image.
ObjectMask mapped_inside(const AffineField& field, int source_h, int source_w);

/// Layered random discs and rectangles over a smooth gradient, values in [0, 1].
Image procedural_texture(std::mt19937_64& rng, int height, int width);

}  // namespace affield
