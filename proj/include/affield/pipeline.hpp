#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "affield/cost_volume.hpp"
#include "affield/features.hpp"
#include "affield/field.hpp"
#include "affield/image.hpp"
#include "affield/net_params.hpp"
#include "affield/networks.hpp"
#include "affield/supervision.hpp"

namespace affield {

struct TrainingOptions {
    int iterations = 2000;        // per grid level
    int pixel_iterations = 2000;  // pixel level
    int batch = 8;
    double lr = 0.05;
    double momentum = 0.9;
    /// Gradient norm clip per step; 0 disables.
    double clip = 10.0;
    int finetune_steps = 100;
    double finetune_lr = 5e-3;
    std::uint64_t seed = 0;

    MsacOptions msac{};
    /// Stride and pooling scales of the full-search matching that feeds MSAC.
    int msac_stride = 2;
    std::vector<int> msac_scales{1, 2, 3};
    double msac_ratio = 0.5;
    /// Radius used to restrict level-1 samples to the MSAC estimate.
    double filter_radius_px = 4.0;
    std::size_t min_samples = 6;
    double min_inlier_ratio = 0.25;
};

/// Pyramid layout: `levels` grid levels followed by the pixel level. specs
/// holds levels + 1 entries; specs[k].window_ratio is the search ratio.
struct PyramidConfig {
    int levels = 3;
    std::vector<LevelSpec> specs;
    std::vector<int> grid_widths{32, 32, 64, 64};
    std::vector<int> pixel_widths{16, 32, 64};
    std::size_t volume_budget = kDefaultVolumeBudget;
    TrainingOptions train{};

    static PyramidConfig defaults();
    void validate() const;
    std::vector<double> window_ratios() const;
    /// First k grid levels and the pixel spec.
    PyramidConfig truncated(int k) const;
    /// Canonical key=value text (used for hashing and manifests).
    std::string canonical() const;
};

/// One network per grid level, optional pixel level.
struct PyramidParams {
    std::vector<NetParams> grids;
    std::optional<NetParams> pixel;

    friend bool operator==(const PyramidParams&, const PyramidParams&) = default;
};

/// Cost-volume channel count of a level for an image size.
int volume_channels(const LevelSpec& spec, int image_h, int image_w);

/// Zero-head networks for every level (identity pyramid).
PyramidParams identity_params(const PyramidConfig& config, int image_h, int image_w, bool with_pixel = true);

/// Target-anchored volume between target features and warped-source features.
CostVolume level_volume(const Image& warped_source, const Image& target, const LevelSpec& spec,
                        std::size_t budget = kDefaultVolumeBudget);

struct InferenceResult {
    AffineField final_field;
    std::vector<GridAffineField> grids;
    /// Dense per-level fields (grid levels, then pixel level when present).
    std::vector<AffineField> level_fields;
    /// Composition of levels 1..k after each level.
    std::vector<AffineField> cumulative;
    Image warped;
};

/// Coarse-to-fine inference: at each level the source is warped by the
/// composition of the coarser levels, features and a constrained volume are
/// built against the target, and the level's field is regressed and composed.
InferenceResult run_inference(const Image& source, const Image& target, const PyramidConfig& config,
                              const PyramidParams& params);

struct TrainingPair {
    Image source;
    Image target;
    std::optional<ObjectMask> target_mask;
    std::optional<AffineField> gt;
    std::string name;
};

struct PairDiagnostic {
    std::string pair;
    int level = 0;
    std::size_t samples = 0;
    double inlier_ratio = 1.0;
    std::string reason;
};

struct LevelTrainingResult {
    NetParams params;
    std::vector<double> loss_curve;
    std::vector<PairDiagnostic> dropped;
    std::size_t used_pairs = 0;
};

/// Precomputed network input and supervision of one pair at one level.
struct LevelExample {
    Tensor4 input;
    std::vector<FlowTarget> targets;
    CellLayout layout;
};

/// Builds the level-k example of a pair given the frozen coarser levels.
/// Level 1 also estimates a global affine with MSAC from full-search matches
/// and uses its flow at the consistent inliers as targets. Returns nullopt
/// (with a diagnostic) when the pair falls below the sample floor or the
/// inlier ratio limit.
std::optional<LevelExample> level_example(const TrainingPair& pair, int level, const PyramidConfig& config,
                                          const PyramidParams& frozen, PairDiagnostic& diag);

/// Sequential training of grid level k (1-based), or of the pixel level
/// when k == config.levels + 1. frozen must hold trained levels < k.
LevelTrainingResult train_level(int k, const std::vector<TrainingPair>& dataset, const PyramidConfig& config,
                                const PyramidParams& frozen);

struct LevelFit {
    NetParams params;
    std::vector<double> loss_curve;
};

/// Minibatch momentum SGD on precomputed examples of level k.
LevelFit fit_level(int k, const std::vector<LevelExample>& examples, const PyramidConfig& config, int image_h,
                   int image_w);

struct FinetuneResult {
    PyramidParams params;
    std::vector<double> loss_curve;
    double first_gradient_norm = 0.0;
    /// Gradient norm of the level-1 block at the first step.
    double first_level1_gradient_norm = 0.0;
};

/// Joint updates of all levels through the per-pixel composition, against
/// the supervision of the finest level mapped to the original source frame.
/// Level inputs are recomputed every step; gradients do not flow through the
/// warp into the descriptors.
FinetuneResult finetune_end_to_end(const PyramidParams& params, const std::vector<TrainingPair>& dataset,
                                   const PyramidConfig& config);

struct TrainingRun {
    PyramidParams params;
    std::vector<std::vector<double>> loss_curves;  // per level, pixel last, finetune appended
};

/// Levels 1..K then the pixel level, optionally followed by finetuning.
TrainingRun train_pyramid(const std::vector<TrainingPair>& dataset, const PyramidConfig& config, bool finetune);

/// Checkpoint directory: level_<k>.pnp per grid level and pixel.pnp.
void save_pyramid(const PyramidParams& params, const std::filesystem::path& dir);
PyramidParams load_pyramid(const std::filesystem::path& dir);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace affield
