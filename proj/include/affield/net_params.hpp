#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affield/tensor.hpp"

namespace affield {

/// One named parameter array (kernel, bias, ...).
struct ParamBlock {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::size_t count() const;
    /// Dims padded to NCHW (leading ones) for use as a graph leaf.
    Shape4 shape4() const;

    friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

/// Ordered parameter blocks of one network plus the seed used to initialize them.
struct NetParams {
    std::vector<ParamBlock> blocks;
    std::uint64_t seed = 0;

    const ParamBlock* find(std::string_view name) const;
    ParamBlock* find(std::string_view name);
    const ParamBlock& get(std::string_view name) const;
    std::size_t total_count() const;

    friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Per-block gradient arrays aligned with NetParams::blocks.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const NetParams& params);
void accumulate(Gradients& into, const Gradients& g, double scale = 1.0);
double gradient_norm(const Gradients& g);

/// Gradient descent with momentum: v <- momentum * v + g; p <- p - lr * v.
class MomentumSgd {
public:
    explicit MomentumSgd(double lr = 1e-3, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}

    void step(NetParams& params, const Gradients& grads);
    double learning_rate() const noexcept { return lr_; }
    void set_learning_rate(double lr) noexcept { lr_ = lr; }

private:
    double lr_;
    double momentum_;
    Gradients velocity_;
};

// PNP1 checkpoints. The seed is stored as a two-element block "meta.seed"
// holding the high and low 32-bit halves.
std::vector<std::uint8_t> encode_params(const NetParams& params);
NetParams decode_params(std::span<const std::uint8_t> bytes);
void save_params(const NetParams& params, const std::filesystem::path& path);
NetParams load_params(const std::filesystem::path& path);

}  // namespace affield
