#pragma once

#include <optional>
#include <string>
#include <vector>

#include "affield/networks.hpp"

namespace affield {

struct NamedGradCheck {
    std::string name;
    GradCheckReport report;
};

/// Gradient checks of every layer type in isolation, the composed affine
/// loss, both grid regressor levels and the pixel regressor at toy sizes.
/// fault corrupts one backward rule in every check.
std::vector<NamedGradCheck> run_gradcheck_suite(std::optional<LayerKind> fault = std::nullopt);

}  // namespace affield
