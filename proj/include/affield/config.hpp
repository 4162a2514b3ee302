#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "affield/pipeline.hpp"

namespace affield {

/// Applies flat key=value lines on top of `base`. Blank lines and text after
/// '#' are ignored. Keys are the ones emitted by PyramidConfig::canonical();
/// `pyramid.k` is accepted as an alias of `pyramid.levels`. Changing the
/// level count resizes the spec list before per-level keys apply, reusing
/// the finest grid spec for added levels. Unknown keys, malformed values and
/// invalid results throw InvalidArgument naming the line.
PyramidConfig parse_config(std::string_view text, const PyramidConfig& base = PyramidConfig::defaults());
PyramidConfig load_config(const std::filesystem::path& path, const PyramidConfig& base = PyramidConfig::defaults());

/// Applies a single "key=value" override.
void apply_override(PyramidConfig& config, std::string_view assignment);

/// fnv1a64 of the canonical text, as 16 lowercase hex digits.
std::string config_hash(const PyramidConfig& config);

}  // namespace affield
