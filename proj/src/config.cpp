#include "affield/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "affield/error.hpp"

namespace affield {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(std::string_view v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidArgument("not a number: '" + std::string(v) + "'");
    return out;
}

std::vector<int> parse_ints(std::string_view v) {
    std::vector<int> out;
    while (true) {
        const auto comma = v.find(',');
        out.push_back(parse_number<int>(trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

using Setter = std::function<void(PyramidConfig&, std::string_view)>;

template <typename T>
Setter number_into(T TrainingOptions::*field) {
    return [field](PyramidConfig& c, std::string_view v) { c.train.*field = parse_number<T>(v); };
}

const std::map<std::string, Setter, std::less<>>& global_keys() {
    static const std::map<std::string, Setter, std::less<>> keys{
        {"net.grid_widths", [](PyramidConfig& c, std::string_view v) { c.grid_widths = parse_ints(v); }},
        {"net.pixel_widths", [](PyramidConfig& c, std::string_view v) { c.pixel_widths = parse_ints(v); }},
        {"volume.budget_bytes",
         [](PyramidConfig& c, std::string_view v) { c.volume_budget = parse_number<std::size_t>(v); }},
        {"train.iterations", number_into(&TrainingOptions::iterations)},
        {"train.pixel_iterations", number_into(&TrainingOptions::pixel_iterations)},
        {"train.batch", number_into(&TrainingOptions::batch)},
        {"train.lr", number_into(&TrainingOptions::lr)},
        {"train.momentum", number_into(&TrainingOptions::momentum)},
        {"train.clip", number_into(&TrainingOptions::clip)},
        {"train.finetune_steps", number_into(&TrainingOptions::finetune_steps)},
        {"train.finetune_lr", number_into(&TrainingOptions::finetune_lr)},
        {"train.seed", number_into(&TrainingOptions::seed)},
        {"msac.iterations",
         [](PyramidConfig& c, std::string_view v) { c.train.msac.iterations = parse_number<int>(v); }},
        {"msac.threshold",
         [](PyramidConfig& c, std::string_view v) { c.train.msac.inlier_threshold_px = parse_number<double>(v); }},
        {"msac.seed",
         [](PyramidConfig& c, std::string_view v) { c.train.msac.seed = parse_number<std::uint64_t>(v); }},
        {"msac.stride", number_into(&TrainingOptions::msac_stride)},
        {"msac.scales", [](PyramidConfig& c, std::string_view v) { c.train.msac_scales = parse_ints(v); }},
        {"msac.ratio", number_into(&TrainingOptions::msac_ratio)},
        {"supervision.filter_radius", number_into(&TrainingOptions::filter_radius_px)},
        {"supervision.min_samples", number_into(&TrainingOptions::min_samples)},
        {"supervision.min_inlier_ratio", number_into(&TrainingOptions::min_inlier_ratio)},
    };
    return keys;
}

void resize_levels(PyramidConfig& c, int levels) {
    if (levels < 1) throw InvalidArgument("pyramid needs at least one grid level");
    const LevelSpec pixel = c.specs.back();
    std::vector<LevelSpec> grids(c.specs.begin(), c.specs.end() - 1);
    while (static_cast<int>(grids.size()) < levels) {
        LevelSpec s = grids.back();
        s.level = static_cast<int>(grids.size()) + 1;
        grids.push_back(s);
    }
    grids.resize(static_cast<std::size_t>(levels));
    grids.push_back(pixel);
    grids.back().level = levels + 1;
    c.specs = std::move(grids);
    c.levels = levels;
}

bool is_level_count_key(std::string_view key) { return key == "pyramid.levels" || key == "pyramid.k"; }

void apply_level_key(PyramidConfig& c, std::string_view key, std::string_view value) {
    // level.<k|pixel>.<field>
    const auto rest = key.substr(6);
    const auto dot = rest.find('.');
    if (dot == std::string_view::npos) throw InvalidArgument("unknown key '" + std::string(key) + "'");
    const auto which = rest.substr(0, dot), field = rest.substr(dot + 1);
    const int k = which == "pixel" ? c.levels + 1 : parse_number<int>(which);
    if (k < 1 || k > c.levels + 1) throw InvalidArgument("level out of range in '" + std::string(key) + "'");
    LevelSpec& s = c.specs[static_cast<std::size_t>(k - 1)];
    if (field == "scales")
        s.scale_indices = parse_ints(value);
    else if (field == "ratio")
        s.window_ratio = parse_number<double>(value);
    else if (field == "stride")
        s.stride = parse_number<int>(value);
    else
        throw InvalidArgument("unknown key '" + std::string(key) + "'");
}

void apply_pair(PyramidConfig& c, std::string_view key, std::string_view value) {
    if (is_level_count_key(key)) {
        resize_levels(c, parse_number<int>(value));
    } else if (key.starts_with("level.")) {
        apply_level_key(c, key, value);
    } else {
        const auto& keys = global_keys();
        const auto it = keys.find(key);
        if (it == keys.end()) throw InvalidArgument("unknown key '" + std::string(key) + "'");
        it->second(c, value);
    }
}

std::pair<std::string_view, std::string_view> split_assignment(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument("expected key=value, got '" + std::string(line) + "'");
    const auto key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw InvalidArgument("expected key=value, got '" + std::string(line) + "'");
    return {key, value};
}

}  // namespace

PyramidConfig parse_config(std::string_view text, const PyramidConfig& base) {
    PyramidConfig c = base;
    std::vector<std::pair<int, std::string_view>> lines;
    int number = 0;
    while (!text.empty()) {
        ++number;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) lines.emplace_back(number, line);
    }
    // The level count decides how many level.* keys exist, so it goes first.
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& [n, line] : lines) {
            try {
                const auto [key, value] = split_assignment(line);
                if (is_level_count_key(key) == (pass == 0)) apply_pair(c, key, value);
            } catch (const InvalidArgument& e) {
                throw InvalidArgument("config line " + std::to_string(n) + ": " + e.what());
            }
        }
    c.validate();
    return c;
}

PyramidConfig load_config(const std::filesystem::path& path, const PyramidConfig& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), base);
}

void apply_override(PyramidConfig& config, std::string_view assignment) {
    const auto [key, value] = split_assignment(trim(assignment));
    apply_pair(config, key, value);
    config.validate();
}

std::string config_hash(const PyramidConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.canonical())));
    return buf;
}

}  // namespace affield
