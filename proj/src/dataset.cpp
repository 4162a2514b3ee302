#include "affield/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "affield/binary_io.hpp"
#include "affield/error.hpp"
#include "affield/image_io.hpp"

namespace affield {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot read " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        lines.push_back(line);
    }
    return lines;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<TrainingPair> load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InvalidArgument("dataset directory not found: " + dir.string());
    const auto listing = dir / "pairs.txt";
    if (!std::filesystem::exists(listing)) throw InvalidArgument("dataset has no pairs.txt: " + dir.string());
    std::vector<TrainingPair> out;
    const auto lines = read_lines(listing);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::istringstream ss(lines[n]);
        std::vector<std::string> f;
        for (std::string w; ss >> w;) f.push_back(w);
        if (f.empty()) continue;
        if (f.size() < 3 || f.size() > 5)
            throw InvalidArgument("pairs.txt line " + std::to_string(n + 1) + ": expected name source target [mask [gt]]");
        TrainingPair p;
        p.name = f[0];
        p.source = load_pnm(dir / f[1]);
        p.target = load_pnm(dir / f[2]);
        if (p.source.channels() != p.target.channels())
            throw InvalidArgument("pair " + p.name + ": source and target channel counts differ");
        if (f.size() > 3 && f[3] != "-") {
            p.target_mask = load_mask(dir / f[3]);
            if (p.target_mask->height() != p.target.height() || p.target_mask->width() != p.target.width())
                throw ShapeError("pair " + p.name + ": mask does not match the target");
        }
        if (f.size() > 4 && f[4] != "-") {
            p.gt = load_affine_field(dir / f[4]);
            if (p.gt->height() != p.target.height() || p.gt->width() != p.target.width())
                throw ShapeError("pair " + p.name + ": ground truth does not match the target");
        }
        out.push_back(std::move(p));
    }
    return out;
}

void Manifest::set(std::string key, std::string value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = std::move(value);
            return;
        }
    entries_.emplace_back(std::move(key), std::move(value));
}

const std::string* Manifest::get(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

std::string Manifest::text() const {
    std::string s;
    for (const auto& [k, v] : entries_) s += k + "=" + v + "\n";
    return s;
}

void Manifest::save(const std::filesystem::path& path) const {
    const std::string t = text();
    io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(t.data()), t.size()));
}

Manifest Manifest::load(const std::filesystem::path& path) {
    Manifest m;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("malformed manifest line in " + path.string());
        m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
}

void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path) {
    std::string s = "iteration,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) s += std::to_string(i) + "," + num(curve[i]) + "\n";
    io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::vector<Point2> load_keypoints(const std::filesystem::path& path) {
    std::vector<Point2> out;
    const auto lines = read_lines(path);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::istringstream ss(lines[n]);
        double x = 0, y = 0;
        if (!(ss >> x)) continue;
        std::string extra;
        if (!(ss >> y) || (ss >> extra))
            throw InvalidArgument(path.string() + " line " + std::to_string(n + 1) + ": expected 'x y'");
        out.push_back({x, y});
    }
    return out;
}

}  // namespace affield
