#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "affield/geometry.hpp"
#include "affield/pipeline.hpp"

namespace affield {

/// Reads `<dir>/pairs.txt`. Each non-comment line is
///   name source target [mask [gt]]
/// with paths relative to dir and '-' for an absent mask or ground truth.
/// Images are PGM/PPM, masks PGM, ground truth a PAF1 affine field.
std::vector<TrainingPair> load_dataset(const std::filesystem::path& dir);

/// Ordered key=value text file.
class Manifest {
public:
    void set(std::string key, std::string value);
    const std::string* get(std::string_view key) const;
    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    std::string text() const;
    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Loss curve as CSV with header `iteration,loss`.
void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path);

/// One `x y` pair per line; '#' starts a comment.
std::vector<Point2> load_keypoints(const std::filesystem::path& path);

}  // namespace affield
