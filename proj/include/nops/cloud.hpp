#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nops {

/// Label value for points excluded from training and from every metric.
inline constexpr int kIgnoreLabel = -1;

using Point3 = std::array<double, 3>;

/// One scene: coordinates in meters and one class id per point.
struct LabelledCloud {
    std::vector<Point3> coords;
    std::vector<int> labels;
    std::string scene_id;

    std::size_t size() const { return coords.size(); }
};

/// Partition of the evaluated classes into labelled (base) and unlabelled
/// (novel) sets. Class ids index `class_names`.
struct SplitSpec {
    std::string dataset_name;
    std::string split_name;
    std::vector<std::string> class_names;
    std::vector<int> base_classes;   // sorted
    std::vector<int> novel_classes;  // sorted

    std::size_t class_count() const { return class_names.size(); }
    bool is_novel(int cls) const;
    bool is_base(int cls) const;
    /// Position of a base class within base_classes, or -1.
    int base_index(int cls) const;
};

/// Throws std::invalid_argument unless the split is a disjoint, non-empty
/// cover of its class list.
void validate(const SplitSpec& split);

/// What the training path is allowed to know about a point.
enum class PointRole : std::uint8_t { Base, Novel, Ignored };

/// A scene with novel ground truth removed. Built once at load time so the
/// training code has no access to novel class ids.
struct TrainingScene {
    std::string scene_id;
    std::vector<Point3> coords;
    std::vector<PointRole> roles;
    std::vector<int> base_target;  // base head index for Base points, -1 otherwise

    std::size_t size() const { return coords.size(); }
    std::size_t count(PointRole role) const;
};

TrainingScene mask_for_training(const LabelledCloud& cloud, const SplitSpec& split);
std::vector<TrainingScene> mask_for_training(const std::vector<LabelledCloud>& clouds,
                                             const SplitSpec& split);

}  // namespace nops
