#include "nops/cloud.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace nops {

bool SplitSpec::is_novel(int cls) const {
    return std::binary_search(novel_classes.begin(), novel_classes.end(), cls);
}

bool SplitSpec::is_base(int cls) const {
    return std::binary_search(base_classes.begin(), base_classes.end(), cls);
}

int SplitSpec::base_index(int cls) const {
    auto it = std::lower_bound(base_classes.begin(), base_classes.end(), cls);
    if (it == base_classes.end() || *it != cls) return -1;
    return static_cast<int>(it - base_classes.begin());
}

void validate(const SplitSpec& split) {
    const int n = static_cast<int>(split.class_names.size());
    if (split.novel_classes.empty()) throw std::invalid_argument("split '" + split.split_name + "' has no novel classes");
    if (!std::is_sorted(split.base_classes.begin(), split.base_classes.end()) ||
        !std::is_sorted(split.novel_classes.begin(), split.novel_classes.end())) {
        throw std::invalid_argument("split class lists must be sorted");
    }
    std::set<int> seen;
    for (const auto* list : {&split.base_classes, &split.novel_classes}) {
        for (int c : *list) {
            if (c < 0 || c >= n) throw std::invalid_argument("class id " + std::to_string(c) + " out of range");
            if (!seen.insert(c).second) {
                throw std::invalid_argument("class " + split.class_names[c] + " is both base and novel");
            }
        }
    }
    if (static_cast<int>(seen.size()) != n) {
        throw std::invalid_argument("split '" + split.split_name + "' does not cover every class");
    }
}

std::size_t TrainingScene::count(PointRole role) const {
    return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

TrainingScene mask_for_training(const LabelledCloud& cloud, const SplitSpec& split) {
    if (cloud.labels.size() != cloud.coords.size()) {
        throw std::invalid_argument("scene " + cloud.scene_id + ": label count differs from point count");
    }
    TrainingScene scene;
    scene.scene_id = cloud.scene_id;
    scene.coords = cloud.coords;
    scene.roles.resize(cloud.size());
    scene.base_target.assign(cloud.size(), -1);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const int label = cloud.labels[i];
        if (label == kIgnoreLabel) {
            scene.roles[i] = PointRole::Ignored;
        } else if (const int b = split.base_index(label); b >= 0) {
            scene.roles[i] = PointRole::Base;
            scene.base_target[i] = b;
        } else if (split.is_novel(label)) {
            scene.roles[i] = PointRole::Novel;
        } else {
            throw std::invalid_argument("scene " + cloud.scene_id + ": label " + std::to_string(label) +
                                        " is outside split " + split.split_name);
        }
    }
    return scene;
}

std::vector<TrainingScene> mask_for_training(const std::vector<LabelledCloud>& clouds,
                                             const SplitSpec& split) {
    std::vector<TrainingScene> out;
    out.reserve(clouds.size());
    for (const auto& c : clouds) out.push_back(mask_for_training(c, split));
    return out;
}

}  // namespace nops
