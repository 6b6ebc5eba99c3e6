#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nops/class_map.hpp"
#include "nops/cloud.hpp"

namespace nops {

/// Standard splits for "semantickitti" and "semanticposs"; the default toy
/// split for "synthetic". Throws std::invalid_argument for other names.
std::vector<SplitSpec> builtin_splits(const std::string& dataset_name);

/// Looks a split up by name (e.g. "KITTI-4^3") among the builtin ones.
SplitSpec find_builtin_split(const std::string& dataset_name, const std::string& split_name);

/// Builds a split from the novel class names; every other class is base.
SplitSpec make_split(const std::string& dataset_name, const std::string& split_name,
                     const std::vector<std::string>& class_names,
                     const std::vector<std::string>& novel_names);

/// Split file: key=value lines `dataset`, `split_name`, `novel` (comma
/// separated class names). Names are resolved against `classes`.
SplitSpec parse_split_file(const std::string& text, const ClassMap& classes);
SplitSpec read_split_file(const std::filesystem::path& path, const ClassMap& classes);
std::string format_split_file(const SplitSpec& split);

}  // namespace nops
