#pragma once

#include <filesystem>
#include <vector>

#include "nops/class_map.hpp"
#include "nops/cloud.hpp"

namespace nops {

/// Reads a SemanticKITTI-style scan pair. The .bin file holds f32 records
/// (x, y, z, remission); the .label file holds one u32 per point whose lower
/// 16 bits are the semantic id. Labels are returned raw (unmapped).
LabelledCloud read_kitti_scan(const std::filesystem::path& bin_path,
                              const std::filesystem::path& label_path);

/// Writes the same format. Coordinates are narrowed to f32, remission is 0
/// and labels must be non-negative.
void write_kitti_scan(const LabelledCloud& cloud, const std::filesystem::path& bin_path,
                      const std::filesystem::path& label_path);

/// Loads every `velodyne/NNNNNN.bin` + `labels/NNNNNN.label` pair of one
/// sequence directory in file-name order and maps labels through `classes`.
std::vector<LabelledCloud> read_sequence(const std::filesystem::path& sequence_dir,
                                         const ClassMap& classes);

void write_sequence(const std::vector<LabelledCloud>& clouds,
                    const std::filesystem::path& sequence_dir);

}  // namespace nops
