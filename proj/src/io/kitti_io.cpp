#include "nops/kitti_io.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "nops/binary.hpp"

namespace nops {

LabelledCloud read_kitti_scan(const std::filesystem::path& bin_path, const std::filesystem::path& label_path) {
    const auto scan = binary::read_file(bin_path);
    const auto labels = binary::read_file(label_path);
    if (scan.empty()) throw std::runtime_error(bin_path.string() + ": empty scan");
    if (scan.size() % 16 != 0) {
        throw std::runtime_error(bin_path.string() + ": truncated scan (" + std::to_string(scan.size()) +
                                 " bytes is not a multiple of 16)");
    }
    if (labels.size() % 4 != 0) throw std::runtime_error(label_path.string() + ": truncated label file");
    const std::size_t n = scan.size() / 16;
    if (labels.size() / 4 != n) {
        throw std::runtime_error(bin_path.string() + ": " + std::to_string(n) + " points but " +
                                 std::to_string(labels.size() / 4) + " labels");
    }
    LabelledCloud cloud;
    cloud.scene_id = bin_path.stem().string();
    cloud.coords.resize(n);
    cloud.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = scan.data() + 16 * i;
        for (int a = 0; a < 3; ++a) cloud.coords[i][a] = binary::get_le<float>(rec + 4 * a);
        cloud.labels[i] = static_cast<int>(binary::get_le<std::uint32_t>(labels.data() + 4 * i) & 0xFFFFu);
    }
    return cloud;
}

void write_kitti_scan(const LabelledCloud& cloud, const std::filesystem::path& bin_path,
                      const std::filesystem::path& label_path) {
    if (cloud.labels.size() != cloud.coords.size()) throw std::invalid_argument("label count differs from point count");
    std::vector<std::uint8_t> scan, labels;
    scan.reserve(16 * cloud.size());
    labels.reserve(4 * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (double v : cloud.coords[i]) binary::put_le<float>(scan, static_cast<float>(v));
        binary::put_le<float>(scan, 0.0f);
        if (cloud.labels[i] < 0) throw std::invalid_argument("cannot write negative label");
        binary::put_le<std::uint32_t>(labels, static_cast<std::uint32_t>(cloud.labels[i]));
    }
    binary::write_file(bin_path, scan);
    binary::write_file(label_path, labels);
}

std::vector<LabelledCloud> read_sequence(const std::filesystem::path& sequence_dir, const ClassMap& classes) {
    const auto velodyne = sequence_dir / "velodyne";
    if (!std::filesystem::is_directory(velodyne)) {
        throw std::runtime_error(velodyne.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> bins;
    for (const auto& entry : std::filesystem::directory_iterator(velodyne)) {
        if (entry.path().extension() == ".bin") bins.push_back(entry.path());
    }
    std::sort(bins.begin(), bins.end());
    std::vector<LabelledCloud> out;
    out.reserve(bins.size());
    for (const auto& bin : bins) {
        auto label = sequence_dir / "labels" / bin.filename();
        label.replace_extension(".label");
        LabelledCloud cloud = read_kitti_scan(bin, label);
        cloud.scene_id = sequence_dir.filename().string() + "/" + cloud.scene_id;
        apply_class_map(cloud, classes);
        out.push_back(std::move(cloud));
    }
    return out;
}

void write_sequence(const std::vector<LabelledCloud>& clouds, const std::filesystem::path& sequence_dir) {
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        char stem[16];
        std::snprintf(stem, sizeof stem, "%06zu", i);
        write_kitti_scan(clouds[i], sequence_dir / "velodyne" / (std::string(stem) + ".bin"),
                         sequence_dir / "labels" / (std::string(stem) + ".label"));
    }
}

}  // namespace nops
