#include "nops/splits.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nops/synthetic.hpp"

namespace nops {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

SplitSpec make_split(const std::string& dataset_name, const std::string& split_name,
                     const std::vector<std::string>& class_names,
                     const std::vector<std::string>& novel_names) {
    SplitSpec s;
    s.dataset_name = dataset_name;
    s.split_name = split_name;
    s.class_names = class_names;
    for (const auto& name : novel_names) {
        auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) {
            throw std::invalid_argument("split " + split_name + ": unknown class '" + name + "'");
        }
        s.novel_classes.push_back(static_cast<int>(it - class_names.begin()));
    }
    std::sort(s.novel_classes.begin(), s.novel_classes.end());
    for (int c = 0; c < static_cast<int>(class_names.size()); ++c) {
        if (!std::binary_search(s.novel_classes.begin(), s.novel_classes.end(), c)) s.base_classes.push_back(c);
    }
    validate(s);
    return s;
}

std::vector<SplitSpec> builtin_splits(const std::string& dataset_name) {
    if (dataset_name == "semantickitti") {
        const auto names = builtin_class_map(dataset_name).class_names;
        return {
            make_split(dataset_name, "KITTI-5^0", names, {"building", "road", "sidewalk", "terrain", "vegetation"}),
            make_split(dataset_name, "KITTI-5^1", names, {"car", "fence", "other-ground", "parking", "trunk"}),
            make_split(dataset_name, "KITTI-5^2", names,
                       {"motorcycle", "other-vehicle", "pole", "traffic-sign", "truck"}),
            make_split(dataset_name, "KITTI-4^3", names, {"bicycle", "bicyclist", "motorcyclist", "person"}),
        };
    }
    if (dataset_name == "semanticposs") {
        const auto names = builtin_class_map(dataset_name).class_names;
        return {
            make_split(dataset_name, "POSS-4^0", names, {"building", "car", "ground", "plants"}),
            make_split(dataset_name, "POSS-3^1", names, {"bike", "fence", "person"}),
            make_split(dataset_name, "POSS-3^2", names, {"pole", "traffic-sign", "trunk"}),
            make_split(dataset_name, "POSS-3^3", names, {"cone-stone", "rider", "trashcan"}),
        };
    }
    if (dataset_name == "synthetic") {
        const auto names = synthetic_class_map(toy_config(1, 1, 0)).class_names;
        return {make_split(dataset_name, "TOY-2^0", names, {names[3], names[4]})};
    }
    throw std::invalid_argument("unknown dataset '" + dataset_name + "'");
}

SplitSpec find_builtin_split(const std::string& dataset_name, const std::string& split_name) {
    for (auto& s : builtin_splits(dataset_name)) {
        if (s.split_name == split_name) return s;
    }
    throw std::invalid_argument("dataset " + dataset_name + " has no split '" + split_name + "'");
}

SplitSpec parse_split_file(const std::string& text, const ClassMap& classes) {
    std::string dataset, split_name, novel;
    bool have_novel = false;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("split file: expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "dataset") dataset = value;
        else if (key == "split_name") split_name = value;
        else if (key == "novel") {
            novel = value;
            have_novel = true;
        } else {
            throw std::invalid_argument("split file: unknown key '" + key + "'");
        }
    }
    if (dataset.empty() || split_name.empty() || !have_novel) {
        throw std::invalid_argument("split file needs dataset, split_name and novel");
    }
    return make_split(dataset, split_name, classes.class_names, split_commas(novel));
}

SplitSpec read_split_file(const std::filesystem::path& path, const ClassMap& classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_split_file(ss.str(), classes);
}

std::string format_split_file(const SplitSpec& split) {
    std::ostringstream os;
    os << "dataset=" << split.dataset_name << '\n' << "split_name=" << split.split_name << '\n' << "novel=";
    for (std::size_t i = 0; i < split.novel_classes.size(); ++i) {
        if (i) os << ',';
        os << split.class_names[split.novel_classes[i]];
    }
    os << '\n';
    return os.str();
}

}  // namespace nops
