#include "nops/class_map.hpp"

#include <sstream>
#include <stdexcept>

namespace nops {

namespace builtin_data {
// Generated from data/*.map at configure time.
extern const char* const kSemanticKittiMap;
extern const char* const kSemanticPossMap;
}  // namespace builtin_data

int ClassMap::map(std::uint32_t raw) const {
    auto it = raw_to_class.find(raw);
    if (it == raw_to_class.end()) {
        throw std::out_of_range(dataset + ": raw label " + std::to_string(raw) + " has no mapping");
    }
    return it->second;
}

std::optional<int> ClassMap::id_of(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

ClassMap ClassMap::parse(const std::string& text) {
    ClassMap m;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("class map line " + std::to_string(line_no) + ": " + why);
    };
    while (std::getline(lines, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream in(line);
        std::string directive;
        if (!(in >> directive)) continue;
        if (directive == "dataset") {
            if (!(in >> m.dataset)) fail("missing dataset name");
        } else if (directive == "class") {
            int id = -1;
            std::string name;
            if (!(in >> id >> name)) fail("expected 'class <id> <name>'");
            if (id != static_cast<int>(m.class_names.size())) fail("class ids must be consecutive from 0");
            m.class_names.push_back(name);
        } else if (directive == "map") {
            std::uint32_t raw = 0;
            std::string target;
            if (!(in >> raw >> target)) fail("expected 'map <raw> <class|ignore>'");
            int cls = kIgnoreLabel;
            if (target != "ignore") {
                try {
                    cls = std::stoi(target);
                } catch (const std::exception&) {
                    fail("bad class id '" + target + "'");
                }
                if (cls < 0) fail("negative class id");
            }
            m.raw_to_class[raw] = cls;
        } else {
            fail("unknown directive '" + directive + "'");
        }
    }
    for (const auto& [raw, cls] : m.raw_to_class) {
        if (cls >= static_cast<int>(m.class_names.size())) {
            throw std::invalid_argument("class map: raw " + std::to_string(raw) + " maps to undeclared class");
        }
    }
    return m;
}

std::string ClassMap::to_text() const {
    std::ostringstream os;
    os << "dataset " << dataset << '\n';
    for (std::size_t i = 0; i < class_names.size(); ++i) os << "class " << i << ' ' << class_names[i] << '\n';
    for (const auto& [raw, cls] : raw_to_class) {
        os << "map " << raw << ' ';
        if (cls == kIgnoreLabel) os << "ignore";
        else os << cls;
        os << '\n';
    }
    return os.str();
}

ClassMap builtin_class_map(const std::string& dataset) {
    if (dataset == "semantickitti") return ClassMap::parse(builtin_data::kSemanticKittiMap);
    if (dataset == "semanticposs") return ClassMap::parse(builtin_data::kSemanticPossMap);
    throw std::invalid_argument("no builtin class map for dataset '" + dataset + "'");
}

void apply_class_map(LabelledCloud& cloud, const ClassMap& map) {
    for (int& label : cloud.labels) {
        if (label < 0) throw std::invalid_argument("negative raw label in scene " + cloud.scene_id);
        label = map.map(static_cast<std::uint32_t>(label));
    }
}

}  // namespace nops
