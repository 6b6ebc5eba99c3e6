#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nops/cloud.hpp"

namespace nops {

/// Raw on-disk label ids -> evaluated class ids, plus class names.
///
/// Text format, one directive per line, '#' starts a comment:
///   dataset <name>
///   class <id> <name>
///   map <raw_id> <class_id | ignore>
struct ClassMap {
    std::string dataset;
    std::vector<std::string> class_names;
    std::map<std::uint32_t, int> raw_to_class;

    /// Throws std::out_of_range for raw ids missing from the table.
    int map(std::uint32_t raw) const;
    std::optional<int> id_of(const std::string& name) const;

    static ClassMap parse(const std::string& text);
    std::string to_text() const;
};

/// Tables shipped in data/ and compiled into the library.
ClassMap builtin_class_map(const std::string& dataset);

/// Rewrites raw label ids in place through the map.
void apply_class_map(LabelledCloud& cloud, const ClassMap& map);

}  // namespace nops
