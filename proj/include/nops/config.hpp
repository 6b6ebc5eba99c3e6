#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nops/eums.hpp"
#include "nops/synthetic.hpp"
#include "nops/trainer.hpp"

namespace nops {

/// Flat `key=value` settings. Blank lines and `#` comments are skipped.
/// Every typed read records the effective value, so resolved() lists the
/// settings a run actually used, defaults included.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    bool contains(const std::string& key) const { return values_.contains(key); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    /// Reads a value without recording it in resolved().
    std::string peek(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    /// Accepts on/off, true/false, 1/0.
    bool get_bool(const std::string& key, bool fallback) const;

    /// Keys that were set but never read, sorted.
    std::vector<std::string> unused() const;
    /// Sorted `key=value` lines of every value read so far.
    std::string resolved() const;

private:
    const std::string* find(const std::string& key) const;
    void record(const std::string& key, const std::string& value) const;

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> effective_;
    mutable std::set<std::string> peeked_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

NopsConfig nops_config_from(const Config& c);
EumsConfig eums_config_from(const Config& c);
/// The toy archetypes with `synthetic.scenes`, `synthetic.points` and
/// `synthetic.seed` applied.
SyntheticConfig synthetic_config_from(const Config& c);

}  // namespace nops
