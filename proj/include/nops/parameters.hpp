#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nops/tensor.hpp"

namespace nops::ad {

/// Named trainable tensors with gradient and optimizer slots, kept in name
/// order so that serialization is canonical.
class ParameterStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor momentum;
    };

    void add(const std::string& name, Tensor init);
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    void zero_grad();
    std::size_t parameter_count() const;

private:
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    std::map<std::string, Entry> entries_;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointFormat = 1;

/// Checkpoint layout (all integers and floats little-endian):
///   "NOPS" | u32 format | u32 count |
///   count x ( u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 values )
std::vector<std::uint8_t> serialize(const ParameterStore& store);
ParameterStore deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace nops::ad
