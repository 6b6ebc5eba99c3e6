#include "nops/parameters.hpp"

#include "nops/binary.hpp"

namespace nops::ad {

void ParameterStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    Entry e;
    e.grad = Tensor(init.shape(), 0.0);
    e.momentum = Tensor(init.shape(), 0.0);
    e.value = std::move(init);
    entries_.emplace(name, std::move(e));
}

ParameterStore::Entry& ParameterStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParameterStore::value(const std::string& name) { return entry(name).value; }
const Tensor& ParameterStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParameterStore::grad(const std::string& name) { return entry(name).grad; }
const Tensor& ParameterStore::grad(const std::string& name) const { return entry(name).grad; }

void ParameterStore::zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
}

std::vector<std::uint8_t> serialize(const ParameterStore& store) {
    std::vector<std::uint8_t> out = {'N', 'O', 'P', 'S'};
    binary::put_le<std::uint32_t>(out, kCheckpointFormat);
    binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& [name, e] : store.entries()) {
        binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        binary::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
        for (auto d : e.value.shape()) binary::put_le<std::uint64_t>(out, d);
        for (double v : e.value.values()) binary::put_le<double>(out, v);
    }
    return out;
}

ParameterStore deserialize(const std::vector<std::uint8_t>& bytes) {
    try {
        binary::Reader in(bytes);
        if (in.read_string(4) != "NOPS") throw CheckpointError("bad checkpoint magic");
        const auto format = in.read<std::uint32_t>();
        if (format != kCheckpointFormat) {
            throw CheckpointError("unsupported checkpoint format " + std::to_string(format));
        }
        const auto count = in.read<std::uint32_t>();
        ParameterStore store;
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto name_len = in.read<std::uint32_t>();
            std::string name = in.read_string(name_len);
            const auto rank = in.read<std::uint32_t>();
            Shape shape(rank);
            for (auto& d : shape) d = in.read<std::uint64_t>();
            const std::size_t n = element_count(shape);
            if (n * sizeof(double) > in.remaining()) throw CheckpointError("truncated tensor '" + name + "'");
            std::vector<double> values(n);
            for (auto& v : values) v = in.read<double>();
            store.add(name, Tensor(std::move(shape), std::move(values)));
        }
        if (!in.done()) throw CheckpointError("trailing bytes after checkpoint");
        return store;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
    binary::write_file(path, serialize(store));
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
    return deserialize(binary::read_file(path));
}

}  // namespace nops::ad
