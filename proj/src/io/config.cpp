#include "nops/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nops {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument("config key " + key + ": cannot parse '" + text + "'");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        c.set(key, trim(line.substr(eq + 1)));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string* Config::find(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

void Config::record(const std::string& key, const std::string& value) const { effective_[key] = value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    const std::string out = v ? *v : fallback;
    record(key, out);
    return out;
}

std::string Config::peek(const std::string& key, const std::string& fallback) const {
    peeked_.insert(key);
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    const double out = v ? parse_number<double>(key, *v) : fallback;
    record(key, format_double(out));
    return out;
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
    const std::string* v = find(key);
    const std::size_t out = v ? parse_number<std::size_t>(key, *v) : fallback;
    record(key, std::to_string(out));
    return out;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const std::string* v = find(key);
    const std::uint64_t out = v ? parse_number<std::uint64_t>(key, *v) : fallback;
    record(key, std::to_string(out));
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const std::string* v = find(key);
    bool out = fallback;
    if (v) {
        if (*v == "on" || *v == "true" || *v == "1") {
            out = true;
        } else if (*v == "off" || *v == "false" || *v == "0") {
            out = false;
        } else {
            throw std::invalid_argument("config key " + key + ": expected on/off, got '" + *v + "'");
        }
    }
    record(key, out ? "on" : "off");
    return out;
}

std::vector<std::string> Config::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values_) {
        if (!effective_.contains(k) && !peeked_.contains(k)) out.push_back(k);
    }
    return out;
}

std::string Config::resolved() const {
    std::string out;
    for (const auto& [k, v] : effective_) out += k + "=" + v + "\n";
    return out;
}

namespace {

TrainConfig train_from(const Config& c, const std::string& prefix, TrainConfig d, std::uint64_t seed) {
    d.epochs = c.get_size(prefix + ".epochs", d.epochs);
    d.batch_size = c.get_size(prefix + ".batch_size", d.batch_size);
    d.momentum = c.get_double(prefix + ".momentum", d.momentum);
    d.weight_decay = c.get_double(prefix + ".weight_decay", d.weight_decay);
    d.lr_max = c.get_double(prefix + ".lr_max", d.lr_max);
    d.lr_min = c.get_double(prefix + ".lr_min", d.lr_min);
    d.warmup_fraction = c.get_double(prefix + ".warmup_fraction", d.warmup_fraction);
    d.seed = seed;
    return d;
}

ModelConfig model_from(const Config& c, ModelConfig d) {
    d.feature_dim = c.get_size("model.D", d.feature_dim);
    d.hidden = c.get_size("model.hidden", d.hidden);
    d.k = c.get_size("model.k", d.k);
    d.heads = c.get_size("model.heads", d.heads);
    d.overcluster_factor = c.get_size("model.overcluster_factor", d.overcluster_factor);
    d.overcluster_heads = c.get_bool("model.overcluster_heads", d.overcluster_heads);
    d.input_scale = c.get_double("model.input_scale", d.input_scale);
    d.logit_scale = c.get_double("model.logit_scale", d.logit_scale);
    return d;
}

AugmentConfig augment_from(const Config& c) {
    AugmentConfig a;
    a.rotate = c.get_bool("aug.rot", a.rotate);
    a.scale_lo = c.get_double("aug.scale_lo", a.scale_lo);
    a.scale_hi = c.get_double("aug.scale_hi", a.scale_hi);
    a.jitter_sigma = c.get_double("aug.jitter_sigma", a.jitter_sigma);
    return a;
}

}  // namespace

NopsConfig nops_config_from(const Config& c) {
    NopsConfig n;
    const std::uint64_t seed = c.get_u64("seed", 0);
    n.train = train_from(c, "train", n.train, seed);
    n.model = model_from(c, n.model);
    n.augment = augment_from(c);
    n.eps_start = c.get_double("sk.eps_start", n.eps_start);
    n.eps_end = c.get_double("sk.eps_end", n.eps_end);
    n.sinkhorn_iters = c.get_size("sk.iters", n.sinkhorn_iters);
    n.use_queue = c.get_bool("queue.enabled", n.use_queue);
    n.queue.capacity = c.get_size("queue.capacity", n.queue.capacity);
    n.queue.insert_fraction = c.get_double("queue.insert_fraction", n.queue.insert_fraction);
    n.queue.sample_per_class = c.get_size("queue.sample_per_class", n.queue.sample_per_class);
    n.queue.balanced = c.get_bool("queue.balanced", n.queue.balanced);
    n.percentile = c.get_double("unc.p", n.percentile);
    n.phi_on_queue = c.get_bool("unc.phi_on_queue", n.phi_on_queue);
    n.phi_on_pseudo = c.get_bool("unc.phi_on_pseudo", n.phi_on_pseudo);
    n.pretrain_epochs = c.get_size("train.pretrain_epochs", n.pretrain_epochs);
    const std::string head = c.get_string("train.inference_head", "auto");
    if (head != "auto") n.inference_head = std::stoul(head);
    return n;
}

EumsConfig eums_config_from(const Config& c) {
    EumsConfig e;
    e.seed = c.get_u64("seed", 0);
    e.pretrain = train_from(c, "eums.pretrain", e.pretrain, e.seed);
    e.finetune = train_from(c, "eums.finetune", e.finetune, e.seed);
    e.model = model_from(c, e.model);
    e.augment = augment_from(c);
    e.subsample.ratio = c.get_double("eums.ratio", e.subsample.ratio);
    e.subsample.cap = c.get_size("eums.cap", e.subsample.cap);
    e.overcluster = c.get_bool("eums.overcluster", e.overcluster);
    e.overcluster_factor = c.get_size("eums.overcluster_factor", e.overcluster_factor);
    e.entropy_temperature = c.get_double("eums.entropy_temperature", e.entropy_temperature);
    return e;
}

SyntheticConfig synthetic_config_from(const Config& c) {
    const std::size_t scenes = c.get_size("synthetic.scenes", 200);
    const std::size_t points = c.get_size("synthetic.points", 512);
    const std::uint64_t seed = c.get_u64("synthetic.seed", c.get_u64("seed", 0));
    return toy_config(scenes, points, seed);
}

}  // namespace nops
