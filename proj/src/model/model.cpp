#include "nops/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace nops {

namespace {

constexpr const char* kMetaInferenceHead = "meta.inference_head";
constexpr const char* kMetaK = "meta.knn_k";
constexpr const char* kMetaInputScale = "meta.input_scale";
constexpr const char* kMetaLogitScale = "meta.logit_scale";
constexpr const char* kMetaOverFactor = "meta.overcluster_factor";

ad::Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    ad::Tensor t = ad::Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

ad::Var scale_logits(ad::Var logits, double scale) {
    ad::Tensor factor(logits.shape(), std::vector<double>(logits.value().size(), scale));
    return ad::mul(logits, logits.graph->input(std::move(factor)));
}

void normalize_columns(ad::Tensor& w) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
        double ss = 0.0;
        for (std::size_t r = 0; r < w.rows(); ++r) ss += w(r, c) * w(r, c);
        const double norm = std::sqrt(ss);
        if (norm == 0.0) continue;
        for (std::size_t r = 0; r < w.rows(); ++r) w(r, c) /= norm;
    }
}

bool is_meta(const std::string& name) { return name.rfind("meta.", 0) == 0; }

}  // namespace

void validate(const ModelConfig& cfg) {
    if (cfg.feature_dim == 0 || cfg.hidden == 0) throw std::invalid_argument("model widths must be positive");
    if (cfg.heads == 0) throw std::invalid_argument("model needs at least one novel head");
    if (cfg.overcluster_factor == 0) throw std::invalid_argument("over-clustering factor must be positive");
    if (!(cfg.input_scale > 0.0)) throw std::invalid_argument("input scale must be positive");
    if (!(cfg.logit_scale > 0.0)) throw std::invalid_argument("logit scale must be positive");
}

std::vector<std::vector<std::uint32_t>> knn_indices(std::span<const Point3> coords, std::size_t k) {
    const std::size_t m = coords.size();
    const std::size_t kk = m > 0 ? std::min(k, m - 1) : 0;
    std::vector<std::vector<std::uint32_t>> out(m);
    std::vector<std::pair<double, std::uint32_t>> cand;
    cand.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double dx = coords[i][0] - coords[j][0];
            const double dy = coords[i][1] - coords[j][1];
            const double dz = coords[i][2] - coords[j][2];
            cand.emplace_back(dx * dx + dy * dy + dz * dz, static_cast<std::uint32_t>(j));
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
        out[i].reserve(kk);
        for (std::size_t n = 0; n < kk; ++n) out[i].push_back(cand[n].second);
    }
    return out;
}

ad::Tensor neighbour_mean_matrix(std::span<const Point3> coords, std::size_t k) {
    const std::size_t m = coords.size();
    ad::Tensor a = ad::Tensor::matrix(m, m);
    const auto nn = knn_indices(coords, k);
    for (std::size_t i = 0; i < m; ++i) {
        if (nn[i].empty()) {
            a(i, i) = 1.0;
            continue;
        }
        const double w = 1.0 / static_cast<double>(nn[i].size());
        for (auto j : nn[i]) a(i, j) = w;
    }
    return a;
}

SegmentationModel::SegmentationModel(const ModelConfig& cfg, std::size_t base_classes,
                                     std::size_t novel_classes, std::uint64_t seed)
    : cfg_(cfg), base_count_(base_classes), novel_count_(novel_classes) {
    validate(cfg_);
    if (novel_classes == 0) throw std::invalid_argument("model needs at least one novel class");
    std::mt19937_64 rng(seed);
    const std::size_t h = cfg_.hidden, d = cfg_.feature_dim;
    params_.add("encoder.0.weight", gaussian(3, h, std::sqrt(2.0 / 3.0), rng));
    params_.add("encoder.0.bias", ad::Tensor::matrix(1, h));
    params_.add("encoder.1.weight", gaussian(h, h, std::sqrt(2.0 / static_cast<double>(h)), rng));
    params_.add("encoder.1.bias", ad::Tensor::matrix(1, h));
    params_.add("fuse.weight", gaussian(2 * h, d, std::sqrt(1.0 / static_cast<double>(2 * h)), rng));
    params_.add("fuse.bias", ad::Tensor::matrix(1, d));
    if (base_count_ > 0) {
        params_.add("head.base.weight", gaussian(d, base_count_, std::sqrt(1.0 / static_cast<double>(d)), rng));
        params_.add("head.base.bias", ad::Tensor::matrix(1, base_count_));
    }
    params_.add(kMetaInferenceHead, ad::Tensor::scalar(0.0));
    params_.add(kMetaK, ad::Tensor::scalar(static_cast<double>(cfg_.k)));
    params_.add(kMetaInputScale, ad::Tensor::scalar(cfg_.input_scale));
    params_.add(kMetaLogitScale, ad::Tensor::scalar(cfg_.logit_scale));
    params_.add(kMetaOverFactor, ad::Tensor::scalar(cfg_.overcluster_heads ? cfg_.overcluster_factor : 0.0));
    reset_novel_heads(rng());
}

SegmentationModel::SegmentationModel(ad::ParameterStore params) : params_(std::move(params)) {
    try {
        const auto& enc0 = params_.value("encoder.0.weight");
        const auto& fuse = params_.value("fuse.weight");
        cfg_.hidden = enc0.cols();
        cfg_.feature_dim = fuse.cols();
        if (enc0.rows() != 3 || fuse.rows() != 2 * cfg_.hidden) throw std::invalid_argument("encoder shapes");
        base_count_ = params_.contains("head.base.weight") ? params_.value("head.base.weight").cols() : 0;
        novel_count_ = params_.value(novel_weight_name(0)).cols();
        std::size_t heads = 0;
        while (params_.contains(novel_weight_name(heads))) ++heads;
        cfg_.heads = heads;
        cfg_.k = static_cast<std::size_t>(params_.value(kMetaK)[0]);
        cfg_.input_scale = params_.value(kMetaInputScale)[0];
        cfg_.logit_scale = params_.value(kMetaLogitScale)[0];
        const auto factor = static_cast<std::size_t>(params_.value(kMetaOverFactor)[0]);
        cfg_.overcluster_heads = factor > 0;
        cfg_.overcluster_factor = factor > 0 ? factor : 1;
        for (std::size_t i = 0; i < heads; ++i) {
            if (params_.value(novel_weight_name(i)).rows() != cfg_.feature_dim ||
                params_.value(novel_weight_name(i)).cols() != novel_count_) {
                throw std::invalid_argument("novel head shapes");
            }
            if (cfg_.overcluster_heads && params_.value(over_weight_name(i)).cols() != over_count()) {
                throw std::invalid_argument("over-clustering head shapes");
            }
        }
        validate(cfg_);
        if (inference_head() >= heads) throw std::invalid_argument("inference head index");
    } catch (const std::out_of_range& e) {
        throw std::invalid_argument(std::string("checkpoint is missing a model tensor: ") + e.what());
    }
}

std::string SegmentationModel::novel_weight_name(std::size_t head) {
    return "head.novel." + std::to_string(head) + ".weight";
}

std::string SegmentationModel::over_weight_name(std::size_t head) {
    return "head.over." + std::to_string(head) + ".weight";
}

void SegmentationModel::init_head(const std::string& name, std::size_t rows, std::size_t cols,
                                  std::uint64_t seed, bool replace) {
    std::mt19937_64 rng(seed);
    ad::Tensor w = gaussian(rows, cols, 1.0, rng);
    normalize_columns(w);
    if (replace && params_.contains(name)) {
        params_.value(name) = std::move(w);
        params_.grad(name).fill(0.0);
        params_.entries().at(name).momentum.fill(0.0);
    } else {
        params_.add(name, std::move(w));
    }
}

void SegmentationModel::reset_novel_heads(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < cfg_.heads; ++i) {
        init_head(novel_weight_name(i), cfg_.feature_dim, novel_count_, rng(), true);
        if (cfg_.overcluster_heads) init_head(over_weight_name(i), cfg_.feature_dim, over_count(), rng(), true);
    }
}

void SegmentationModel::normalize_prototypes() {
    for (std::size_t i = 0; i < cfg_.heads; ++i) {
        normalize_columns(params_.value(novel_weight_name(i)));
        if (cfg_.overcluster_heads) normalize_columns(params_.value(over_weight_name(i)));
    }
}

std::size_t SegmentationModel::inference_head() const {
    return static_cast<std::size_t>(params_.value(kMetaInferenceHead)[0]);
}

void SegmentationModel::set_inference_head(std::size_t head) {
    if (head >= cfg_.heads) throw std::out_of_range("inference head " + std::to_string(head) + " out of range");
    params_.value(kMetaInferenceHead)[0] = static_cast<double>(head);
}

std::vector<std::string> SegmentationModel::trainable_names() const {
    std::vector<std::string> names;
    for (const auto& [name, _] : params_.entries()) {
        if (!is_meta(name)) names.push_back(name);
    }
    return names;
}

ad::Var SegmentationModel::extract_features(ad::Graph& g, std::span<const Point3> coords) const {
    if (coords.empty()) throw std::invalid_argument("extract_features: empty cloud");
    const std::size_t m = coords.size();
    ad::Tensor x = ad::Tensor::matrix(m, 3);
    for (std::size_t i = 0; i < m; ++i) {
        for (int a = 0; a < 3; ++a) x(i, a) = coords[i][a] * cfg_.input_scale;
    }
    ad::Var in = g.input(std::move(x));
    ad::Var h1 = ad::relu(ad::add(ad::matmul(in, g.parameter("encoder.0.weight")), g.parameter("encoder.0.bias")));
    ad::Var h2 = ad::relu(ad::add(ad::matmul(h1, g.parameter("encoder.1.weight")), g.parameter("encoder.1.bias")));
    ad::Var agg = ad::matmul(g.input(neighbour_mean_matrix(coords, cfg_.k)), h2);
    const ad::Var parts[] = {h2, agg};
    ad::Var fused = ad::concat(parts, 1);
    ad::Var out = ad::add(ad::matmul(fused, g.parameter("fuse.weight")), g.parameter("fuse.bias"));
    return ad::l2_normalize_rows(out);
}

ad::Var SegmentationModel::base_logits(ad::Graph& g, ad::Var features) const {
    if (base_count_ == 0) throw std::logic_error("model has no base head");
    return ad::add(ad::matmul(features, g.parameter("head.base.weight")), g.parameter("head.base.bias"));
}

ad::Var SegmentationModel::novel_logits(ad::Graph& g, ad::Var features, std::size_t head) const {
    if (head >= cfg_.heads) throw std::out_of_range("novel head " + std::to_string(head) + " out of range");
    return scale_logits(ad::matmul(features, g.parameter(novel_weight_name(head))), cfg_.logit_scale);
}

ad::Var SegmentationModel::over_logits(ad::Graph& g, ad::Var features, std::size_t head) const {
    if (!cfg_.overcluster_heads) throw std::logic_error("model has no over-clustering heads");
    if (head >= cfg_.heads) throw std::out_of_range("over-clustering head " + std::to_string(head) + " out of range");
    return scale_logits(ad::matmul(features, g.parameter(over_weight_name(head))), cfg_.logit_scale);
}

SegmentationModel::HeadLogits SegmentationModel::head_logits(ad::Graph& g, ad::Var features,
                                                             std::size_t head) const {
    if (head >= cfg_.heads) throw std::out_of_range("novel head " + std::to_string(head) + " out of range");
    return {base_logits(g, features), novel_logits(g, features, head)};
}

const ad::Tensor& SegmentationModel::prototypes(std::size_t head) const {
    if (head >= cfg_.heads) throw std::out_of_range("novel head " + std::to_string(head) + " out of range");
    return params_.value(novel_weight_name(head));
}

const ad::Tensor& SegmentationModel::over_prototypes(std::size_t head) const {
    if (head >= cfg_.heads || !cfg_.overcluster_heads) throw std::out_of_range("no such over-clustering head");
    return params_.value(over_weight_name(head));
}

ad::Tensor infer_features(const SegmentationModel& model, std::span<const Point3> coords) {
    ad::Graph g(&std::as_const(model.parameters()));
    return model.extract_features(g, coords).value();
}

ad::Tensor infer_logits(const SegmentationModel& model, std::span<const Point3> coords, std::size_t head) {
    ad::Graph g(&std::as_const(model.parameters()));
    ad::Var z = model.extract_features(g, coords);
    auto logits = model.head_logits(g, z, head);
    const ad::Var parts[] = {logits.base, logits.novel};
    return ad::concat(parts, 1).value();
}

}  // namespace nops
