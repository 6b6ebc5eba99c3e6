#include "nops/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nops/selection.hpp"

namespace nops {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs == 0 || cfg.batch_size == 0) throw std::invalid_argument("epochs and batch size must be positive");
    if (cfg.momentum < 0.0 || cfg.weight_decay < 0.0) throw std::invalid_argument("momentum and weight decay must be >= 0");
    if (!(cfg.lr_max > 0.0) || cfg.lr_min < 0.0 || cfg.lr_min > cfg.lr_max) {
        throw std::invalid_argument("learning rates need 0 <= lr_min <= lr_max, lr_max > 0");
    }
    if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0)) {
        throw std::invalid_argument("warmup fraction must lie in [0, 1)");
    }
}

double lr_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) return cfg.lr_max;
    step = std::min(step, total_steps);
    const auto warmup = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup) return cfg.lr_max * static_cast<double>(step) / static_cast<double>(warmup);
    if (step == total_steps) return cfg.lr_min;
    const double t = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(SegmentationModel& model, const TrainConfig& cfg, double lr) {
    for (const auto& name : model.trainable_names()) {
        auto& e = model.parameters().entries().at(name);
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i] + cfg.weight_decay * e.value[i];
            e.momentum[i] = cfg.momentum * e.momentum[i] + g;
            e.value[i] -= lr * e.momentum[i];
        }
    }
}

std::string format_metrics_log(const std::vector<EpochMetrics>& log) {
    std::ostringstream os;
    os << "epoch\tloss\tlr\teps\tnovel_mIoU\tbase_mIoU\tall_mIoU\n";
    os << std::setprecision(17);
    for (const auto& m : log) {
        os << m.epoch << '\t' << m.loss << '\t' << m.lr << '\t' << m.eps << '\t' << m.novel_miou << '\t'
           << m.base_miou << '\t' << m.all_miou << '\n';
    }
    return os.str();
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint64_t out[1];
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    out[0] = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    return out[0];
}

/// Scenes of one step with their points concatenated in scene order.
struct Batch {
    std::vector<const TrainingScene*> scenes;
    std::vector<int> base_target;          // per point, -1 unless Base
    std::vector<std::size_t> novel_rows;   // rows of Novel points
    std::size_t points = 0;
    std::size_t base_points = 0;
};

Batch make_batch(const std::vector<TrainingScene>& scenes, std::span<const std::size_t> order) {
    Batch b;
    for (auto idx : order) {
        const TrainingScene& s = scenes[idx];
        b.scenes.push_back(&s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s.roles[i] == PointRole::Novel) b.novel_rows.push_back(b.points + i);
            if (s.roles[i] == PointRole::Base) ++b.base_points;
            b.base_target.push_back(s.roles[i] == PointRole::Base ? s.base_target[i] : -1);
        }
        b.points += s.size();
    }
    return b;
}

ad::Var batch_features(ad::Graph& g, const SegmentationModel& model, const std::vector<std::vector<Point3>>& views) {
    std::vector<ad::Var> parts;
    parts.reserve(views.size());
    for (const auto& v : views) parts.push_back(model.extract_features(g, v));
    return parts.size() == 1 ? parts.front() : ad::concat(parts, 0);
}

ad::Tensor base_only_targets(const Batch& b, std::size_t width) {
    ad::Tensor t = ad::Tensor::matrix(b.points, width);
    for (std::size_t r = 0; r < b.points; ++r) {
        if (b.base_target[r] >= 0) t(r, static_cast<std::size_t>(b.base_target[r])) = 1.0;
    }
    return t;
}

ad::Tensor softmax_rows(const ad::Tensor& logits) {
    ad::Tensor p = logits;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            s += v;
        }
        for (double& v : row) v /= s;
    }
    return p;
}

ad::Tensor gather_rows(const ad::Tensor& t, std::span<const std::size_t> rows) {
    ad::Tensor out = ad::Tensor::matrix(std::max<std::size_t>(rows.size(), 1), t.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) std::copy(t.row(rows[k]).begin(), t.row(rows[k]).end(), out.row(k).begin());
    return out;
}

/// Pseudo-labelling of one head on one view. Everything here is computed
/// from forward values only, so the targets are constants for backward.
struct ViewTargets {
    ad::Tensor targets;      // points x (|C_b| + rho)
    ad::Tensor novel_probs;  // novel points x rho, network prediction
};

ViewTargets pseudo_label_view(const Batch& b, std::size_t base_count, const ad::Tensor& head_logits,
                              const ad::Tensor& prototypes, const FeatureQueue* queue,
                              double logit_scale, const NopsConfig& cfg, double eps, std::mt19937_64& rng) {
    const std::size_t rho = head_logits.cols();
    ViewTargets out;
    out.targets = base_only_targets(b, base_count + rho);
    if (b.novel_rows.empty()) return out;

    out.novel_probs = softmax_rows(gather_rows(head_logits, b.novel_rows));
    std::vector<std::size_t> selected;
    if (cfg.phi_on_pseudo) {
        selected = select_phi(out.novel_probs, cfg.percentile).kept;
    } else {
        selected.resize(b.novel_rows.size());
        std::iota(selected.begin(), selected.end(), std::size_t{0});
    }
    FeatureQueue::Sample extra;
    if (queue != nullptr) extra = queue->sample(rng);

    // scores: rho x (selected + queued), prototype-feature similarities.
    ad::Tensor scores = ad::Tensor::matrix(rho, selected.size() + extra.size());
    for (std::size_t k = 0; k < selected.size(); ++k) {
        const std::size_t row = b.novel_rows[selected[k]];
        for (std::size_t j = 0; j < rho; ++j) scores(j, k) = head_logits(row, j) / logit_scale;
    }
    for (std::size_t q = 0; q < extra.size(); ++q) {
        auto f = extra.features.row(q);
        for (std::size_t j = 0; j < rho; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < f.size(); ++d) s += f[d] * prototypes(d, j);
            scores(j, selected.size() + q) = s;
        }
    }
    const ad::Tensor q = sinkhorn_assign(scores, eps, cfg.sinkhorn_iters);
    const ad::Tensor labels = pseudo_labels_from(q, selected.size());
    for (std::size_t k = 0; k < selected.size(); ++k) {
        const std::size_t row = b.novel_rows[selected[k]];
        for (std::size_t j = 0; j < rho; ++j) out.targets(row, base_count + j) = labels(k, j);
    }
    return out;
}

void update_queue(FeatureQueue& queue, const Batch& b, const ViewTargets& view, const ad::Tensor& features,
                  const NopsConfig& cfg, std::mt19937_64& rng) {
    if (b.novel_rows.empty()) return;
    std::vector<std::size_t> chosen;
    if (cfg.phi_on_queue) {
        chosen = select_phi(view.novel_probs, cfg.percentile).kept;
    } else {
        chosen.resize(b.novel_rows.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    }
    if (chosen.empty()) return;
    const auto predicted = row_argmax(view.novel_probs);
    std::vector<std::size_t> rows;
    std::vector<int> classes;
    for (auto k : chosen) {
        rows.push_back(b.novel_rows[k]);
        classes.push_back(predicted[k]);
    }
    queue.insert(gather_rows(features, rows), classes, rng);
}

ad::Var scaled(ad::Var v, double factor) { return ad::mul(v, v.graph->input(ad::Tensor::scalar(factor))); }

ad::Var total(std::span<const ad::Var> terms) {
    ad::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return acc;
}

ad::Var combined_probs(ad::Var base, ad::Var head) {
    const ad::Var parts[] = {base, head};
    return ad::softmax_rows(ad::concat(parts, 1));
}

void reset_momentum(SegmentationModel& model) {
    for (auto& [_, e] : model.parameters().entries()) e.momentum.fill(0.0);
}

}  // namespace

std::vector<double> train_supervised(SegmentationModel& model, const std::vector<TrainingScene>& scenes,
                                     const std::vector<std::vector<int>>& novel_labels, const TrainConfig& cfg,
                                     const AugmentConfig& augment, std::size_t head) {
    validate(cfg);
    validate(augment);
    if (scenes.empty()) throw std::invalid_argument("train_supervised: no scenes");
    const bool with_novel = !novel_labels.empty();
    if (with_novel && novel_labels.size() != scenes.size()) {
        throw std::invalid_argument("train_supervised: one novel label vector per scene required");
    }
    for (std::size_t i = 0; with_novel && i < scenes.size(); ++i) {
        if (novel_labels[i].size() != scenes[i].size()) {
            throw std::invalid_argument("train_supervised: novel labels of scene " + std::to_string(i) + " misaligned");
        }
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, with_novel ? 3 : 2));
    const std::size_t nb = model.base_count();
    const std::size_t nn = with_novel ? model.novel_count() : 0;
    const LossWeights lw = base_class_weights(scenes, nb);
    const auto weights = with_novel ? lw.combined(nn) : lw.base;
    const std::size_t steps_per_epoch = (scenes.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    std::vector<double> epoch_loss;
    std::size_t step = 0;
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const auto idx = std::span(order).subspan(start, end - start);
            const Batch b = make_batch(scenes, idx);
            std::vector<std::vector<Point3>> views;
            for (const auto* s : b.scenes) views.push_back(augment_coords(s->coords, augment, rng));
            const double lr = lr_at(cfg, ++step, total_steps);

            ad::Tensor targets = base_only_targets(b, nb + nn);
            std::size_t labelled = b.base_points;
            if (with_novel) {
                std::size_t offset = 0;
                for (auto i : idx) {
                    for (std::size_t p = 0; p < scenes[i].size(); ++p) {
                        const int lab = novel_labels[i][p];
                        if (scenes[i].roles[p] != PointRole::Novel || lab < 0) continue;
                        if (static_cast<std::size_t>(lab) >= nn) throw std::out_of_range("novel pseudo-label out of range");
                        targets(offset + p, nb + static_cast<std::size_t>(lab)) = 1.0;
                        ++labelled;
                    }
                    offset += scenes[i].size();
                }
            }
            if (labelled == 0) continue;

            ad::Graph g(&model.parameters());
            ad::Var z = batch_features(g, model, views);
            ad::Var logits = model.base_logits(g, z);
            ad::Var probs = with_novel ? combined_probs(logits, model.novel_logits(g, z, head)) : ad::softmax_rows(logits);
            ad::Var loss = weighted_ce(probs, targets, weights);
            model.parameters().zero_grad();
            g.backward(loss);
            sgd_step(model, cfg, lr);
            if (with_novel) model.normalize_prototypes();
            loss_sum += loss.value()[0];
            ++batches;
        }
        epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    }
    reset_momentum(model);
    return epoch_loss;
}

std::vector<double> pretrain_base(SegmentationModel& model, const std::vector<TrainingScene>& scenes,
                                  const TrainConfig& cfg, const AugmentConfig& augment) {
    return train_supervised(model, scenes, {}, cfg, augment);
}

TrainResult train_nops(const std::vector<TrainingScene>& scenes, const SplitSpec& split, const NopsConfig& cfg,
                       const std::vector<LabelledCloud>* validation, const ProgressFn& progress) {
    validate(split);
    validate(cfg.train);
    validate(cfg.augment);
    validate(cfg.model);
    EpsilonSchedule schedule{cfg.eps_start, cfg.eps_end, cfg.train.epochs};
    validate(schedule);
    if (!(cfg.percentile >= 0.0 && cfg.percentile < 1.0)) throw std::invalid_argument("percentile must lie in [0, 1)");
    if (scenes.empty()) throw std::invalid_argument("train: empty dataset");

    const std::size_t nb = split.base_classes.size();
    const std::size_t nn = split.novel_classes.size();
    TrainResult result{SegmentationModel(cfg.model, nb, nn, cfg.train.seed), {}, {}, 0};
    SegmentationModel& model = result.model;
    if (cfg.pretrain_epochs > 0) {
        TrainConfig pre = cfg.train;
        pre.epochs = cfg.pretrain_epochs;
        pretrain_base(model, scenes, pre, cfg.augment);
    }

    const std::size_t heads = model.head_count();
    const bool over = model.has_over_heads();
    const LossWeights weights = base_class_weights(scenes, nb);
    const auto novel_weights = weights.combined(nn);
    const auto over_weights = weights.combined(model.over_count());

    std::vector<FeatureQueue> novel_queues, over_queues;
    if (cfg.use_queue) {
        for (std::size_t h = 0; h < heads; ++h) {
            novel_queues.emplace_back(nn, cfg.model.feature_dim, cfg.queue);
            if (over) over_queues.emplace_back(model.over_count(), cfg.model.feature_dim, cfg.queue);
        }
    }

    std::mt19937_64 rng(derive_seed(cfg.train.seed, 1));
    const std::size_t steps_per_epoch = (scenes.size() + cfg.train.batch_size - 1) / cfg.train.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.train.epochs;
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const double eps = epsilon_at(schedule, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0, last_lr = 0.0;
        std::size_t batches = 0;
        std::vector<double> head_loss(heads, 0.0);

        for (std::size_t start = 0; start < order.size(); start += cfg.train.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.train.batch_size);
            const Batch b = make_batch(scenes, std::span(order).subspan(start, end - start));
            std::vector<std::vector<Point3>> views_a, views_b;
            for (const auto* s : b.scenes) {
                views_a.push_back(augment_coords(s->coords, cfg.augment, rng));
                views_b.push_back(augment_coords(s->coords, cfg.augment, rng));
            }
            const double lr = lr_at(cfg.train, ++step, total_steps);
            last_lr = lr;
            if (b.base_points == 0 && b.novel_rows.empty()) {
                std::clog << "warning: skipping batch without base or novel points\n";
                ++result.skipped_batches;
                continue;
            }

            ad::Graph g(&model.parameters());
            ad::Var za = batch_features(g, model, views_a);
            ad::Var zb = batch_features(g, model, views_b);
            ad::Var base_a = model.base_logits(g, za);
            ad::Var base_b = model.base_logits(g, zb);

            auto head_term = [&](ad::Var la, ad::Var lb, const ad::Tensor& protos, FeatureQueue* queue,
                                 std::span<const double> w) {
                ViewTargets ta = pseudo_label_view(b, nb, la.value(), protos, queue, cfg.model.logit_scale, cfg, eps, rng);
                ViewTargets tb = pseudo_label_view(b, nb, lb.value(), protos, queue, cfg.model.logit_scale, cfg, eps, rng);
                if (queue != nullptr) update_queue(*queue, b, ta, za.value(), cfg, rng);
                return swapped_loss(combined_probs(base_a, la), combined_probs(base_b, lb), ta.targets, tb.targets, w);
            };

            std::vector<ad::Var> novel_terms, over_terms;
            for (std::size_t h = 0; h < heads; ++h) {
                FeatureQueue* q = cfg.use_queue ? &novel_queues[h] : nullptr;
                ad::Var t = head_term(model.novel_logits(g, za, h), model.novel_logits(g, zb, h), model.prototypes(h),
                                      q, novel_weights);
                head_loss[h] += t.value()[0];
                novel_terms.push_back(t);
                if (over) {
                    FeatureQueue* oq = cfg.use_queue ? &over_queues[h] : nullptr;
                    over_terms.push_back(head_term(model.over_logits(g, za, h), model.over_logits(g, zb, h),
                                                   model.over_prototypes(h), oq, over_weights));
                }
            }
            ad::Var loss = scaled(total(novel_terms), 1.0 / static_cast<double>(heads));
            if (over) loss = ad::add(loss, scaled(total(over_terms), 1.0 / static_cast<double>(heads)));

            model.parameters().zero_grad();
            g.backward(loss);
            sgd_step(model, cfg.train, lr);
            model.normalize_prototypes();
            loss_sum += loss.value()[0];
            ++batches;
        }

        const double denom = batches ? static_cast<double>(batches) : 1.0;
        for (auto& v : head_loss) v /= denom;
        const auto best = static_cast<std::size_t>(std::min_element(head_loss.begin(), head_loss.end()) - head_loss.begin());
        model.set_inference_head(cfg.inference_head ? *cfg.inference_head : best);
        result.final_head_loss = head_loss;

        EpochMetrics m;
        m.epoch = epoch;
        m.loss = loss_sum / denom;
        m.lr = last_lr;
        m.eps = eps;
        if (validation != nullptr && !validation->empty()) {
            const EvalReport r = evaluate(model, *validation, split);
            m.novel_miou = r.novel_miou;
            m.base_miou = r.base_miou;
            m.all_miou = r.all_miou;
        } else {
            m.novel_miou = m.base_miou = m.all_miou = std::numeric_limits<double>::quiet_NaN();
        }
        result.log.push_back(m);
        if (progress) progress(m);
    }
    return result;
}

TrainResult train(const std::vector<LabelledCloud>& dataset, const SplitSpec& split, const NopsConfig& cfg,
                  const std::vector<LabelledCloud>* validation, const ProgressFn& progress) {
    return train_nops(mask_for_training(dataset, split), split, cfg, validation, progress);
}

}  // namespace nops
