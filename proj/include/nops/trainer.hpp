#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nops/augment.hpp"
#include "nops/cloud.hpp"
#include "nops/eval.hpp"
#include "nops/loss.hpp"
#include "nops/model.hpp"
#include "nops/queue.hpp"
#include "nops/sinkhorn.hpp"

namespace nops {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr_max = 1e-2;
    double lr_min = 1e-5;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// Linear warm-up from 0 to lr_max over floor(warmup_fraction * total_steps)
/// steps, then cosine annealing to lr_min at step == total_steps.
double lr_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

/// SGD with momentum and L2 weight decay over the model's trainable
/// parameters, using their accumulated gradients.
void sgd_step(SegmentationModel& model, const TrainConfig& cfg, double lr);

/// Everything the online discovery loop needs.
struct NopsConfig {
    TrainConfig train;
    ModelConfig model;
    AugmentConfig augment;
    double eps_start = 0.3;
    double eps_end = 0.05;
    std::size_t sinkhorn_iters = 3;
    QueueConfig queue;
    bool use_queue = true;
    double percentile = 0.5;
    bool phi_on_queue = true;   // filter queue insertions with the adaptive threshold
    bool phi_on_pseudo = true;  // filter points that receive pseudo-labels
    /// Supervised base-only epochs before discovery (0 = train from scratch).
    std::size_t pretrain_epochs = 0;
    /// Fixed inference head; by default the head with the lowest mean loss
    /// over the final epoch.
    std::optional<std::size_t> inference_head;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double eps = 0.0;
    double novel_miou = 0.0;
    double base_miou = 0.0;
    double all_miou = 0.0;
};

/// `epoch<TAB>loss<TAB>lr<TAB>eps<TAB>novel_mIoU<TAB>base_mIoU<TAB>all_mIoU`
/// with a header line.
std::string format_metrics_log(const std::vector<EpochMetrics>& log);

struct TrainResult {
    SegmentationModel model;
    std::vector<EpochMetrics> log;
    std::vector<double> final_head_loss;  // mean per novel head, last epoch
    std::size_t skipped_batches = 0;
};

using ProgressFn = std::function<void(const EpochMetrics&)>;

/// Online novel class discovery. Only masked scenes reach the optimizer, so
/// novel ground truth is never available to it. `validation` (labelled) is
/// used solely for the per-epoch metrics; without it the mIoU columns are
/// NaN.
TrainResult train_nops(const std::vector<TrainingScene>& scenes, const SplitSpec& split, const NopsConfig& cfg,
                       const std::vector<LabelledCloud>* validation = nullptr, const ProgressFn& progress = {});

/// Masks `dataset` with the split and calls train_nops.
TrainResult train(const std::vector<LabelledCloud>& dataset, const SplitSpec& split, const NopsConfig& cfg,
                  const std::vector<LabelledCloud>* validation = nullptr, const ProgressFn& progress = {});

/// Supervised training of the feature extractor and base head on base
/// points only (one augmented view per scene). Returns the mean loss per
/// epoch.
std::vector<double> pretrain_base(SegmentationModel& model, const std::vector<TrainingScene>& scenes,
                                  const TrainConfig& cfg, const AugmentConfig& augment);

/// Supervised training on one augmented view per scene over the label space
/// [base | novel head `head`]. Base points use their ground truth; novel
/// points use `novel_labels[scene][point]` when it is >= 0 and are ignored
/// otherwise. An empty `novel_labels` trains the base head alone.
std::vector<double> train_supervised(SegmentationModel& model, const std::vector<TrainingScene>& scenes,
                                     const std::vector<std::vector<int>>& novel_labels, const TrainConfig& cfg,
                                     const AugmentConfig& augment, std::size_t head = 0);

}  // namespace nops
