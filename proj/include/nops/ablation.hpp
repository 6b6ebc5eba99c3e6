#pragma once

#include <string>
#include <vector>

#include "nops/eval.hpp"
#include "nops/trainer.hpp"

namespace nops {

struct AblationEntry {
    std::string name;
    NopsConfig config;
};

/// The component ladder P, OC, Q, NP, NP+, NP++, Full built on `base`.
/// P, OC and Q start from a base-pretrained network (base.pretrain_epochs,
/// or base.train.epochs when that is 0); the others train from scratch.
std::vector<AblationEntry> ablation_grid(const NopsConfig& base);

/// Full configuration at every percentile in {0.1, 0.3, 0.5, 0.7, 0.9}.
std::vector<AblationEntry> percentile_sweep(const NopsConfig& base);

/// From scratch with over-clustering heads and no queue or filters.
NopsConfig without_queue_and_filters(const NopsConfig& base);

struct AblationRun {
    std::string name;
    std::vector<std::uint64_t> seeds;
    std::vector<EvalReport> reports;  // one per seed
    double mean_novel = 0.0;
    double mean_base = 0.0;
    double mean_all = 0.0;
};

/// Trains every entry once per seed on `train_set` and evaluates on
/// `eval_set`.
std::vector<AblationRun> run_ablation(const std::vector<AblationEntry>& entries, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<LabelledCloud>& train_set,
                                      const std::vector<LabelledCloud>& eval_set, const SplitSpec& split,
                                      const std::function<void(const std::string&)>& log = {});

/// `config<TAB>seeds<TAB>novel_mIoU<TAB>base_mIoU<TAB>all_mIoU<TAB>novel per seed`
std::string format_ablation(const std::vector<AblationRun>& runs);

}  // namespace nops
