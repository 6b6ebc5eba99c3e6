#include "nops/ablation.hpp"

#include <iomanip>
#include <sstream>

namespace nops {

std::vector<AblationEntry> ablation_grid(const NopsConfig& base) {
    const std::size_t pre = base.pretrain_epochs > 0 ? base.pretrain_epochs : base.train.epochs;

    NopsConfig p = base;
    p.pretrain_epochs = pre;
    p.model.overcluster_heads = false;
    p.use_queue = false;
    p.phi_on_queue = false;
    p.phi_on_pseudo = false;

    NopsConfig oc = p;
    oc.model.overcluster_heads = true;

    NopsConfig q = oc;
    q.use_queue = true;
    q.queue.balanced = false;

    NopsConfig np = q;
    np.pretrain_epochs = 0;

    NopsConfig np_plus = np;
    np_plus.phi_on_queue = true;

    NopsConfig np_plus_plus = np;
    np_plus_plus.phi_on_pseudo = true;

    NopsConfig full = np;
    full.queue.balanced = true;
    full.phi_on_queue = true;
    full.phi_on_pseudo = true;

    return {{"P", p}, {"OC", oc}, {"Q", q}, {"NP", np}, {"NP+", np_plus}, {"NP++", np_plus_plus}, {"Full", full}};
}

std::vector<AblationEntry> percentile_sweep(const NopsConfig& base) {
    const NopsConfig full = ablation_grid(base).back().config;
    std::vector<AblationEntry> out;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        NopsConfig c = full;
        c.percentile = p;
        std::ostringstream name;
        name << "p=" << p;
        out.push_back({name.str(), c});
    }
    return out;
}

NopsConfig without_queue_and_filters(const NopsConfig& base) {
    NopsConfig c = base;
    c.pretrain_epochs = 0;
    c.model.overcluster_heads = true;
    c.use_queue = false;
    c.phi_on_queue = false;
    c.phi_on_pseudo = false;
    return c;
}

std::vector<AblationRun> run_ablation(const std::vector<AblationEntry>& entries, const std::vector<std::uint64_t>& seeds,
                                      const std::vector<LabelledCloud>& train_set,
                                      const std::vector<LabelledCloud>& eval_set, const SplitSpec& split,
                                      const std::function<void(const std::string&)>& log) {
    const auto scenes = mask_for_training(train_set, split);
    std::vector<AblationRun> runs;
    for (const auto& entry : entries) {
        AblationRun run;
        run.name = entry.name;
        run.seeds = seeds;
        for (auto seed : seeds) {
            NopsConfig cfg = entry.config;
            cfg.train.seed = seed;
            const TrainResult r = train_nops(scenes, split, cfg);
            run.reports.push_back(evaluate(r.model, eval_set, split));
            const auto& rep = run.reports.back();
            run.mean_novel += rep.novel_miou / static_cast<double>(seeds.size());
            run.mean_base += rep.base_miou / static_cast<double>(seeds.size());
            run.mean_all += rep.all_miou / static_cast<double>(seeds.size());
            if (log) {
                std::ostringstream os;
                os << entry.name << " seed " << seed << ": novel mIoU " << std::fixed << std::setprecision(4)
                   << rep.novel_miou;
                log(os.str());
            }
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::string format_ablation(const std::vector<AblationRun>& runs) {
    std::ostringstream os;
    os << "config\tseeds\tnovel_mIoU\tbase_mIoU\tall_mIoU\tnovel_per_seed\n" << std::fixed << std::setprecision(4);
    for (const auto& r : runs) {
        os << r.name << '\t' << r.seeds.size() << '\t' << r.mean_novel << '\t' << r.mean_base << '\t' << r.mean_all
           << '\t';
        for (std::size_t i = 0; i < r.reports.size(); ++i) os << (i ? "," : "") << r.reports[i].novel_miou;
        os << '\n';
    }
    return os.str();
}

}  // namespace nops
