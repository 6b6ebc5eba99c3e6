#include "nops/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "nops/ablation.hpp"
#include "nops/binary.hpp"
#include "nops/class_map.hpp"
#include "nops/config.hpp"
#include "nops/eums.hpp"
#include "nops/kitti_io.hpp"
#include "nops/parameters.hpp"
#include "nops/splits.hpp"
#include "nops/synthetic.hpp"
#include "nops/trainer.hpp"

namespace nops::cli {

namespace fs = std::filesystem;

namespace {

/// Flags shared by the data-consuming subcommands. Every value ends up as a
/// `run.*` config key so config.resolved can replay the run.
struct CommonFlags {
    std::string config_file;
    std::string dataset;
    std::string split;
    std::string out;
    std::string class_map;
    std::string seed;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_file, "key=value settings file");
    cmd->add_option("--dataset", f.dataset, "dataset directory, or 'synthetic' for the in-memory toy set");
    cmd->add_option("--split", f.split, "builtin split name or split file");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--class-map", f.class_map, "semantickitti, semanticposs or a class map file");
    cmd->add_option("--set", f.overrides, "extra key=value setting (repeatable)");
}

Config make_config(const CommonFlags& f) {
    Config c = f.config_file.empty() ? Config{} : Config::load(f.config_file);
    for (const auto& kv : f.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.dataset.empty()) c.set("run.dataset", f.dataset);
    if (!f.split.empty()) c.set("run.split", f.split);
    if (!f.out.empty()) c.set("run.out", f.out);
    if (!f.class_map.empty()) c.set("run.class_map", f.class_map);
    if (!f.seed.empty()) c.set("seed", f.seed);
    return c;
}

// Keys of other subcommands are accepted so one settings file (such as a
// config.resolved) can drive every command; only unknown keys are rejected.
void check_unused(const Config& c) {
    const Config probe = c;
    (void)nops_config_from(probe);
    (void)eums_config_from(probe);
    (void)synthetic_config_from(probe);
    for (const char* k : {"run.dataset", "run.split", "run.out", "run.class_map", "run.checkpoint", "run.seeds",
                          "run.grid", "run.sweep", "run.train_seq", "run.val_seq", "synthetic.val_scenes"}) {
        (void)probe.peek(k, "");
    }
    const auto unused = probe.unused();
    if (unused.empty()) return;
    std::string keys;
    for (const auto& k : unused) keys += (keys.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown config keys: " + keys);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream o(path, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write " + path.string());
    o << text;
}

fs::path output_dir(const Config& c) {
    // Not recorded: the resolved file must not depend on where it is written.
    const std::string out = c.peek("run.out", "");
    if (out.empty()) throw std::invalid_argument("--out is required");
    fs::create_directories(out);
    return out;
}

struct Data {
    ClassMap classes;
    SplitSpec split;
    std::vector<LabelledCloud> train;
    std::vector<LabelledCloud> validation;
};

ClassMap resolve_class_map(const Config& c, const fs::path& dataset_dir) {
    const std::string spec = c.get_string("run.class_map", "");
    if (spec.empty()) {
        const fs::path local = dataset_dir / "classes.map";
        if (!fs::exists(local)) throw std::invalid_argument("no --class-map given and " + local.string() + " missing");
        const auto bytes = binary::read_file(local);
        return ClassMap::parse(std::string(bytes.begin(), bytes.end()));
    }
    if (spec == "semantickitti" || spec == "semanticposs") return builtin_class_map(spec);
    const auto bytes = binary::read_file(spec);
    return ClassMap::parse(std::string(bytes.begin(), bytes.end()));
}

SplitSpec resolve_split(const Config& c, const ClassMap& classes, const fs::path& dataset_dir) {
    std::string name = c.get_string("run.split", "");
    if (name.empty()) {
        if (!dataset_dir.empty() && fs::exists(dataset_dir / "split.txt")) {
            name = (dataset_dir / "split.txt").string();
        } else if (classes.dataset == "synthetic") {
            name = "TOY-2^0";
        } else {
            throw std::invalid_argument("--split is required");
        }
    }
    if (fs::is_regular_file(name)) return read_split_file(name, classes);
    return find_builtin_split(classes.dataset, name);
}

Data load_data(const Config& c, bool need_train) {
    Data d;
    const std::string dataset = c.get_string("run.dataset", "synthetic");
    if (dataset == "synthetic") {
        SyntheticConfig train_cfg = synthetic_config_from(c);
        SyntheticConfig val_cfg = train_cfg;
        val_cfg.n_scenes = c.get_size("synthetic.val_scenes", 50);
        val_cfg.seed = train_cfg.seed + 1000003;
        d.classes = synthetic_class_map(train_cfg);
        d.split = resolve_split(c, d.classes, {});
        if (need_train) d.train = generate_synthetic(train_cfg);
        d.validation = generate_synthetic(val_cfg);
        return d;
    }
    const fs::path root(dataset);
    if (!fs::is_directory(root)) throw std::invalid_argument("dataset directory " + dataset + " does not exist");
    d.classes = resolve_class_map(c, root);
    d.split = resolve_split(c, d.classes, root);
    const std::string train_seq = c.get_string("run.train_seq", "00");
    const std::string val_seq = c.get_string("run.val_seq", "01");
    if (need_train) d.train = read_sequence(root / "sequences" / train_seq, d.classes);
    if (fs::is_directory(root / "sequences" / val_seq)) d.validation = read_sequence(root / "sequences" / val_seq, d.classes);
    return d;
}

std::string format_losses(const std::vector<double>& pretrain, const std::vector<double>& finetune) {
    std::ostringstream os;
    os << "stage\tepoch\tloss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < pretrain.size(); ++e) os << "pretrain\t" << e << '\t' << pretrain[e] << '\n';
    for (std::size_t e = 0; e < finetune.size(); ++e) os << "finetune\t" << e << '\t' << finetune[e] << '\n';
    return os.str();
}

int gen_data(const Config& c, std::ostream& err) {
    const fs::path out = output_dir(c);
    SyntheticConfig train_cfg = synthetic_config_from(c);
    SyntheticConfig val_cfg = train_cfg;
    val_cfg.n_scenes = c.get_size("synthetic.val_scenes", 50);
    val_cfg.seed = train_cfg.seed + 1000003;
    check_unused(c);
    const ClassMap classes = synthetic_class_map(train_cfg);
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    write_sequence(generate_synthetic(train_cfg), out / "sequences" / "00");
    write_sequence(generate_synthetic(val_cfg), out / "sequences" / "01");
    write_text(out / "classes.map", classes.to_text());
    write_text(out / "split.txt", format_split_file(split));
    write_text(out / "config.resolved", c.resolved());
    err << "wrote " << train_cfg.n_scenes << " training and " << val_cfg.n_scenes << " validation scenes to "
        << out.string() << '\n';
    return 0;
}

int train_cmd(const Config& c, std::ostream& out, std::ostream& err) {
    const fs::path dir = output_dir(c);
    const NopsConfig cfg = nops_config_from(c);
    const Data data = load_data(c, true);
    check_unused(c);
    write_text(dir / "config.resolved", c.resolved());
    const auto* validation = data.validation.empty() ? nullptr : &data.validation;
    const TrainResult r = train(data.train, data.split, cfg, validation, [&](const EpochMetrics& m) {
        err << "epoch " << m.epoch << " loss " << m.loss << " novel_mIoU " << m.novel_miou << '\n';
    });
    ad::save_checkpoint(r.model.parameters(), dir / "model.ckpt");
    write_text(dir / "metrics.tsv", format_metrics_log(r.log));
    if (validation) {
        const EvalReport rep = evaluate(r.model, *validation, data.split);
        write_text(dir / "report.tsv", format_report(rep));
        out << format_report_table({{"NOPS", rep}});
    }
    return 0;
}

int eval_cmd(const Config& c, std::ostream& out) {
    const fs::path dir = output_dir(c);
    const std::string ckpt = c.get_string("run.checkpoint", "");
    if (ckpt.empty()) throw std::invalid_argument("--checkpoint is required");
    const Data data = load_data(c, false);
    check_unused(c);
    if (data.validation.empty()) throw std::runtime_error("no evaluation scenes found");
    const SegmentationModel model(ad::load_checkpoint(ckpt));
    if (model.base_count() != data.split.base_classes.size() || model.novel_count() != data.split.novel_classes.size()) {
        throw std::runtime_error("checkpoint does not match split " + data.split.split_name);
    }
    const EvalReport rep = evaluate(model, data.validation, data.split);
    write_text(dir / "config.resolved", c.resolved());
    write_text(dir / "report.tsv", format_report(rep));
    const std::string table = format_report_table({{fs::path(ckpt).stem().string(), rep}});
    write_text(dir / "report_table.tsv", table);
    out << table;
    return 0;
}

int baseline_cmd(const Config& c, std::ostream& out, std::ostream& err) {
    const fs::path dir = output_dir(c);
    const EumsConfig cfg = eums_config_from(c);
    const Data data = load_data(c, true);
    check_unused(c);
    write_text(dir / "config.resolved", c.resolved());
    err << "pretraining " << cfg.pretrain.epochs << " epochs, fine-tuning " << cfg.finetune.epochs << " epochs\n";
    const EumsResult r = run_eums(mask_for_training(data.train, data.split), data.split, cfg);
    ad::save_checkpoint(r.model.parameters(), dir / "model.ckpt");
    write_pseudo_labels(dir / "pseudo_labels", r.pseudo_labels);
    write_text(dir / "losses.tsv", format_losses(r.pretrain_loss, r.finetune_loss));
    if (!data.validation.empty()) {
        const EvalReport rep = evaluate(r.model, data.validation, data.split);
        write_text(dir / "report.tsv", format_report(rep));
        out << format_report_table({{"EUMS", rep}});
    }
    return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument("bad seed '" + item + "'");
    }
    if (seeds.empty()) throw std::invalid_argument("no seeds given");
    return seeds;
}

int ablate_cmd(const Config& c, std::ostream& out, std::ostream& err) {
    const fs::path dir = output_dir(c);
    const NopsConfig base = nops_config_from(c);
    const auto seeds = parse_seeds(c.get_string("run.seeds", std::to_string(base.train.seed)));
    const bool grid = c.get_bool("run.grid", true);
    const bool sweep = c.get_bool("run.sweep", true);
    const Data data = load_data(c, true);
    check_unused(c);
    write_text(dir / "config.resolved", c.resolved());
    const auto& eval_set = data.validation.empty() ? data.train : data.validation;
    auto log = [&](const std::string& line) { err << line << '\n'; };
    if (grid) {
        const auto runs = run_ablation(ablation_grid(base), seeds, data.train, eval_set, data.split, log);
        const std::string table = format_ablation(runs);
        write_text(dir / "ablation.tsv", table);
        out << table;
    }
    if (sweep) {
        const auto runs = run_ablation(percentile_sweep(base), seeds, data.train, eval_set, data.split, log);
        const std::string table = format_ablation(runs);
        write_text(dir / "percentile.tsv", table);
        out << table;
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Online novel class discovery for point cloud segmentation", "nops"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, base_flags, ablate_flags;
    std::string scenes, points, val_scenes, checkpoint, seeds;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset (scans, labels, class map, split)");
    gen->add_option("--config", gen_flags.config_file, "key=value settings file");
    gen->add_option("--seed", gen_flags.seed, "random seed");
    gen->add_option("--out", gen_flags.out, "output directory")->required();
    gen->add_option("--scenes", scenes, "training scenes");
    gen->add_option("--points", points, "points per scene");
    gen->add_option("--val-scenes", val_scenes, "validation scenes");
    gen->add_option("--set", gen_flags.overrides, "extra key=value setting (repeatable)");

    auto* tr = app.add_subcommand("train", "train the online discovery model");
    add_common(tr, train_flags);
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev, eval_flags);
    ev->add_option("--checkpoint", checkpoint, "model checkpoint");
    auto* bl = app.add_subcommand("baseline", "run the pretrain / k-means / fine-tune baseline");
    add_common(bl, base_flags);
    auto* ab = app.add_subcommand("ablate", "run the component ladder and the percentile sweep");
    add_common(ab, ablate_flags);
    ab->add_option("--seeds", seeds, "comma separated seeds");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) {
            Config c = make_config(gen_flags);
            if (!scenes.empty()) c.set("synthetic.scenes", scenes);
            if (!points.empty()) c.set("synthetic.points", points);
            if (!val_scenes.empty()) c.set("synthetic.val_scenes", val_scenes);
            return gen_data(c, err);
        }
        if (tr->parsed()) return train_cmd(make_config(train_flags), out, err);
        if (ev->parsed()) {
            Config c = make_config(eval_flags);
            if (!checkpoint.empty()) c.set("run.checkpoint", checkpoint);
            return eval_cmd(c, out);
        }
        if (bl->parsed()) return baseline_cmd(make_config(base_flags), out, err);
        if (ab->parsed()) {
            Config c = make_config(ablate_flags);
            if (!seeds.empty()) c.set("run.seeds", seeds);
            return ablate_cmd(c, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr); }

}  // namespace nops::cli
