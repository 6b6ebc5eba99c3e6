#include <doctest.h>

#include <cmath>
#include <random>

#include "model_gradcheck.hpp"
#include "nops/loss.hpp"
#include "nops/splits.hpp"
#include "nops/synthetic.hpp"
#include "nops/trainer.hpp"

using namespace nops;
using ad::Tensor;

namespace {

std::vector<LabelledCloud> toy(std::size_t scenes, std::size_t points, std::uint64_t seed) {
    return generate_synthetic(toy_config(scenes, points, seed));
}

NopsConfig quick(std::size_t epochs) {
    NopsConfig cfg;
    cfg.train.epochs = epochs;
    cfg.model.feature_dim = 8;
    cfg.model.hidden = 8;
    cfg.model.heads = 2;
    cfg.queue.sample_per_class = 8;
    return cfg;
}

std::vector<LabelledCloud> permute_novel(std::vector<LabelledCloud> data, const SplitSpec& split, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& c : data)
        for (int& l : c.labels)
            if (split.is_novel(l)) l = split.novel_classes[rng() % split.novel_classes.size()];
    return data;
}

}  // namespace

TEST_CASE("weighted cross entropy examples") {
    const std::vector<double> ones(4, 1.0);
    CHECK(weighted_ce(Tensor::from_rows({{0.25, 0.25, 0.25, 0.25}}), Tensor::from_rows({{0, 1, 0, 0}}), ones) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(weighted_ce(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{1, 0}}), std::vector<double>{1, 1}) <= 1e-11);
    const double soft = weighted_ce(Tensor::from_rows({{0.5, 0.5}}), Tensor::from_rows({{0.6, 0.4}}),
                                    std::vector<double>{2, 1});
    CHECK(soft == doctest::Approx(-(2 * 0.6 * std::log(0.5) + 0.4 * std::log(0.5))).epsilon(1e-14));
    CHECK(soft == doctest::Approx(1.1090).epsilon(1e-4));
    // an all-zero target row carries no supervision
    CHECK(weighted_ce(Tensor::from_rows({{0.5, 0.5}, {0.9, 0.1}}), Tensor::from_rows({{0.6, 0.4}, {0, 0}}),
                      std::vector<double>{2, 1}) == doctest::Approx(soft));
    CHECK_THROWS_AS(weighted_ce(Tensor::from_rows({{0.5, 0.5}}), Tensor::from_rows({{1, 0, 0}}),
                                std::vector<double>{1, 1, 1}),
                    ad::ShapeError);
}

TEST_CASE("swapped loss") {
    const std::vector<double> w{1.0, 2.0};
    const Tensor p = Tensor::from_rows({{0.7, 0.3}, {0.2, 0.8}});
    const Tensor t = Tensor::from_rows({{1, 0}, {0.5, 0.5}});
    CHECK(swapped_loss(p, p, t, t, w) == doctest::Approx(2.0 * weighted_ce(p, t, w)));

    const Tensor pa = Tensor::from_rows({{0.9, 0.1}, {0.4, 0.6}}), pb = Tensor::from_rows({{0.6, 0.4}, {0.3, 0.7}});
    const Tensor ta = Tensor::from_rows({{1, 0}, {0.2, 0.8}}), tb = Tensor::from_rows({{0.7, 0.3}, {0, 1}});
    // l(pa, tb) + l(pb, ta), expanded by hand
    const double hand = (-(0.7 * std::log(0.9) + 2 * 0.3 * std::log(0.1)) - 2 * std::log(0.6)) / 2 +
                        (-std::log(0.6) - (0.2 * std::log(0.3) + 2 * 0.8 * std::log(0.7))) / 2;
    CHECK(swapped_loss(pa, pb, ta, tb, w) == doctest::Approx(hand).epsilon(1e-14));
    CHECK_THROWS(swapped_loss(pa, Tensor::from_rows({{0.5, 0.5}}), ta, tb, w));
}

TEST_CASE("base class weights are inverse frequency with mean one") {
    TrainingScene s;
    s.coords.resize(4);
    s.roles = {PointRole::Base, PointRole::Base, PointRole::Base, PointRole::Novel};
    s.base_target = {0, 0, 1, -1};
    const LossWeights w = base_class_weights({s}, 2);
    CHECK(w.base[0] == doctest::Approx(2.0 / 3.0));
    CHECK(w.base[1] == doctest::Approx(4.0 / 3.0));
    CHECK(w.combined(3) == std::vector<double>{w.base[0], w.base[1], 1.0, 1.0, 1.0});
}

TEST_CASE("learning rate schedule") {
    TrainConfig cfg;
    CHECK(lr_at(cfg, 0, 100) == 0.0);
    CHECK(lr_at(cfg, 5, 100) == doctest::Approx(5e-3));
    CHECK(lr_at(cfg, 10, 100) == 1e-2);
    CHECK(lr_at(cfg, 100, 100) == 1e-5);
    CHECK(lr_at(cfg, 55, 100) == doctest::Approx(1e-5 + 0.5 * (1e-2 - 1e-5)));
    for (std::size_t s = 10; s < 100; ++s) CHECK(lr_at(cfg, s + 1, 100) <= lr_at(cfg, s, 100));
    cfg.warmup_fraction = 0.0;
    CHECK(lr_at(cfg, 0, 100) == 1e-2);
}

TEST_CASE("gradients of the swapped objective match finite differences") {
    CHECK(gradcheck::swapped_objective_error(2, 6, 3) < 1e-4);
}

TEST_CASE("one epoch on two scenes") {
    const auto data = toy(2, 64, 1);
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    const TrainResult r = train(data, split, quick(1), &data);
    REQUIRE(r.log.size() == 1);
    CHECK(std::isfinite(r.log[0].loss));
    CHECK(r.log[0].loss >= 0.0);
    CHECK(r.log[0].eps == 0.3);
    CHECK(r.final_head_loss.size() == 2);
    CHECK(r.model.inference_head() < 2);
    const auto no_val = train(data, split, quick(1));
    CHECK(std::isnan(no_val.log[0].novel_miou));
}

TEST_CASE("novel ground truth never reaches training") {
    const auto data = toy(6, 64, 2);
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    const auto a = train(data, split, quick(2));
    const auto b = train(permute_novel(data, split, 9), split, quick(2));
    CHECK(ad::serialize(a.model.parameters()) == ad::serialize(b.model.parameters()));

    SegmentationModel ma(ModelConfig{.feature_dim = 8, .hidden = 8}, 3, 2, 1), mb = ma;
    pretrain_base(ma, mask_for_training(data, split), TrainConfig{.epochs = 1}, AugmentConfig{});
    pretrain_base(mb, mask_for_training(permute_novel(data, split, 4), split), TrainConfig{.epochs = 1},
                  AugmentConfig{});
    CHECK(ad::serialize(ma.parameters()) == ad::serialize(mb.parameters()));
}

TEST_CASE("fixed seed reproduces the metrics log") {
    const auto data = toy(4, 64, 3);
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    NopsConfig cfg = quick(2);
    cfg.pretrain_epochs = 1;
    const auto a = train(data, split, cfg, &data), b = train(data, split, cfg, &data);
    CHECK(format_metrics_log(a.log) == format_metrics_log(b.log));
    cfg.train.seed = 1;
    CHECK(format_metrics_log(train(data, split, cfg, &data).log) != format_metrics_log(a.log));
}

TEST_CASE("metrics log layout") {
    const std::string log = format_metrics_log({EpochMetrics{0, 1.5, 0.01, 0.3, 0.5, 0.25, 0.125}});
    CHECK(log.rfind("epoch\tloss\tlr\teps\tnovel_mIoU\tbase_mIoU\tall_mIoU\n", 0) == 0);
    CHECK(log.find("0\t1.5\t0.01\t0.29999999999999999\t0.5\t0.25\t0.125\n") != std::string::npos);
}

TEST_CASE("batches without base or novel points are skipped") {
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    auto data = toy(2, 64, 5);
    for (int& l : data[1].labels) l = kIgnoreLabel;
    NopsConfig cfg = quick(1);
    cfg.train.batch_size = 1;
    const auto r = train(data, split, cfg);
    CHECK(r.skipped_batches == 1);
    CHECK(std::isfinite(r.log[0].loss));
}

TEST_CASE("base-only pretraining lowers the loss") {
    const SplitSpec split = find_builtin_split("synthetic", "TOY-2^0");
    double first = 0.0, last = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SegmentationModel model(ModelConfig{.feature_dim = 16, .hidden = 16}, 3, 2, seed);
        const auto losses = pretrain_base(model, mask_for_training(toy(40, 128, seed), split),
                                          TrainConfig{.epochs = 5, .seed = seed}, AugmentConfig{});
        REQUIRE(losses.size() == 5);
        first += losses.front();
        last += losses.back();
    }
    CHECK(last <= first);
}

TEST_CASE("invalid training config") {
    CHECK_THROWS(validate(TrainConfig{.epochs = 0}));
    CHECK_THROWS(validate(TrainConfig{.warmup_fraction = 1.0}));
    CHECK_THROWS(validate(TrainConfig{.momentum = -0.1}));
}
