#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nops/eval.hpp"
#include "nops/hungarian.hpp"
#include "nops/model.hpp"
#include "nops/splits.hpp"
#include "oracles.hpp"

using namespace nops;
using ad::Tensor;

namespace {

// a, b, c = 0, 1, 2
const std::vector<int> kGt{0, 0, 1, 1, 1, 2};
const std::vector<int> kPred{0, 1, 1, 1, 2, 2};

SplitSpec three_class_split() { return make_split("hand", "one-novel", {"a", "b", "c"}, {"c"}); }

std::vector<int> slots_from_classes(const std::vector<int>& classes, const SplitSpec& split,
                                    const std::vector<int>& output_of_novel) {
    std::vector<int> s;
    for (int c : classes) {
        if (split.is_base(c)) {
            s.push_back(split.base_index(c));
        } else {
            const auto pos = std::find(split.novel_classes.begin(), split.novel_classes.end(), c) -
                             split.novel_classes.begin();
            s.push_back(static_cast<int>(split.base_classes.size()) + output_of_novel[static_cast<std::size_t>(pos)]);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("confusion counts") {
    const ConfusionMatrix cm = confusion(kPred, kGt, 3);
    CHECK(cm(0, 0) == 1);
    CHECK(cm(0, 1) == 1);
    CHECK(cm(1, 1) == 2);
    CHECK(cm(1, 2) == 1);
    CHECK(cm(2, 2) == 1);
    CHECK(cm.total() == 6);
    CHECK(confusion(kGt, kGt, 3) == [] {
        ConfusionMatrix d(3);
        d.add(0, 0, 2);
        d.add(1, 1, 3);
        d.add(2, 2, 1);
        return d;
    }());
    CHECK(confusion(std::vector<int>{}, std::vector<int>{}, 3).total() == 0);
    const std::vector<int> with_ignore{0, kIgnoreLabel};
    CHECK(confusion(std::vector<int>{0, 2}, with_ignore, 3).total() == 1);
    CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{3}, 3), std::out_of_range);
    CHECK_THROWS(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 3));
}

TEST_CASE("mIoU hand case") {
    const ConfusionMatrix cm = confusion(kPred, kGt, 3);
    CHECK(class_iou(cm, 0).value() == 0.5);
    CHECK(class_iou(cm, 1).value() == 0.5);
    CHECK(class_iou(cm, 2).value() == 0.5);
    const std::vector<int> all{0, 1, 2};
    CHECK(miou(cm, all) == 0.5);
    CHECK(miou(confusion(kGt, kGt, 3), all) == 1.0);

    ConfusionMatrix absent(4);
    absent.add(0, 0, 3);
    absent.add(1, 0, 1);
    CHECK_FALSE(class_iou(absent, 3).has_value());
    CHECK(miou(absent, std::vector<int>{0, 3}) == 0.75);
    CHECK(std::isnan(miou(absent, std::vector<int>{3})));
}

TEST_CASE("all mIoU is the mean of per-class IoU") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> cls(0, 4);
    std::vector<int> p(300), l(300);
    for (std::size_t i = 0; i < 300; ++i) p[i] = cls(rng), l[i] = cls(rng);
    const ConfusionMatrix cm = confusion(p, l, 5);
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
        const double tp = static_cast<double>(cm(c, c));
        s += tp / static_cast<double>(cm.row_sum(c) + cm.col_sum(c) - cm(c, c));
    }
    CHECK(miou(cm, std::vector<int>{0, 1, 2, 3, 4}) == doctest::Approx(s / 5).epsilon(1e-14));
}

TEST_CASE("novel matching") {
    CHECK(match_novel(Tensor::from_rows({{0.9, 0.1}, {0.2, 0.8}})) == std::vector<int>{0, 1});
    CHECK(match_novel(Tensor::from_rows({{0.1, 0.9}, {0.8, 0.2}})) == std::vector<int>{1, 0});
    CHECK(match_novel(Tensor::from_rows({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}})) == std::vector<int>{1, 2, 0});
}

TEST_CASE("assignment equals brute force") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> v(0, 9);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(t % 5);
        Tensor w = Tensor::matrix(n, n);
        for (auto& x : w.values()) x = v(rng);
        const auto got = max_weight_assignment(w);
        CHECK(assignment_value(w, got) == oracle::brute_force_assignment(w));
        std::vector<int> sorted = got;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == static_cast<int>(i));
    }
    // lexicographically smallest among ties
    CHECK(max_weight_assignment(Tensor::matrix(3, 3)) == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(max_weight_assignment(Tensor::matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("ground truth copy scores one") {
    const SplitSpec split = make_split("hand", "two-novel", {"a", "b", "c", "d"}, {"b", "d"});
    LabelledCloud cloud;
    cloud.labels = {0, 1, 1, 2, 3, 3, 0, kIgnoreLabel};
    cloud.coords.resize(cloud.labels.size());
    std::vector<int> classes = cloud.labels;
    classes.back() = 0;
    // novel outputs swapped relative to class order; matching undoes it
    const EvalReport r = evaluate_slots({slots_from_classes(classes, split, {1, 0})}, {cloud}, split);
    CHECK(r.novel_miou == 1.0);
    CHECK(r.base_miou == 1.0);
    CHECK(r.all_miou == 1.0);
    CHECK(r.novel_class_of_output == std::vector<int>{3, 1});
    CHECK(r.cm.total() == 7);
}

TEST_CASE("constant predictor closed form") {
    const SplitSpec split = three_class_split();
    LabelledCloud cloud;
    cloud.labels = {0, 0, 0, 1, 1, 2, 2, 2, 2, 2};
    cloud.coords.resize(10);
    const EvalReport r = evaluate_slots({std::vector<int>(10, 0)}, {cloud}, split);
    // a predicted everywhere: IoU_a = n_a / n, all others 0
    CHECK(r.iou[0].value() == doctest::Approx(0.3));
    CHECK(r.iou[1].value() == 0.0);
    CHECK(r.iou[2].value() == 0.0);
    CHECK(r.all_miou == doctest::Approx(0.1));
}

TEST_CASE("report schema") {
    const SplitSpec split = three_class_split();
    LabelledCloud cloud;
    cloud.labels = kGt;
    cloud.coords.resize(6);
    const EvalReport r = evaluate_slots({slots_from_classes(kPred, split, {0})}, {cloud}, split);
    CHECK(r.all_miou == 0.5);
    std::istringstream in(format_report(r));
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    // note and header, one row per class, three aggregate rows
    REQUIRE(lines.size() == 2 + 3 + 3);
    CHECK(lines[0].rfind("# split one-novel", 0) == 0);
    CHECK(lines[1] == "class\tsplit\tiou");
    CHECK(lines[2] == "a\tbase\t0.5000");
    CHECK(lines[4] == "c\tnovel\t0.5000");
    CHECK(lines[7] == "all_mIoU\tall\t0.5000");
    const std::string table = format_report_table({{"run", r}});
    CHECK(table == "model\ta\tb\tc*\tNovel\tBase\tAll\nrun\t0.5000\t0.5000\t0.5000\t0.5000\t0.5000\t0.5000\n");
}

TEST_CASE("matched mIoU ignores how novel outputs are numbered") {
    const SplitSpec split = make_split("hand", "three-novel", {"a", "b", "c", "d"}, {"b", "c", "d"});
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cls(0, 3);
    LabelledCloud cloud;
    std::vector<int> pred;
    for (int i = 0; i < 200; ++i) {
        cloud.labels.push_back(cls(rng));
        pred.push_back(rng() % 4 == 0 ? cls(rng) : cloud.labels.back());
    }
    cloud.coords.resize(200);
    const double ref = evaluate_slots({slots_from_classes(pred, split, {0, 1, 2})}, {cloud}, split).all_miou;
    std::vector<int> perm{0, 1, 2};
    while (std::next_permutation(perm.begin(), perm.end()))
        CHECK(evaluate_slots({slots_from_classes(pred, split, perm)}, {cloud}, split).all_miou == ref);
}

TEST_CASE("model evaluation runs end to end") {
    const SplitSpec split = three_class_split();
    const SegmentationModel model(ModelConfig{.feature_dim = 8, .hidden = 8}, 2, 1, 4);
    LabelledCloud cloud;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 30; ++i) {
        cloud.coords.push_back({u(rng), u(rng), u(rng)});
        cloud.labels.push_back(i % 3);
    }
    const EvalReport r = evaluate(model, {cloud}, split);
    CHECK(r.iou.size() == 3);
    CHECK(r.cm.total() == 30);
    const auto slots = predict_slots(model, cloud.coords, 0);
    CHECK(slots.size() == 30);
    for (int s : slots) CHECK((s >= 0 && s < 3));
}
