#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nops/cloud.hpp"
#include "nops/tensor.hpp"

namespace nops {

class SegmentationModel;

/// Rows are ground truth, columns predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    ConfusionMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), counts_(rows * cols, 0) {}
    explicit ConfusionMatrix(std::size_t n) : ConfusionMatrix(n, n) {}

    void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1);
    std::uint64_t operator()(std::size_t gt, std::size_t pred) const { return counts_.at(gt * cols_ + pred); }
    std::uint64_t row_sum(std::size_t gt) const;
    std::uint64_t col_sum(std::size_t pred) const;
    std::uint64_t total() const;
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    void merge(const ConfusionMatrix& other);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint64_t> counts_;
};

/// Counts (label, prediction) pairs over `n_classes`. Points labelled
/// kIgnoreLabel are skipped; any other label or prediction outside
/// [0, n_classes) throws std::out_of_range.
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes);

/// TP / (TP + FP + FN) of a class; nullopt when the denominator is zero.
std::optional<double> class_iou(const ConfusionMatrix& cm, std::size_t cls);

/// Mean IoU over `classes`, skipping classes with a zero denominator. NaN
/// when every class is skipped.
double miou(const ConfusionMatrix& cm, std::span<const int> classes);

/// Aligns novel head outputs to novel classes by maximum summed IoU.
/// `iou_block(i, j)` is the IoU of novel class i against head output j.
/// Returns class_of_output with class_of_output[j] = i.
std::vector<int> match_novel(const ad::Tensor& iou_block);

struct EvalReport {
    std::string split_name;
    std::vector<std::string> class_names;
    std::vector<bool> is_novel;
    std::vector<std::optional<double>> iou;  // one per class
    double novel_miou = 0.0;
    double base_miou = 0.0;
    double all_miou = 0.0;
    std::vector<int> novel_class_of_output;  // class id per novel head output
    ConfusionMatrix cm;
};

/// Scores per-point output slots: slot s < |C_b| means base class
/// base_classes[s]; slot |C_b| + j means novel head output j. Novel outputs
/// are matched to novel classes once over all clouds, then every class is
/// scored on the remapped predictions.
EvalReport evaluate_slots(const std::vector<std::vector<int>>& slots, const std::vector<LabelledCloud>& clouds,
                          const SplitSpec& split);

/// Per-point output slots of a model: argmax over [base | novel head].
std::vector<int> predict_slots(const SegmentationModel& model, std::span<const Point3> coords, std::size_t head);

/// Evaluates the model's inference head on labelled clouds.
EvalReport evaluate(const SegmentationModel& model, const std::vector<LabelledCloud>& clouds, const SplitSpec& split);

/// Long format: one `class<TAB>split<TAB>iou` row per class followed by the
/// novel, base and all mIoU rows.
std::string format_report(const EvalReport& report);

/// Wide format: a header of class names (novel ones starred) plus
/// Novel/Base/All, then one row per named report.
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace nops
