#include "nops/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nops/hungarian.hpp"
#include "nops/model.hpp"

namespace nops {

void ConfusionMatrix::add(std::size_t gt, std::size_t pred, std::uint64_t n) {
    if (gt >= rows_ || pred >= cols_) throw std::out_of_range("confusion matrix index out of range");
    counts_[gt * cols_ + pred] += n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gt) const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < cols_; ++c) s += (*this)(gt, c);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < rows_; ++r) s += (*this)(r, pred);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.rows_ != rows_ || other.cols_ != cols_) throw std::invalid_argument("confusion matrix size mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t n_classes) {
    if (preds.size() != labels.size()) throw std::invalid_argument("confusion: predictions and labels differ in length");
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kIgnoreLabel) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw std::out_of_range("confusion: label " + std::to_string(labels[i]) + " outside the evaluated classes");
        }
        if (preds[i] < 0 || static_cast<std::size_t>(preds[i]) >= n_classes) {
            throw std::out_of_range("confusion: prediction " + std::to_string(preds[i]) + " out of range");
        }
        cm.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]));
    }
    return cm;
}

std::optional<double> class_iou(const ConfusionMatrix& cm, std::size_t cls) {
    const auto tp = cm(cls, cls);
    const auto denom = cm.row_sum(cls) + cm.col_sum(cls) - tp;
    if (denom == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(denom);
}

double miou(const ConfusionMatrix& cm, std::span<const int> classes) {
    double total = 0.0;
    std::size_t n = 0;
    for (int c : classes) {
        if (auto iou = class_iou(cm, static_cast<std::size_t>(c))) {
            total += *iou;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
}

std::vector<int> match_novel(const ad::Tensor& iou_block) {
    const auto output_of_class = max_weight_assignment(iou_block);
    std::vector<int> class_of_output(output_of_class.size(), -1);
    for (std::size_t i = 0; i < output_of_class.size(); ++i) {
        class_of_output[static_cast<std::size_t>(output_of_class[i])] = static_cast<int>(i);
    }
    return class_of_output;
}

EvalReport evaluate_slots(const std::vector<std::vector<int>>& slots, const std::vector<LabelledCloud>& clouds,
                          const SplitSpec& split) {
    if (slots.size() != clouds.size()) throw std::invalid_argument("evaluate: one slot vector per cloud expected");
    const std::size_t n_classes = split.class_count();
    const std::size_t nb = split.base_classes.size();
    const std::size_t nn = split.novel_classes.size();

    ConfusionMatrix raw(n_classes, nb + nn);
    for (std::size_t s = 0; s < clouds.size(); ++s) {
        const auto& labels = clouds[s].labels;
        if (slots[s].size() != labels.size()) throw std::invalid_argument("evaluate: slot count differs from points");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == kIgnoreLabel) continue;
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
                throw std::out_of_range("evaluate: label outside the evaluated classes");
            }
            raw.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(slots[s][i]));
        }
    }

    ad::Tensor block = ad::Tensor::matrix(nn, nn);
    for (std::size_t i = 0; i < nn; ++i) {
        const auto cls = static_cast<std::size_t>(split.novel_classes[i]);
        for (std::size_t j = 0; j < nn; ++j) {
            const auto tp = raw(cls, nb + j);
            const auto denom = raw.row_sum(cls) + raw.col_sum(nb + j) - tp;
            block(i, j) = denom == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(denom);
        }
    }

    EvalReport report;
    report.split_name = split.split_name;
    report.class_names = split.class_names;
    report.is_novel.resize(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) report.is_novel[c] = split.is_novel(static_cast<int>(c));
    const auto novel_index_of_output = match_novel(block);
    for (int idx : novel_index_of_output) report.novel_class_of_output.push_back(split.novel_classes[idx]);

    std::vector<int> class_of_slot(nb + nn);
    for (std::size_t s = 0; s < nb; ++s) class_of_slot[s] = split.base_classes[s];
    for (std::size_t j = 0; j < nn; ++j) class_of_slot[nb + j] = report.novel_class_of_output[j];

    report.cm = ConfusionMatrix(n_classes);
    for (std::size_t gt = 0; gt < n_classes; ++gt) {
        for (std::size_t slot = 0; slot < nb + nn; ++slot) {
            if (auto n = raw(gt, slot)) report.cm.add(gt, static_cast<std::size_t>(class_of_slot[slot]), n);
        }
    }
    report.iou.resize(n_classes);
    std::vector<int> all(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        report.iou[c] = class_iou(report.cm, c);
        all[c] = static_cast<int>(c);
    }
    report.novel_miou = miou(report.cm, split.novel_classes);
    report.base_miou = nb ? miou(report.cm, split.base_classes) : std::numeric_limits<double>::quiet_NaN();
    report.all_miou = miou(report.cm, all);
    return report;
}

std::vector<int> predict_slots(const SegmentationModel& model, std::span<const Point3> coords, std::size_t head) {
    const ad::Tensor logits = infer_logits(model, coords, head);
    std::vector<int> slots(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        slots[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return slots;
}

EvalReport evaluate(const SegmentationModel& model, const std::vector<LabelledCloud>& clouds, const SplitSpec& split) {
    if (model.base_count() != split.base_classes.size() || model.novel_count() != split.novel_classes.size()) {
        throw std::invalid_argument("evaluate: model heads do not match split " + split.split_name);
    }
    std::vector<std::vector<int>> slots;
    slots.reserve(clouds.size());
    for (const auto& c : clouds) slots.push_back(predict_slots(model, c.coords, model.inference_head()));
    return evaluate_slots(slots, clouds, split);
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

}  // namespace

std::string format_report(const EvalReport& report) {
    std::ostringstream os;
    os << "# split " << report.split_name << "; novel outputs aligned to classes by Hungarian matching on IoU\n";
    os << "class\tsplit\tiou\n";
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        os << report.class_names[c] << '\t' << (report.is_novel[c] ? "novel" : "base") << '\t'
           << (report.iou[c] ? fmt(*report.iou[c]) : "nan") << '\n';
    }
    os << "novel_mIoU\tnovel\t" << fmt(report.novel_miou) << '\n';
    os << "base_mIoU\tbase\t" << fmt(report.base_miou) << '\n';
    os << "all_mIoU\tall\t" << fmt(report.all_miou) << '\n';
    return os.str();
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::ostringstream os;
    if (rows.empty()) return {};
    const auto& names = rows.front().second.class_names;
    os << "model";
    for (std::size_t c = 0; c < names.size(); ++c) {
        os << '\t' << names[c] << (rows.front().second.is_novel[c] ? "*" : "");
    }
    os << "\tNovel\tBase\tAll\n";
    for (const auto& [label, r] : rows) {
        os << label;
        for (const auto& iou : r.iou) os << '\t' << (iou ? fmt(*iou) : "nan");
        os << '\t' << fmt(r.novel_miou) << '\t' << fmt(r.base_miou) << '\t' << fmt(r.all_miou) << '\n';
    }
    return os.str();
}

}  // namespace nops
