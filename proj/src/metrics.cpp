#include "pf/metrics.hpp"

#include <cmath>
#include <limits>

#include "pf/errors.hpp"

namespace pf {

namespace {
constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

double mean_defined(const std::vector<double>& xs) {
    double sum = 0.0;
    int n = 0;
    for (double x : xs)
        if (!std::isnan(x)) {
            sum += x;
            ++n;
        }
    return n ? sum / n : kUndefined;
}
} // namespace

bool metric_defined(double v) { return !std::isnan(v); }

std::vector<ClassCounts> confusion_counts(const std::vector<int>& predicted,
                                          const std::vector<int>& truth, int num_classes) {
    if (predicted.size() != truth.size())
        throw ArgumentError("confusion_counts: prediction/truth size mismatch");
    std::vector<ClassCounts> counts(static_cast<size_t>(num_classes));
    for (size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
            throw ArgumentError("confusion_counts: label " + std::to_string(std::min(t, p)) +
                                " outside [0, " + std::to_string(num_classes) + ")");
        for (int c = 0; c < num_classes; ++c) {
            ClassCounts& cc = counts[static_cast<size_t>(c)];
            if (t == c && p == c) cc.tp++;
            else if (t == c) cc.fn++;
            else if (p == c) cc.fp++;
            else cc.tn++;
        }
    }
    return counts;
}

MetricsReport metrics_from_confusion(const std::vector<ClassCounts>& counts) {
    MetricsReport r;
    r.num_classes = static_cast<int>(counts.size());
    std::int64_t correct = 0, total = 0;
    for (const ClassCounts& c : counts) {
        correct += c.tp;
        total += c.tp + c.fn;

        r.per_class_accuracy.push_back(c.tp + c.fn > 0
                                           ? static_cast<double>(c.tp) / (c.tp + c.fn)
                                           : kUndefined);
        const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
        if (c.tp + c.fp + c.fn == 0) {
            r.f1.push_back(kUndefined);
            r.iou.push_back(kUndefined);
            r.dsc.push_back(kUndefined);
        } else {
            r.f1.push_back(static_cast<double>(2 * c.tp) / denom);
            r.iou.push_back(static_cast<double>(c.tp) / (c.tp + c.fp + c.fn));
            r.dsc.push_back(static_cast<double>(2 * c.tp) / denom);
        }
    }
    r.accuracy = total ? static_cast<double>(correct) / total : kUndefined;
    r.mean_iou = mean_defined(r.iou);
    r.mean_dsc = mean_defined(r.dsc);
    r.f1_summary = (r.num_classes == 2) ? r.f1[1] : mean_defined(r.f1);
    return r;
}

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                              int num_classes) {
    return metrics_from_confusion(confusion_counts(predicted, truth, num_classes));
}

} // namespace pf
