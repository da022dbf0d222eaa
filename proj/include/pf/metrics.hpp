#pragma once
#include <cstdint>
#include <vector>

namespace pf {

// Per-class confusion tallies.
struct ClassCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Per-class metrics use NaN as the undefined marker (class absent from both
// truth and prediction); undefined entries are excluded from the means.
struct MetricsReport {
    int num_classes = 0;
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy; // recall
    std::vector<double> f1;
    std::vector<double> iou;
    std::vector<double> dsc;
    double f1_summary = 0.0;  // class-1 F1 when binary, macro mean otherwise
    double mean_iou = 0.0;
    double mean_dsc = 0.0;

    double class_iou(int c) const { return iou[static_cast<size_t>(c)]; }
};

std::vector<ClassCounts> confusion_counts(const std::vector<int>& predicted,
                                          const std::vector<int>& truth, int num_classes);

MetricsReport metrics_from_confusion(const std::vector<ClassCounts>& counts);

MetricsReport compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                              int num_classes);

bool metric_defined(double v); // false for the NaN marker

} // namespace pf
