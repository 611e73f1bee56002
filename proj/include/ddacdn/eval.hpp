#ifndef DDACDN_EVAL_HPP
#define DDACDN_EVAL_HPP

#include <vector>

#include "ddacdn/detector.hpp"

namespace ddacdn {

struct ClassCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

struct Metrics {
    double precision = 0, recall = 0, f1 = 0, acc = 0;
};

// Greedy one-to-one matching per class: detections in confidence order, each
// matched to the highest-IoU unmatched same-class ground truth with IoU >=
// thresh. Ties: higher IoU, then earlier GT index.
std::vector<ClassCounts> match_detections(const std::vector<Detection>& dets,
                                          const std::vector<ObjectLabel>& gts, double iou_thresh,
                                          int num_classes);

// Per-class presence contingency for one image (Acc needs TN, which box-level
// counting lacks).
std::vector<ClassCounts> image_level_counts(const std::vector<Detection>& dets,
                                            const std::vector<ObjectLabel>& gts, int num_classes);

Metrics metrics(const ClassCounts& c);

void accumulate_counts(std::vector<ClassCounts>& into, const std::vector<ClassCounts>& add);

struct PrPoint {
    double threshold = 0, precision = 0, recall = 0;
};

// One detection/GT instance per index. Sweeps confidence thresholds.
std::vector<PrPoint> pr_curve(const std::vector<std::vector<Detection>>& dets,
                              const std::vector<std::vector<ObjectLabel>>& gts, double iou_thresh,
                              int num_classes, int n_points);

struct SweepRow {
    double iou_thresh = 0;
    std::vector<ClassCounts> per_class;
    double macro_f1 = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // thresholds 0.1 .. 0.9 step 0.1
    double best_threshold = 0;   // F1-maximizing, first on ties
};

SweepResult iou_sweep(const std::vector<std::vector<Detection>>& dets,
                      const std::vector<std::vector<ObjectLabel>>& gts, int num_classes);

double macro_f1(const std::vector<ClassCounts>& per_class);

}  // namespace ddacdn

#endif
