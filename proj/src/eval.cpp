#include "ddacdn/eval.hpp"

#include <algorithm>
#include <stdexcept>

namespace ddacdn {

std::vector<ClassCounts> match_detections(const std::vector<Detection>& dets,
                                          const std::vector<ObjectLabel>& gts, double iou_thresh,
                                          int num_classes) {
    if (iou_thresh <= 0.0 || iou_thresh >= 1.0)
        throw std::invalid_argument("match_detections: iou threshold must be in (0,1)");
    std::vector<Detection> sorted = dets;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    std::vector<ClassCounts> counts(static_cast<size_t>(num_classes));
    std::vector<bool> gt_used(gts.size(), false);
    for (const auto& d : sorted) {
        if (d.class_id < 0 || d.class_id >= num_classes) continue;
        int best = -1;
        double best_iou = 0;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g] || gts[g].class_id != d.class_id) continue;
            double v = iou(d.box, gts[g].box);
            if (v >= iou_thresh && v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            gt_used[static_cast<size_t>(best)] = true;
            ++counts[static_cast<size_t>(d.class_id)].tp;
        } else {
            ++counts[static_cast<size_t>(d.class_id)].fp;
        }
    }
    for (size_t g = 0; g < gts.size(); ++g)
        if (!gt_used[g] && gts[g].class_id >= 0 && gts[g].class_id < num_classes)
            ++counts[static_cast<size_t>(gts[g].class_id)].fn;
    return counts;
}

std::vector<ClassCounts> image_level_counts(const std::vector<Detection>& dets,
                                            const std::vector<ObjectLabel>& gts, int num_classes) {
    std::vector<ClassCounts> counts(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        bool predicted = false, present = false;
        for (const auto& d : dets)
            if (d.class_id == c) predicted = true;
        for (const auto& g : gts)
            if (g.class_id == c) present = true;
        auto& cc = counts[static_cast<size_t>(c)];
        if (present && predicted) ++cc.tp;
        else if (!present && predicted) ++cc.fp;
        else if (present && !predicted) ++cc.fn;
        else ++cc.tn;
    }
    return counts;
}

Metrics metrics(const ClassCounts& c) {
    Metrics m;
    m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
    long total = c.tp + c.tn + c.fp + c.fn;
    m.acc = total > 0 ? static_cast<double>(c.tp + c.tn) / total : 0.0;
    return m;
}

void accumulate_counts(std::vector<ClassCounts>& into, const std::vector<ClassCounts>& add) {
    if (into.empty()) into.resize(add.size());
    if (into.size() != add.size()) throw std::invalid_argument("accumulate_counts: size mismatch");
    for (size_t i = 0; i < add.size(); ++i) {
        into[i].tp += add[i].tp;
        into[i].fp += add[i].fp;
        into[i].fn += add[i].fn;
        into[i].tn += add[i].tn;
    }
}

double macro_f1(const std::vector<ClassCounts>& per_class) {
    if (per_class.empty()) return 0.0;
    double s = 0;
    for (const auto& c : per_class) s += metrics(c).f1;
    return s / static_cast<double>(per_class.size());
}

std::vector<PrPoint> pr_curve(const std::vector<std::vector<Detection>>& dets,
                              const std::vector<std::vector<ObjectLabel>>& gts, double iou_thresh,
                              int num_classes, int n_points) {
    if (n_points < 2) throw std::invalid_argument("pr_curve: need n_points >= 2");
    if (dets.size() != gts.size()) throw std::invalid_argument("pr_curve: instance count mismatch");
    std::vector<PrPoint> curve;
    for (int p = 0; p < n_points; ++p) {
        double thr = static_cast<double>(p) / (n_points - 1);
        std::vector<ClassCounts> total(static_cast<size_t>(num_classes));
        for (size_t i = 0; i < dets.size(); ++i) {
            std::vector<Detection> kept;
            for (const auto& d : dets[i])
                if (d.confidence >= thr) kept.push_back(d);
            accumulate_counts(total, match_detections(kept, gts[i], iou_thresh, num_classes));
        }
        ClassCounts pooled;
        for (const auto& c : total) {
            pooled.tp += c.tp;
            pooled.fp += c.fp;
            pooled.fn += c.fn;
        }
        Metrics m = metrics(pooled);
        curve.push_back(PrPoint{thr, m.precision, m.recall});
    }
    return curve;
}

SweepResult iou_sweep(const std::vector<std::vector<Detection>>& dets,
                      const std::vector<std::vector<ObjectLabel>>& gts, int num_classes) {
    if (dets.size() != gts.size()) throw std::invalid_argument("iou_sweep: instance count mismatch");
    SweepResult res;
    double best_f1 = -1.0;
    for (int t = 1; t <= 9; ++t) {
        SweepRow row;
        row.iou_thresh = t / 10.0;
        row.per_class.resize(static_cast<size_t>(num_classes));
        for (size_t i = 0; i < dets.size(); ++i)
            accumulate_counts(row.per_class,
                              match_detections(dets[i], gts[i], row.iou_thresh, num_classes));
        row.macro_f1 = macro_f1(row.per_class);
        if (row.macro_f1 > best_f1) {
            best_f1 = row.macro_f1;
            res.best_threshold = row.iou_thresh;
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

}  // namespace ddacdn
