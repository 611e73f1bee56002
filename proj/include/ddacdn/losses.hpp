#ifndef DDACDN_LOSSES_HPP
#define DDACDN_LOSSES_HPP

#include <vector>

#include "ddacdn/bbox.hpp"
#include "ddacdn/tensor.hpp"

namespace ddacdn {

struct FocalParams {
    double alpha = 0.25;  // weight of positives; negatives get 1 - alpha
    double gamma = 1.5;
    // When set, the alpha factor is forced to 1 regardless of the target
    // (useful to recover plain BCE at gamma = 0).
    bool unit_alpha = false;
};

struct LossWeights {
    double eta_box = 0.05;
    double eta_cls = 0.5;
    double eta_obj = 1.0;
    double beta[3] = {0.1, 0.1, 0.1};       // per-scale domain loss weights
    double balance[3] = {4.0, 1.0, 0.4};    // objectness balance H_i per scale
};

// Stable BCE with logits: max(x,0) - x*p + log(1 + exp(-|x|)).
double bce_logits(double target, double logit);
Tensor bce_logits(const Tensor& target, const Tensor& logit);

// alpha_t * (1 - p_t)^gamma * bce, with p_t = p*sigma(x) + (1-p)*(1-sigma(x)).
double focal(double target, double logit, const FocalParams& fp);
Tensor focal(const Tensor& target, const Tensor& logit, const FocalParams& fp);

// Differentiable GIoU on corner-coordinate scalar tensors. Boxes must have
// strictly positive enclosing area.
Tensor giou(const Tensor& ax1, const Tensor& ay1, const Tensor& ax2, const Tensor& ay2,
            const Tensor& bx1, const Tensor& by1, const Tensor& bx2, const Tensor& by2);

// Per-scale target grids for one sample. Cells are row-major j = row*S + col.
struct ScaleAssignment {
    int grid = 0;        // S_i
    int num_classes = 0;
    std::vector<double> obj_target;   // S*S, 1 for responsible cells
    std::vector<double> cls_target;   // S*S*C one-hot rows for responsible cells
    std::vector<BBox> box_target;     // S*S, valid where obj_target == 1
};

struct TargetAssignment {
    std::vector<ScaleAssignment> scales;  // size 3
    bool has_objects = false;
};

// Raw per-scale prediction tensors for one sample, shape (M*(5+C), S, S)
// with channel layout [tx, ty, tw, th, obj, cls...] (M = 1).
struct SamplePredictions {
    std::vector<Tensor> scales;
};

// Eq. 4: focal over classes of responsible cells, summed over the 3 scales.
Tensor cls_loss(const TargetAssignment& assign, const SamplePredictions& preds,
                const FocalParams& fp);

// Objectness focal over ALL cells (positives target 1, negatives 0),
// weighted per scale by balance H_i.
Tensor obj_loss(const TargetAssignment& assign, const SamplePredictions& preds,
                const FocalParams& fp, const LossWeights& w);

// Sum over responsible slots of (1 - giou(target, decoded prediction)).
Tensor box_loss(const TargetAssignment& assign, const SamplePredictions& preds);

// eta_box*box + lambda_obj*(eta_cls*cls + eta_obj*obj) + dom
Tensor total_loss(const Tensor& box, const Tensor& cls, const Tensor& obj, const Tensor& dom,
                  int lambda_obj, const LossWeights& w);
double total_loss(double box, double cls, double obj, double dom, int lambda_obj,
                  const LossWeights& w);

}  // namespace ddacdn

#endif
