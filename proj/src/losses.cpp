#include "ddacdn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ddacdn {

double bce_logits(double p, double x) {
    if (p < 0.0 || p > 1.0) throw std::domain_error("bce_logits: target outside [0,1]");
    return std::max(x, 0.0) - x * p + std::log1p(std::exp(-std::abs(x)));
}

Tensor bce_logits(const Tensor& target, const Tensor& logit) {
    for (int64_t i = 0; i < target.size(); ++i)
        if ((*target.data)[i] < 0.0 || (*target.data)[i] > 1.0)
            throw std::domain_error("bce_logits: target outside [0,1]");
    Tensor abs_x = add(relu(logit), relu(neg(logit)));
    Tensor softplus = log(add(exp(neg(abs_x)), 1.0));
    return add(sub(relu(logit), mul(logit, target)), softplus);
}

double focal(double p, double x, const FocalParams& fp) {
    double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    double pt = p * s + (1.0 - p) * (1.0 - s);
    double alpha_t = fp.unit_alpha ? 1.0 : fp.alpha * p + (1.0 - fp.alpha) * (1.0 - p);
    double mod = fp.gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, fp.gamma);
    return alpha_t * mod * bce_logits(p, x);
}

Tensor focal(const Tensor& target, const Tensor& logit, const FocalParams& fp) {
    Tensor s = sigmoid(logit);
    Tensor pt = add(mul(target, s), mul(sub(1.0, target), sub(1.0, s)));
    Tensor out = bce_logits(target, logit);
    if (fp.gamma != 0.0) out = mul(pow_const(sub(1.0, pt), fp.gamma), out);
    if (!fp.unit_alpha) {
        Tensor alpha_t = add(mul(target, fp.alpha), mul(sub(1.0, target), 1.0 - fp.alpha));
        out = mul(alpha_t, out);
    }
    return out;
}

Tensor giou(const Tensor& ax1, const Tensor& ay1, const Tensor& ax2, const Tensor& ay2,
            const Tensor& bx1, const Tensor& by1, const Tensor& bx2, const Tensor& by2) {
    auto tmin = [](const Tensor& a, const Tensor& b) { return neg(maximum(neg(a), neg(b))); };
    Tensor iw = relu(sub(tmin(ax2, bx2), maximum(ax1, bx1)));
    Tensor ih = relu(sub(tmin(ay2, by2), maximum(ay1, by1)));
    Tensor inter = mul(iw, ih);
    Tensor area_a = mul(sub(ax2, ax1), sub(ay2, ay1));
    Tensor area_b = mul(sub(bx2, bx1), sub(by2, by1));
    Tensor uni = sub(add(area_a, area_b), inter);
    Tensor carea = mul(sub(maximum(ax2, bx2), tmin(ax1, bx1)),
                       sub(maximum(ay2, by2), tmin(ay1, by1)));
    return sub(div(inter, uni), div(sub(carea, uni), carea));
}

namespace {

void check_geometry(const TargetAssignment& assign, const SamplePredictions& preds) {
    if (assign.scales.size() != preds.scales.size())
        throw std::invalid_argument("loss: scale count mismatch");
    for (size_t i = 0; i < assign.scales.size(); ++i) {
        const auto& a = assign.scales[i];
        const auto& p = preds.scales[i];
        Shape want{5 + a.num_classes, a.grid, a.grid};
        if (p.shape != want)
            throw std::invalid_argument("loss: prediction shape " + shape_str(p.shape) +
                                        " does not match assignment geometry " + shape_str(want));
    }
}

}  // namespace

Tensor cls_loss(const TargetAssignment& assign, const SamplePredictions& preds,
                const FocalParams& fp) {
    check_geometry(assign, preds);
    Tensor total(0.0);
    for (size_t i = 0; i < assign.scales.size(); ++i) {
        const auto& a = assign.scales[i];
        int64_t cells = static_cast<int64_t>(a.grid) * a.grid;
        Tensor mask({static_cast<int>(cells)}, a.obj_target);
        for (int c = 0; c < a.num_classes; ++c) {
            std::vector<double> tgt(static_cast<size_t>(cells));
            for (int64_t j = 0; j < cells; ++j) tgt[static_cast<size_t>(j)] = a.cls_target[j * a.num_classes + c];
            Tensor target({static_cast<int>(cells)}, std::move(tgt));
            Tensor logits = slice_flat(preds.scales[i], (5 + c) * cells, cells);
            total = add(total, sum(mul(mask, focal(target, logits, fp))));
        }
    }
    return total;
}

Tensor obj_loss(const TargetAssignment& assign, const SamplePredictions& preds,
                const FocalParams& fp, const LossWeights& w) {
    check_geometry(assign, preds);
    Tensor total(0.0);
    for (size_t i = 0; i < assign.scales.size(); ++i) {
        const auto& a = assign.scales[i];
        int64_t cells = static_cast<int64_t>(a.grid) * a.grid;
        Tensor target({static_cast<int>(cells)}, a.obj_target);
        Tensor logits = slice_flat(preds.scales[i], 4 * cells, cells);
        total = add(total, mul(sum(focal(target, logits, fp)), w.balance[i]));
    }
    return total;
}

Tensor box_loss(const TargetAssignment& assign, const SamplePredictions& preds) {
    check_geometry(assign, preds);
    Tensor total(0.0);
    for (size_t i = 0; i < assign.scales.size(); ++i) {
        const auto& a = assign.scales[i];
        int s = a.grid;
        int64_t cells = static_cast<int64_t>(s) * s;
        for (int64_t j = 0; j < cells; ++j) {
            if (a.obj_target[static_cast<size_t>(j)] == 0.0) continue;
            int row = static_cast<int>(j / s), col = static_cast<int>(j % s);
            const Tensor& raw = preds.scales[i];
            Tensor cx = mul(add(sigmoid(select(raw, 0 * cells + j)), static_cast<double>(col)),
                            1.0 / s);
            Tensor cy = mul(add(sigmoid(select(raw, 1 * cells + j)), static_cast<double>(row)),
                            1.0 / s);
            Tensor bw = sigmoid(select(raw, 2 * cells + j));
            Tensor bh = sigmoid(select(raw, 3 * cells + j));
            Tensor px1 = sub(cx, mul(bw, 0.5)), px2 = add(cx, mul(bw, 0.5));
            Tensor py1 = sub(cy, mul(bh, 0.5)), py2 = add(cy, mul(bh, 0.5));
            const BBox& t = a.box_target[static_cast<size_t>(j)];
            Tensor g = giou(Tensor(t.x1), Tensor(t.y1), Tensor(t.x2), Tensor(t.y2),
                            px1, py1, px2, py2);
            total = add(total, sub(1.0, g));
        }
    }
    return total;
}

Tensor total_loss(const Tensor& box, const Tensor& cls, const Tensor& obj, const Tensor& dom,
                  int lambda_obj, const LossWeights& w) {
    Tensor supervised = add(mul(cls, w.eta_cls), mul(obj, w.eta_obj));
    return add(add(mul(box, w.eta_box), mul(supervised, static_cast<double>(lambda_obj))), dom);
}

double total_loss(double box, double cls, double obj, double dom, int lambda_obj,
                  const LossWeights& w) {
    return w.eta_box * box + lambda_obj * (w.eta_cls * cls + w.eta_obj * obj) + dom;
}

}  // namespace ddacdn
