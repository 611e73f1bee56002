#include <doctest.h>

#include <cmath>

#include "ddacdn/losses.hpp"
#include "ddacdn/rng.hpp"

using namespace ddacdn;

namespace {

// independent scalar re-implementations used as oracles
double ref_bce(double p, double x) {
    return std::max(x, 0.0) - x * p + std::log1p(std::exp(-std::abs(x)));
}

double ref_focal(double p, double x, const FocalParams& fp) {
    double s = 1.0 / (1.0 + std::exp(-x));
    double pt = p * s + (1 - p) * (1 - s);
    double at = fp.unit_alpha ? 1.0 : (p > 0.5 ? fp.alpha : 1.0 - fp.alpha);
    return at * std::pow(1.0 - pt, fp.gamma) * ref_bce(p, x);
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// random assignment + predictions on small grids
struct Instance {
    TargetAssignment assign;
    SamplePredictions preds;
};

Instance random_instance(Rng& rng, int C) {
    Instance inst;
    int grids[3] = {4, 3, 2};
    inst.assign.scales.resize(3);
    inst.preds.scales.resize(3);
    for (int s = 0; s < 3; ++s) {
        int S = grids[s];
        ScaleAssignment& a = inst.assign.scales[static_cast<size_t>(s)];
        a.grid = S;
        a.num_classes = C;
        a.obj_target.assign(static_cast<size_t>(S * S), 0.0);
        a.cls_target.assign(static_cast<size_t>(S * S * C), 0.0);
        a.box_target.resize(static_cast<size_t>(S * S));
        for (int j = 0; j < S * S; ++j) {
            if (rng.uniform() < 0.3) {
                a.obj_target[static_cast<size_t>(j)] = 1.0;
                int cls = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(C)));
                a.cls_target[static_cast<size_t>(j * C + cls)] = 1.0;
                double cx = rng.uniform(0.2, 0.8), cy = rng.uniform(0.2, 0.8);
                double w = rng.uniform(0.1, 0.3), h = rng.uniform(0.1, 0.3);
                a.box_target[static_cast<size_t>(j)] = BBox::from_cxcywh(cx, cy, w, h);
                inst.assign.has_objects = true;
            }
        }
        Tensor t = Tensor::zeros(Shape{5 + C, S, S});
        for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2, 2);
        inst.preds.scales[static_cast<size_t>(s)] = t;
    }
    return inst;
}

double at(const Tensor& t, int ch, int row, int col, int S) {
    return t[(static_cast<int64_t>(ch) * S + row) * S + col];
}

}  // namespace

TEST_CASE("bce hand values") {
    CHECK(bce_logits(1.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_logits(0.0, -50.0) < 1e-20);
    CHECK(bce_logits(1.0, -2.0) ==
          doctest::Approx(std::log(1.0 + std::exp(2.0))).epsilon(1e-12));
    CHECK(bce_logits(1.0, 300.0) >= 0.0);  // stable at extreme logits
    CHECK(std::isfinite(bce_logits(0.0, 300.0)));
}

TEST_CASE("focal hand values") {
    FocalParams fp;  // alpha 0.25, gamma 1.5
    CHECK(focal(1.0, 0.0, fp) ==
          doctest::Approx(0.25 * std::pow(0.5, 1.5) * std::log(2.0)).epsilon(1e-9));
    CHECK(focal(1.0, 0.0, fp) == doctest::Approx(0.061270).epsilon(1e-4));
    CHECK(focal(1.0, 50.0, fp) < 1e-20);
}

TEST_CASE("focal with gamma 0 and unit alpha equals bce at 1000 random points") {
    FocalParams fp;
    fp.gamma = 0.0;
    fp.unit_alpha = true;
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        double p = rng.uniform() < 0.5 ? 0.0 : 1.0;
        double x = rng.uniform(-10, 10);
        CHECK(std::abs(focal(p, x, fp) - bce_logits(p, x)) < 1e-12);
    }
}

TEST_CASE("focal is bounded by alpha_t times bce") {
    FocalParams fp;
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        double p = rng.uniform() < 0.5 ? 0.0 : 1.0;
        double x = rng.uniform(-8, 8);
        double at_ = p > 0.5 ? fp.alpha : 1.0 - fp.alpha;
        CHECK(focal(p, x, fp) <= at_ * bce_logits(p, x) + 1e-12);
    }
}

TEST_CASE("giou hand geometry") {
    SUBCASE("identical boxes give 1") {
        BBox a{0.1, 0.1, 0.4, 0.5};
        CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("overlapping squares: 1/7 - 2/9") {
        BBox a{0.0, 0.0, 0.2, 0.2}, b{0.1, 0.1, 0.3, 0.3};
        CHECK(giou(a, b) == doctest::Approx(1.0 / 7.0 - 2.0 / 9.0).epsilon(1e-9));
    }
    SUBCASE("disjoint thin boxes give -0.8") {
        BBox a{0.0, 0.0, 0.1, 0.1}, b{0.9, 0.0, 1.0, 0.1};
        CHECK(giou(a, b) == doctest::Approx(-0.8).epsilon(1e-9));
    }
    SUBCASE("symmetric, bounded, below iou") {
        Rng rng(19);
        for (int i = 0; i < 200; ++i) {
            BBox a = BBox::from_cxcywh(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                       rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
            BBox b = BBox::from_cxcywh(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                       rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
            double g = giou(a, b);
            CHECK(g == doctest::Approx(giou(b, a)).epsilon(1e-12));
            CHECK(g >= -1.0);
            CHECK(g <= 1.0 + 1e-12);
            CHECK(g <= iou(a, b) + 1e-12);
        }
    }
    SUBCASE("aligned nested boxes: giou equals iou") {
        BBox a{0.1, 0.1, 0.5, 0.5}, b{0.2, 0.2, 0.4, 0.4};
        CHECK(giou(a, b) == doctest::Approx(iou(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("tensor giou matches scalar giou and is differentiable") {
    Rng rng(23);
    for (int i = 0; i < 20; ++i) {
        BBox a = BBox::from_cxcywh(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                   rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3));
        BBox b = BBox::from_cxcywh(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                   rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3));
        Tensor g = giou(Tensor(a.x1), Tensor(a.y1), Tensor(a.x2), Tensor(a.y2), Tensor(b.x1),
                        Tensor(b.y1), Tensor(b.x2), Tensor(b.y2));
        CHECK(g.scalar() == doctest::Approx(giou(a, b)).epsilon(1e-10));

        Tensor x(Shape{4}, {b.x1, b.y1, b.x2, b.y2});
        double err = grad_check(
            [&](Graph&, const Tensor& t) {
                return giou(Tensor(a.x1), Tensor(a.y1), Tensor(a.x2), Tensor(a.y2), select(t, 0),
                            select(t, 1), select(t, 2), select(t, 3));
            },
            x);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("focal gradient passes finite differences") {
    FocalParams fp;
    Rng rng(29);
    for (int i = 0; i < 20; ++i) {
        Tensor x = Tensor::zeros(Shape{5});
        Tensor p = Tensor::zeros(Shape{5});
        for (int64_t k = 0; k < 5; ++k) {
            x[k] = rng.uniform(-4, 4);
            p[k] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        }
        double err = grad_check(
            [&](Graph&, const Tensor& t) { return sum(focal(Tensor(p.shape, *p.data), t, fp)); },
            x);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("structured losses match scalar loop oracles on random small grids") {
    Rng rng(31);
    FocalParams fp;
    LossWeights w;
    int C = 3;
    for (int rep = 0; rep < 30; ++rep) {
        Instance inst = random_instance(rng, C);

        // cls oracle: responsible cells, focal over all C classes
        double cls_ref = 0;
        for (int s = 0; s < 3; ++s) {
            const ScaleAssignment& a = inst.assign.scales[static_cast<size_t>(s)];
            const Tensor& t = inst.preds.scales[static_cast<size_t>(s)];
            int S = a.grid;
            for (int r = 0; r < S; ++r)
                for (int c = 0; c < S; ++c) {
                    int j = r * S + c;
                    if (a.obj_target[static_cast<size_t>(j)] != 1.0) continue;
                    for (int k = 0; k < C; ++k)
                        cls_ref += ref_focal(a.cls_target[static_cast<size_t>(j * C + k)],
                                             at(t, 5 + k, r, c, S), fp);
                }
        }
        CHECK(cls_loss(inst.assign, inst.preds, fp).scalar() ==
              doctest::Approx(cls_ref).epsilon(1e-10));

        // obj oracle: every cell, balance-weighted
        double obj_ref = 0;
        for (int s = 0; s < 3; ++s) {
            const ScaleAssignment& a = inst.assign.scales[static_cast<size_t>(s)];
            const Tensor& t = inst.preds.scales[static_cast<size_t>(s)];
            int S = a.grid;
            double scale_sum = 0;
            for (int r = 0; r < S; ++r)
                for (int c = 0; c < S; ++c)
                    scale_sum += ref_focal(a.obj_target[static_cast<size_t>(r * S + c)],
                                           at(t, 4, r, c, S), fp);
            obj_ref += w.balance[s] * scale_sum;
        }
        CHECK(obj_loss(inst.assign, inst.preds, fp, w).scalar() ==
              doctest::Approx(obj_ref).epsilon(1e-10));

        // box oracle: responsible cells, sigma-decoded prediction vs target
        double box_ref = 0;
        for (int s = 0; s < 3; ++s) {
            const ScaleAssignment& a = inst.assign.scales[static_cast<size_t>(s)];
            const Tensor& t = inst.preds.scales[static_cast<size_t>(s)];
            int S = a.grid;
            for (int r = 0; r < S; ++r)
                for (int c = 0; c < S; ++c) {
                    int j = r * S + c;
                    if (a.obj_target[static_cast<size_t>(j)] != 1.0) continue;
                    double cx = (c + sigm(at(t, 0, r, c, S))) / S;
                    double cy = (r + sigm(at(t, 1, r, c, S))) / S;
                    double bw = sigm(at(t, 2, r, c, S));
                    double bh = sigm(at(t, 3, r, c, S));
                    box_ref += 1.0 - giou(a.box_target[static_cast<size_t>(j)],
                                          BBox::from_cxcywh(cx, cy, bw, bh));
                }
        }
        CHECK(box_loss(inst.assign, inst.preds).scalar() ==
              doctest::Approx(box_ref).epsilon(1e-10));
    }
}

TEST_CASE("cls and box losses vanish without ground truth") {
    Rng rng(37);
    Instance inst = random_instance(rng, 3);
    for (auto& a : inst.assign.scales) {
        std::fill(a.obj_target.begin(), a.obj_target.end(), 0.0);
        std::fill(a.cls_target.begin(), a.cls_target.end(), 0.0);
    }
    inst.assign.has_objects = false;
    FocalParams fp;
    CHECK(cls_loss(inst.assign, inst.preds, fp).scalar() == 0.0);
    CHECK(box_loss(inst.assign, inst.preds).scalar() == 0.0);
}

TEST_CASE("doubling a balance weight doubles that scale's objectness share") {
    Rng rng(41);
    Instance inst = random_instance(rng, 3);
    FocalParams fp;
    LossWeights w0, w1, wz;
    wz.balance[0] = wz.balance[2] = 0.0;  // isolate scale 2
    double only2 = obj_loss(inst.assign, inst.preds, fp, wz).scalar();
    w1.balance[1] = 2.0 * w0.balance[1];
    double d = obj_loss(inst.assign, inst.preds, fp, w1).scalar() -
               obj_loss(inst.assign, inst.preds, fp, w0).scalar();
    CHECK(d == doctest::Approx(only2).epsilon(1e-9));
}

TEST_CASE("total loss arithmetic") {
    LossWeights w;
    CHECK(total_loss(0.0, 0.0, 0.0, 0.0, 1, w) == 0.0);
    CHECK(total_loss(1.0, 2.0, 3.0, 0.5, 1, w) == doctest::Approx(4.55).epsilon(1e-12));
    // lambda 0 silences cls and obj
    CHECK(total_loss(1.0, 99.0, 77.0, 0.5, 0, w) ==
          doctest::Approx(0.05 * 1.0 + 0.5).epsilon(1e-12));
}
