#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ddacdn/eval.hpp"
#include "ddacdn/rng.hpp"

using namespace ddacdn;

namespace {

// straightforward loop re-implementation of greedy per-class matching
std::vector<ClassCounts> match_oracle(const std::vector<Detection>& dets,
                                      const std::vector<ObjectLabel>& gts, double thresh,
                                      int nc) {
    std::vector<ClassCounts> counts(static_cast<size_t>(nc));
    std::vector<size_t> order(dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dets[a].confidence > dets[b].confidence; });
    std::vector<bool> used(gts.size(), false);
    for (size_t oi : order) {
        const Detection& d = dets[oi];
        if (d.class_id < 0 || d.class_id >= nc) continue;
        double best = 0;
        int pick = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].class_id != d.class_id) continue;
            double v = iou(d.box, gts[g].box);
            if (v >= thresh && v > best) {
                best = v;
                pick = static_cast<int>(g);
            }
        }
        if (pick >= 0) {
            used[static_cast<size_t>(pick)] = true;
            ++counts[static_cast<size_t>(d.class_id)].tp;
        } else {
            ++counts[static_cast<size_t>(d.class_id)].fp;
        }
    }
    for (size_t g = 0; g < gts.size(); ++g)
        if (!used[g]) ++counts[static_cast<size_t>(gts[g].class_id)].fn;
    return counts;
}

BBox rand_box(Rng& rng) {
    return BBox::from_cxcywh(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75),
                             rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4));
}

}  // namespace

TEST_CASE("metrics hand cases and conventions") {
    Metrics m = metrics(ClassCounts{5, 5, 0, 0});
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(m.acc == 0.5);

    Metrics z = metrics(ClassCounts{0, 0, 0, 10});
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK(z.f1 == 0.0);
    CHECK(z.acc == 1.0);

    Metrics e = metrics(ClassCounts{});
    CHECK(e.acc == 0.0);
}

TEST_CASE("harmonic-mean identity: P == R implies F1 == P") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        long tp = 1 + static_cast<long>(rng.uniform_int(50));
        long k = static_cast<long>(rng.uniform_int(20));
        Metrics m = metrics(ClassCounts{tp, k, k, 0});  // P == R == tp/(tp+k)
        CHECK(m.f1 == doctest::Approx(m.precision).epsilon(1e-12));
    }
}

TEST_CASE("match_detections trivial cases") {
    std::vector<ObjectLabel> gts = {{0, BBox{0.1, 0.1, 0.3, 0.3}},
                                    {1, BBox{0.5, 0.5, 0.8, 0.8}}};
    SUBCASE("perfect detections") {
        std::vector<Detection> dets = {{0, 0.9, gts[0].box}, {1, 0.8, gts[1].box}};
        auto counts = match_detections(dets, gts, 0.5, 2);
        CHECK(counts[0].tp == 1);
        CHECK(counts[1].tp == 1);
        CHECK(counts[0].fp + counts[0].fn + counts[1].fp + counts[1].fn == 0);
    }
    SUBCASE("no detections leaves all gts as fn") {
        auto counts = match_detections({}, gts, 0.5, 2);
        CHECK(counts[0].fn == 1);
        CHECK(counts[1].fn == 1);
    }
    SUBCASE("iou threshold must lie in (0,1)") {
        CHECK_THROWS_AS(match_detections({}, gts, 0.0, 2), std::invalid_argument);
    }
}

TEST_CASE("match_detections equals the loop oracle on 1000 random small instances") {
    Rng rng(7);
    for (int rep = 0; rep < 1000; ++rep) {
        int nd = static_cast<int>(rng.uniform_int(6));
        int ng = static_cast<int>(rng.uniform_int(6));
        std::vector<Detection> dets;
        std::vector<ObjectLabel> gts;
        for (int i = 0; i < nd; ++i)
            dets.push_back({static_cast<int>(rng.uniform_int(2)), rng.uniform(), rand_box(rng)});
        for (int i = 0; i < ng; ++i)
            gts.push_back({static_cast<int>(rng.uniform_int(2)), rand_box(rng)});
        auto a = match_detections(dets, gts, 0.5, 2);
        auto b = match_oracle(dets, gts, 0.5, 2);
        for (int c = 0; c < 2; ++c) {
            CHECK(a[static_cast<size_t>(c)].tp == b[static_cast<size_t>(c)].tp);
            CHECK(a[static_cast<size_t>(c)].fp == b[static_cast<size_t>(c)].fp);
            CHECK(a[static_cast<size_t>(c)].fn == b[static_cast<size_t>(c)].fn);
            // tp can never exceed either side's box count
            CHECK(a[static_cast<size_t>(c)].tp <= std::min<long>(nd, ng));
        }
        // order invariance: shuffled detections give the same counts
        std::vector<Detection> shuffled = dets;
        for (size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[rng.uniform_int(i)]);
        auto c2 = match_detections(shuffled, gts, 0.5, 2);
        for (int c = 0; c < 2; ++c)
            CHECK(c2[static_cast<size_t>(c)].tp == a[static_cast<size_t>(c)].tp);
    }
}

TEST_CASE("image_level_counts contingency") {
    // 4 classes; class 0 present but detected as class 1
    std::vector<ObjectLabel> gts = {{0, BBox{0.1, 0.1, 0.3, 0.3}}};
    std::vector<Detection> dets = {{1, 0.9, BBox{0.1, 0.1, 0.3, 0.3}}};
    auto counts = image_level_counts(dets, gts, 4);
    CHECK(counts[0].fn == 1);
    CHECK(counts[1].fp == 1);
    CHECK(counts[2].tn == 1);
    CHECK(counts[3].tn == 1);
    // present and detected
    auto ok = image_level_counts({{0, 0.9, gts[0].box}}, gts, 4);
    CHECK(ok[0].tp == 1);
}

TEST_CASE("pr_curve") {
    std::vector<ObjectLabel> gt = {{0, BBox{0.2, 0.2, 0.5, 0.5}}};
    SUBCASE("single perfect detection") {
        std::vector<std::vector<Detection>> dets = {{{0, 0.7, gt[0].box}}};
        auto curve = pr_curve(dets, {gt}, 0.5, 1, 11);
        for (const auto& p : curve) {
            if (p.threshold <= 0.7) {
                CHECK(p.precision == 1.0);
                CHECK(p.recall == 1.0);
            } else {
                CHECK(p.precision == 0.0);
                CHECK(p.recall == 0.0);
            }
        }
    }
    SUBCASE("recall is non-increasing and every point matches a recomputation") {
        Rng rng(11);
        std::vector<std::vector<Detection>> dets(1);
        for (int i = 0; i < 10; ++i)
            dets[0].push_back(
                {static_cast<int>(rng.uniform_int(2)), rng.uniform(), rand_box(rng)});
        std::vector<std::vector<ObjectLabel>> gts(1);
        for (int i = 0; i < 4; ++i)
            gts[0].push_back({static_cast<int>(rng.uniform_int(2)), rand_box(rng)});
        auto curve = pr_curve(dets, gts, 0.5, 2, 21);
        REQUIRE(curve.size() == 21);
        for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].recall <= curve[i - 1].recall);
        for (const auto& p : curve) {
            std::vector<Detection> kept;
            for (const auto& d : dets[0])
                if (d.confidence >= p.threshold) kept.push_back(d);
            auto counts = match_detections(kept, gts[0], 0.5, 2);
            ClassCounts pooled;
            for (const auto& c : counts) {
                pooled.tp += c.tp;
                pooled.fp += c.fp;
                pooled.fn += c.fn;
            }
            Metrics m = metrics(pooled);
            CHECK(p.precision == m.precision);
            CHECK(p.recall == m.recall);
        }
    }
    SUBCASE("needs at least two points") {
        CHECK_THROWS_AS(pr_curve({}, {}, 0.5, 1, 1), std::invalid_argument);
    }
}

TEST_CASE("iou_sweep") {
    Rng rng(13);
    SUBCASE("perfect detections give F1 1 everywhere, argmax first") {
        std::vector<std::vector<Detection>> dets(3);
        std::vector<std::vector<ObjectLabel>> gts(3);
        for (int i = 0; i < 3; ++i) {
            BBox b = rand_box(rng);
            gts[static_cast<size_t>(i)].push_back({0, b});
            dets[static_cast<size_t>(i)].push_back({0, 0.9, b});
        }
        SweepResult res = iou_sweep(dets, gts, 1);
        REQUIRE(res.rows.size() == 9);
        for (const auto& row : res.rows) CHECK(row.macro_f1 == doctest::Approx(1.0));
        CHECK(res.best_threshold == doctest::Approx(0.1));
    }
    SUBCASE("9 rows, each equal to a standalone evaluation") {
        std::vector<std::vector<Detection>> dets(2);
        std::vector<std::vector<ObjectLabel>> gts(2);
        for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < 3; ++k)
                dets[static_cast<size_t>(i)].push_back(
                    {static_cast<int>(rng.uniform_int(2)), rng.uniform(), rand_box(rng)});
            for (int k = 0; k < 2; ++k)
                gts[static_cast<size_t>(i)].push_back(
                    {static_cast<int>(rng.uniform_int(2)), rand_box(rng)});
        }
        SweepResult res = iou_sweep(dets, gts, 2);
        REQUIRE(res.rows.size() == 9);
        for (int t = 1; t <= 9; ++t) {
            const SweepRow& row = res.rows[static_cast<size_t>(t - 1)];
            CHECK(row.iou_thresh == doctest::Approx(t / 10.0));
            std::vector<ClassCounts> ref(2);
            for (size_t i = 0; i < dets.size(); ++i)
                accumulate_counts(ref, match_detections(dets[i], gts[i], t / 10.0, 2));
            CHECK(row.macro_f1 == doctest::Approx(macro_f1(ref)).epsilon(1e-12));
        }
    }
    SUBCASE("all metrics stay in [0,1]") {
        std::vector<std::vector<Detection>> dets(1, std::vector<Detection>{
                                                        {0, 0.4, rand_box(rng)}});
        std::vector<std::vector<ObjectLabel>> gts(1, std::vector<ObjectLabel>{
                                                         {1, rand_box(rng)}});
        for (const auto& row : iou_sweep(dets, gts, 2).rows) {
            for (const auto& c : row.per_class) {
                Metrics m = metrics(c);
                CHECK(m.precision >= 0.0);
                CHECK(m.f1 <= 1.0);
                CHECK(m.acc <= 1.0);
            }
        }
    }
}
