#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ddacdn/detector.hpp"
#include "ddacdn/rng.hpp"

using namespace ddacdn;

namespace {

ImageGray random_image(int n, Rng& rng) {
    ImageGray img(n, n);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(256));
    return img;
}

// independent greedy per-class NMS oracle
std::vector<Detection> nms_oracle(std::vector<Detection> dets, double thresh) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return a.confidence > b.confidence;
    });
    std::vector<Detection> kept;
    std::vector<bool> dead(dets.size(), false);
    for (size_t i = 0; i < dets.size(); ++i) {
        if (dead[i]) continue;
        kept.push_back(dets[i]);
        for (size_t j = i + 1; j < dets.size(); ++j)
            if (!dead[j] && dets[j].class_id == dets[i].class_id &&
                iou(dets[j].box, dets[i].box) > thresh)
                dead[j] = true;
    }
    return kept;
}

}  // namespace

TEST_CASE("backbone pyramid shapes and determinism") {
    DetectorGeometry geom;
    Rng rng(1);
    ModelParams params = ModelParams::init(geom, rng);
    BoundParams bp = bind_params(params, nullptr);
    ImageGray img = random_image(64, rng);
    Tensor in = images_to_tensor({img, img}, geom);
    FeaturePyramid pyr = backbone_forward(bp, in);
    REQUIRE(pyr.scales.size() == 3);
    CHECK(pyr.scales[0].shape == Shape{2, 16, 16, 16});
    CHECK(pyr.scales[1].shape == Shape{2, 32, 8, 8});
    CHECK(pyr.scales[2].shape == Shape{2, 64, 4, 4});
    // identical images in the batch produce identical per-sample features
    for (int s = 0; s < 3; ++s) {
        const Tensor& t = pyr.scales[static_cast<size_t>(s)];
        int64_t half = t.size() / 2;
        for (int64_t i = 0; i < half; ++i) CHECK(t[i] == t[half + i]);
    }
}

TEST_CASE("shared weights: source and target branch forwards are bit-identical") {
    DetectorGeometry geom;
    Rng rng(2);
    ModelParams params = ModelParams::init(geom, rng);
    ImageGray img = random_image(64, rng);
    Tensor in = images_to_tensor({img}, geom);
    BoundParams branch_s = bind_params(params, nullptr);
    BoundParams branch_t = bind_params(params, nullptr);
    FeaturePyramid a = backbone_forward(branch_s, in);
    FeaturePyramid b = backbone_forward(branch_t, in);
    for (int s = 0; s < 3; ++s)
        CHECK(a.scales[static_cast<size_t>(s)].values() ==
              b.scales[static_cast<size_t>(s)].values());
}

TEST_CASE("head output shapes and zero-weight confidence") {
    DetectorGeometry geom;
    Rng rng(3);
    ModelParams params = ModelParams::init(geom, rng);
    for (auto& t : params.tensors) std::fill(t.data->begin(), t.data->end(), 0.0);
    BoundParams bp = bind_params(params, nullptr);
    ImageGray img = random_image(64, rng);
    FeaturePyramid pyr = backbone_forward(bp, images_to_tensor({img}, geom));
    RawPredictions raw = head_forward(bp, pyr);
    CHECK(raw.scales[0].shape == Shape{1, 9, 16, 16});
    CHECK(raw.scales[1].shape == Shape{1, 9, 8, 8});
    CHECK(raw.scales[2].shape == Shape{1, 9, 4, 4});
    auto dets = decode(raw, 0, geom, 0.2);
    REQUIRE(!dets.empty());
    for (const auto& d : dets) CHECK(d.confidence == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("assign_targets") {
    DetectorGeometry geom;
    SUBCASE("center cell rule") {
        TargetAssignment a =
            assign_targets({{1, BBox::from_cxcywh(0.5, 0.5, 0.2, 0.2)}}, geom);
        CHECK(a.has_objects);
        // finest scale S=16: center cell (8,8); coarsest S=4: cell (2,2)
        CHECK(a.scales[2].obj_target[2 * 4 + 2] == 1.0);
        CHECK(a.scales[0].obj_target[8 * 16 + 8] == 1.0);
        CHECK(a.scales[2].cls_target[(2 * 4 + 2) * 4 + 1] == 1.0);
    }
    SUBCASE("empty labels leave everything zero") {
        TargetAssignment a = assign_targets({}, geom);
        CHECK(!a.has_objects);
        for (const auto& s : a.scales)
            for (double v : s.obj_target) CHECK(v == 0.0);
    }
    SUBCASE("collision: larger area wins") {
        std::vector<ObjectLabel> labs = {{0, BBox::from_cxcywh(0.51, 0.51, 0.1, 0.1)},
                                         {1, BBox::from_cxcywh(0.52, 0.52, 0.2, 0.2)}};
        TargetAssignment a = assign_targets(labs, geom);
        const ScaleAssignment& s = a.scales[2];  // S=4: both centers in cell (2,2)
        CHECK(s.obj_target[2 * 4 + 2] == 1.0);
        CHECK(s.cls_target[(2 * 4 + 2) * 4 + 1] == 1.0);
        CHECK(s.cls_target[(2 * 4 + 2) * 4 + 0] == 0.0);
        CHECK(s.box_target[2 * 4 + 2].width() == doctest::Approx(0.2));
    }
    SUBCASE("deterministic and idempotent") {
        std::vector<ObjectLabel> labs = {{2, BBox::from_cxcywh(0.3, 0.7, 0.25, 0.15)}};
        TargetAssignment a = assign_targets(labs, geom);
        TargetAssignment b = assign_targets(labs, geom);
        for (int s = 0; s < 3; ++s)
            CHECK(a.scales[static_cast<size_t>(s)].obj_target ==
                  b.scales[static_cast<size_t>(s)].obj_target);
    }
}

TEST_CASE("decode") {
    DetectorGeometry geom;
    SUBCASE("zero offsets land at cell centers") {
        RawPredictions raw;
        for (int s = 0; s < 3; ++s) {
            int S = geom.grid(s);
            raw.scales.push_back(Tensor::full(Shape{1, 9, S, S}, -50.0));
        }
        // activate one cell at the coarsest scale (S=4), cell (0,0)
        Tensor& t = raw.scales[2];
        auto set = [&](int ch, double v) { (*t.data)[static_cast<size_t>(ch) * 16] = v; };
        set(0, 0.0);   // tx
        set(1, 0.0);   // ty
        set(2, -3.0);  // tw: small enough that the box is not clipped
        set(3, -3.0);  // th
        set(4, 10.0);  // obj
        set(5, 10.0);  // class 0
        auto dets = decode(raw, 0, geom, 0.5);
        REQUIRE(dets.size() == 1);
        CHECK(dets[0].class_id == 0);
        CHECK(dets[0].box.cx() == doctest::Approx(0.125).epsilon(1e-9));
        CHECK(dets[0].box.cy() == doctest::Approx(0.125).epsilon(1e-9));
    }
    SUBCASE("confidence threshold 1 rejects every finite logit") {
        Rng rng(5);
        RawPredictions raw;
        for (int s = 0; s < 3; ++s) {
            int S = geom.grid(s);
            Tensor t = Tensor::zeros(Shape{1, 9, S, S});
            for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-5, 5);
            raw.scales.push_back(t);
        }
        CHECK(decode(raw, 0, geom, 1.0).empty());
    }
    SUBCASE("assign/decode round trip recovers responsible cells") {
        Rng rng(7);
        for (int rep = 0; rep < 20; ++rep) {
            BBox box = BBox::from_cxcywh(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                                         rng.uniform(0.15, 0.4), rng.uniform(0.15, 0.4));
            int cls = static_cast<int>(rng.uniform_int(4));
            TargetAssignment assign = assign_targets({{cls, box}}, geom);
            // build logits that decode exactly to the stored targets
            RawPredictions raw;
            for (int s = 0; s < 3; ++s) {
                const ScaleAssignment& a = assign.scales[static_cast<size_t>(s)];
                int S = a.grid;
                Tensor t = Tensor::full(Shape{1, 9, S, S}, -50.0);
                for (int r = 0; r < S; ++r)
                    for (int c = 0; c < S; ++c) {
                        int j = r * S + c;
                        if (a.obj_target[static_cast<size_t>(j)] != 1.0) continue;
                        const BBox& b = a.box_target[static_cast<size_t>(j)];
                        auto logit = [](double p) {
                            p = std::clamp(p, 1e-9, 1.0 - 1e-9);
                            return std::log(p / (1.0 - p));
                        };
                        auto set = [&](int ch, double v) {
                            (*t.data)[(static_cast<size_t>(ch) * S + r) * S + c] = v;
                        };
                        set(0, logit(b.cx() * S - c));
                        set(1, logit(b.cy() * S - r));
                        set(2, logit(b.width()));
                        set(3, logit(b.height()));
                        set(4, 12.0);
                        for (int k = 0; k < 4; ++k) set(5 + k, k == cls ? 12.0 : -12.0);
                    }
                raw.scales.push_back(t);
            }
            auto dets = decode(raw, 0, geom, 0.5);
            REQUIRE(dets.size() == 3);  // one per scale
            TargetAssignment again = assign_targets({{dets[0].class_id, dets[0].box}}, geom);
            for (int s = 0; s < 3; ++s)
                CHECK(again.scales[static_cast<size_t>(s)].obj_target ==
                      assign.scales[static_cast<size_t>(s)].obj_target);
        }
    }
}

TEST_CASE("nms") {
    SUBCASE("single detection unchanged") {
        std::vector<Detection> d = {{0, 0.9, BBox{0.1, 0.1, 0.3, 0.3}}};
        CHECK(nms(d, 0.5).size() == 1);
    }
    SUBCASE("duplicate boxes keep the higher confidence") {
        BBox b{0.1, 0.1, 0.3, 0.3};
        std::vector<Detection> d = {{0, 0.8, b}, {0, 0.9, b}};
        auto out = nms(d, 0.5);
        REQUIRE(out.size() == 1);
        CHECK(out[0].confidence == 0.9);
    }
    SUBCASE("different classes are never suppressed") {
        BBox b{0.1, 0.1, 0.3, 0.3};
        std::vector<Detection> d = {{0, 0.8, b}, {1, 0.9, b}};
        CHECK(nms(d, 0.5).size() == 2);
    }
    SUBCASE("matches the brute-force oracle on random sets") {
        Rng rng(11);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<Detection> dets;
            int n = 1 + static_cast<int>(rng.uniform_int(8));
            for (int i = 0; i < n; ++i)
                dets.push_back({static_cast<int>(rng.uniform_int(2)), rng.uniform(),
                                BBox::from_cxcywh(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                                                  rng.uniform(0.1, 0.4),
                                                  rng.uniform(0.1, 0.4))});
            auto a = nms(dets, 0.45);
            auto b = nms_oracle(dets, 0.45);
            REQUIRE(a.size() == b.size());
            for (size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].confidence == b[i].confidence);
                CHECK(a[i].class_id == b[i].class_id);
            }
            for (size_t i = 0; i < a.size(); ++i)
                for (size_t j = i + 1; j < a.size(); ++j)
                    if (a[i].class_id == a[j].class_id)
                        CHECK(iou(a[i].box, a[j].box) <= 0.45 + 1e-12);
        }
    }
}

TEST_CASE("checkpoint round trip is bit-exact") {
    namespace fs = std::filesystem;
    DetectorGeometry geom;
    Rng rng(13);
    ModelParams params = ModelParams::init(geom, rng);
    std::string p1 = (fs::temp_directory_path() / "ck1.bin").string();
    std::string p2 = (fs::temp_directory_path() / "ck2.bin").string();
    save_checkpoint(params, p1);
    ModelParams loaded = load_checkpoint(p1);
    REQUIRE(loaded.names == params.names);
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        CHECK(loaded.tensors[i].shape == params.tensors[i].shape);
        CHECK(loaded.tensors[i].values() == params.tensors[i].values());
    }
    save_checkpoint(loaded, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(b1.substr(0, 4) == "DDAC");
}

TEST_CASE("corrupt checkpoint rejected") {
    namespace fs = std::filesystem;
    std::string p = (fs::temp_directory_path() / "ckbad.bin").string();
    std::ofstream(p, std::ios::binary) << "NOPE garbage";
    CHECK_THROWS_AS(load_checkpoint(p), std::runtime_error);
}

TEST_CASE("end-to-end gradient through backbone, head and losses") {
    DetectorGeometry geom;
    geom.input_size = 16;  // tiny geometry keeps finite differences affordable
    geom.validate();
    Rng rng(17);
    ModelParams params = ModelParams::init(geom, rng);
    ImageGray img(16, 16);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(256));
    TargetAssignment assign =
        assign_targets({{1, BBox::from_cxcywh(0.5, 0.45, 0.3, 0.35)}}, geom);
    FocalParams fp;
    LossWeights w;

    // check a conv weight, a head weight and a bias
    for (const char* name : {"stem.w", "head1.w", "stage2.b"}) {
        Tensor& target = params.find(name);
        Tensor x0(target.shape, *target.data);
        double err = grad_check(
            [&](Graph& g, const Tensor& t) {
                ModelParams local = params;
                local.tensors = params.tensors;
                BoundParams bp = bind_params(local, &g);
                // splice the checked tensor in place of the stored leaf
                for (size_t i = 0; i < local.names.size(); ++i)
                    if (local.names[i] == name) bp.leaves[i] = t;
                FeaturePyramid pyr = backbone_forward(bp, images_to_tensor({img}, geom));
                RawPredictions raw = head_forward(bp, pyr);
                SamplePredictions sp = sample_predictions(raw, 0);
                Tensor box = box_loss(assign, sp);
                Tensor cls = cls_loss(assign, sp, fp);
                Tensor obj = obj_loss(assign, sp, fp, w);
                return total_loss(box, cls, obj, Tensor(0.0), 1, w);
            },
            x0);
        CHECK(err < 1e-4);
    }
}
