#include "ddacdn/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ddacdn {

namespace {
constexpr int kStemCh = 8;
constexpr int kStageCh[3] = {16, 32, 64};
constexpr char kMagic[4] = {'D', 'D', 'A', 'C'};
constexpr uint32_t kFormatVersion = 1;

double sigmoid_d(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
}  // namespace

void DetectorGeometry::validate() const {
    if (input_size <= 0 || boxes_per_cell <= 0 || num_classes <= 0)
        throw std::invalid_argument("detector geometry: all extents must be positive");
    for (int s : strides)
        if (s <= 0 || input_size % s != 0)
            throw std::invalid_argument("detector geometry: input size " +
                                        std::to_string(input_size) +
                                        " not divisible by stride " + std::to_string(s));
}

Tensor& ModelParams::find(const std::string& name) {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return tensors[i];
    throw std::invalid_argument("unknown parameter \"" + name + "\"");
}

const Tensor& ModelParams::find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
}

ModelParams ModelParams::init(const DetectorGeometry& geom, Rng& rng) {
    geom.validate();
    ModelParams p;
    p.geom = geom;
    auto conv = [&](const std::string& name, int cout, int cin, int k) {
        double std_dev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
        std::vector<double> w(static_cast<size_t>(cout) * cin * k * k);
        for (auto& v : w) v = rng.normal(0.0, std_dev);
        p.names.push_back(name + ".w");
        p.tensors.push_back(Tensor({cout, cin, k, k}, std::move(w)));
        p.names.push_back(name + ".b");
        p.tensors.push_back(Tensor::zeros({cout}));
    };
    conv("stem", kStemCh, 1, 3);
    conv("stage1", kStageCh[0], kStemCh, 3);
    conv("stage2", kStageCh[1], kStageCh[0], 3);
    conv("stage3", kStageCh[2], kStageCh[1], 3);
    int hc = geom.head_channels();
    conv("head1", hc, kStageCh[0], 1);
    conv("head2", hc, kStageCh[1], 1);
    conv("head3", hc, kStageCh[2], 1);
    // start with low objectness so early training is not swamped by negatives
    for (int h = 1; h <= 3; ++h) {
        Tensor& b = p.find("head" + std::to_string(h) + ".b");
        for (int m = 0; m < geom.boxes_per_cell; ++m)
            (*b.data)[static_cast<size_t>(m * (5 + geom.num_classes) + 4)] = -2.0;
    }
    return p;
}

Tensor images_to_tensor(const std::vector<ImageGray>& images, const DetectorGeometry& geom) {
    if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    int n = static_cast<int>(images.size()), hw = geom.input_size;
    std::vector<double> data;
    data.reserve(static_cast<size_t>(n) * hw * hw);
    for (const auto& img : images) {
        if (img.width != hw || img.height != hw)
            throw std::invalid_argument("image size " + std::to_string(img.width) + "x" +
                                        std::to_string(img.height) + " does not match geometry " +
                                        std::to_string(hw));
        for (uint8_t px : img.pixels) data.push_back(px / 255.0);
    }
    return Tensor({n, 1, hw, hw}, std::move(data));
}

Tensor& BoundParams::find(const std::string& name) {
    for (size_t i = 0; i < params->names.size(); ++i)
        if (params->names[i] == name) return leaves[i];
    throw std::invalid_argument("unknown parameter \"" + name + "\"");
}

BoundParams bind_params(ModelParams& params, Graph* graph) {
    BoundParams bp;
    bp.params = &params;
    bp.leaves = params.tensors;
    if (graph) {
        for (auto& t : bp.leaves) {
            Tensor leaf = t;
            graph->record(leaf, {}, nullptr);
            t = leaf;
        }
    }
    return bp;
}

FeaturePyramid backbone_forward(BoundParams& bp, const Tensor& images) {
    const DetectorGeometry& geom = bp.params->geom;
    if (images.shape.size() != 4 || images.shape[1] != 1 || images.shape[2] != geom.input_size ||
        images.shape[3] != geom.input_size)
        throw std::invalid_argument("backbone_forward: bad input shape " + shape_str(images.shape));
    Tensor x = relu(conv2d(images, bp.find("stem.w"), bp.find("stem.b"), 2));
    FeaturePyramid pyr;
    for (int s = 1; s <= 3; ++s) {
        std::string stage = "stage" + std::to_string(s);
        x = relu(conv2d(x, bp.find(stage + ".w"), bp.find(stage + ".b"), 2));
        pyr.scales.push_back(x);
    }
    return pyr;
}

RawPredictions head_forward(BoundParams& bp, const FeaturePyramid& pyr) {
    if (pyr.scales.size() != 3) throw std::invalid_argument("head_forward: expected 3 scales");
    RawPredictions raw;
    for (int s = 1; s <= 3; ++s) {
        std::string head = "head" + std::to_string(s);
        raw.scales.push_back(
            conv2d(pyr.scales[static_cast<size_t>(s - 1)], bp.find(head + ".w"),
                   bp.find(head + ".b"), 1));
    }
    return raw;
}

SamplePredictions sample_predictions(const RawPredictions& raw, int sample_index) {
    SamplePredictions sp;
    for (const auto& t : raw.scales) {
        if (t.shape.size() != 4 || sample_index < 0 || sample_index >= t.shape[0])
            throw std::invalid_argument("sample_predictions: bad sample index");
        int64_t per_sample = static_cast<int64_t>(t.shape[1]) * t.shape[2] * t.shape[3];
        Tensor s = slice_flat(t, sample_index * per_sample, per_sample);
        sp.scales.push_back(reshape(s, {t.shape[1], t.shape[2], t.shape[3]}));
    }
    return sp;
}

TargetAssignment assign_targets(const std::vector<ObjectLabel>& labels,
                                const DetectorGeometry& geom) {
    geom.validate();
    TargetAssignment out;
    out.has_objects = !labels.empty();
    for (int si = 0; si < 3; ++si) {
        ScaleAssignment a;
        a.grid = geom.grid(si);
        a.num_classes = geom.num_classes;
        int64_t cells = static_cast<int64_t>(a.grid) * a.grid;
        a.obj_target.assign(static_cast<size_t>(cells), 0.0);
        a.cls_target.assign(static_cast<size_t>(cells * geom.num_classes), 0.0);
        a.box_target.assign(static_cast<size_t>(cells), BBox{});
        std::vector<int> winner(static_cast<size_t>(cells), -1);
        for (size_t li = 0; li < labels.size(); ++li) {
            const auto& lab = labels[li];
            if (lab.class_id < 0 || lab.class_id >= geom.num_classes)
                throw std::invalid_argument("assign_targets: class id out of range");
            int col = std::clamp(static_cast<int>(lab.box.cx() * a.grid), 0, a.grid - 1);
            int row = std::clamp(static_cast<int>(lab.box.cy() * a.grid), 0, a.grid - 1);
            int64_t j = static_cast<int64_t>(row) * a.grid + col;
            if (winner[static_cast<size_t>(j)] >= 0) {
                // cell collision: larger area wins, then smaller class id
                const auto& cur = labels[static_cast<size_t>(winner[static_cast<size_t>(j)])];
                double na = lab.box.area(), ca = cur.box.area();
                if (na < ca || (na == ca && lab.class_id >= cur.class_id)) continue;
            }
            winner[static_cast<size_t>(j)] = static_cast<int>(li);
            a.obj_target[static_cast<size_t>(j)] = 1.0;
            for (int c = 0; c < geom.num_classes; ++c)
                a.cls_target[static_cast<size_t>(j * geom.num_classes + c)] =
                    (c == lab.class_id) ? 1.0 : 0.0;
            a.box_target[static_cast<size_t>(j)] = lab.box;
        }
        out.scales.push_back(std::move(a));
    }
    return out;
}

std::vector<Detection> decode(const RawPredictions& raw, int sample_index,
                              const DetectorGeometry& geom, double conf_thresh) {
    std::vector<Detection> dets;
    for (int si = 0; si < 3; ++si) {
        const Tensor& t = raw.scales[static_cast<size_t>(si)];
        int s = geom.grid(si);
        if (t.shape.size() != 4 || t.shape[1] != geom.head_channels() || t.shape[2] != s ||
            t.shape[3] != s)
            throw std::invalid_argument("decode: raw shape " + shape_str(t.shape) +
                                        " does not match geometry");
        int64_t cells = static_cast<int64_t>(s) * s;
        int64_t base = static_cast<int64_t>(sample_index) * t.shape[1] * cells;
        auto at = [&](int ch, int64_t j) { return (*t.data)[base + ch * cells + j]; };
        for (int64_t j = 0; j < cells; ++j) {
            int row = static_cast<int>(j / s), col = static_cast<int>(j % s);
            double obj = sigmoid_d(at(4, j));
            int best_c = 0;
            double best_logit = at(5, j);
            for (int c = 1; c < geom.num_classes; ++c)
                if (at(5 + c, j) > best_logit) {
                    best_logit = at(5 + c, j);
                    best_c = c;
                }
            double conf = obj * sigmoid_d(best_logit);
            if (conf < conf_thresh) continue;
            double cx = (col + sigmoid_d(at(0, j))) / s;
            double cy = (row + sigmoid_d(at(1, j))) / s;
            double w = sigmoid_d(at(2, j));
            double h = sigmoid_d(at(3, j));
            BBox b = BBox::from_cxcywh(cx, cy, w, h);
            b.x1 = std::clamp(b.x1, 0.0, 1.0);
            b.y1 = std::clamp(b.y1, 0.0, 1.0);
            b.x2 = std::clamp(b.x2, 0.0, 1.0);
            b.y2 = std::clamp(b.y2, 0.0, 1.0);
            dets.push_back(Detection{best_c, conf, b});
        }
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    return dets;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    std::vector<Detection> kept;
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : kept)
            if (k.class_id == d.class_id && iou(k.box, d.box) > iou_thresh) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

namespace {

template <class T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out.write(kMagic, 4);
    write_raw(out, kFormatVersion);
    write_raw(out, static_cast<uint32_t>(params.geom.input_size));
    for (int s : params.geom.strides) write_raw(out, static_cast<uint32_t>(s));
    write_raw(out, static_cast<uint32_t>(params.geom.boxes_per_cell));
    write_raw(out, static_cast<uint32_t>(params.geom.num_classes));
    write_raw(out, static_cast<uint32_t>(params.tensors.size()));
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        const std::string& name = params.names[i];
        const Tensor& t = params.tensors[i];
        write_raw(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw(out, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) write_raw(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data->data()),
                  static_cast<std::streamsize>(t.data->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
    out.close();
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    uint32_t version = read_raw<uint32_t>(in, path);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    ModelParams p;
    p.geom.input_size = static_cast<int>(read_raw<uint32_t>(in, path));
    for (int& s : p.geom.strides) s = static_cast<int>(read_raw<uint32_t>(in, path));
    p.geom.boxes_per_cell = static_cast<int>(read_raw<uint32_t>(in, path));
    p.geom.num_classes = static_cast<int>(read_raw<uint32_t>(in, path));
    uint32_t count = read_raw<uint32_t>(in, path);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nlen = read_raw<uint32_t>(in, path);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        uint32_t rank = read_raw<uint32_t>(in, path);
        Shape shape;
        for (uint32_t d = 0; d < rank; ++d)
            shape.push_back(static_cast<int>(read_raw<uint32_t>(in, path)));
        std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        p.names.push_back(std::move(name));
        p.tensors.emplace_back(std::move(shape), std::move(data));
    }
    p.geom.validate();
    return p;
}

}  // namespace ddacdn
