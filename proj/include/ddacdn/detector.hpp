#ifndef DDACDN_DETECTOR_HPP
#define DDACDN_DETECTOR_HPP

#include <string>
#include <vector>

#include "ddacdn/bbox.hpp"
#include "ddacdn/losses.hpp"
#include "ddacdn/rng.hpp"
#include "ddacdn/tensor.hpp"

namespace ddacdn {

struct DetectorGeometry {
    int input_size = 64;
    int strides[3] = {4, 8, 16};
    int boxes_per_cell = 1;  // M
    int num_classes = 4;     // C

    int grid(int scale) const { return input_size / strides[scale]; }
    int head_channels() const { return boxes_per_cell * (5 + num_classes); }
    void validate() const;
};

// Stem + three stride-2 stages + three 1x1 heads. One parameter set is shared
// by every forward pass (source, target and intermediate branches).
struct ModelParams {
    DetectorGeometry geom;
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;

    static ModelParams init(const DetectorGeometry& geom, Rng& rng);
};

struct FeaturePyramid {
    std::vector<Tensor> scales;  // (batch, ch_i, S_i, S_i) for i = 0..2
};

struct RawPredictions {
    std::vector<Tensor> scales;  // (batch, M*(5+C), S_i, S_i)
};

struct Detection {
    int class_id = 0;
    double confidence = 0.0;  // sigma(obj) * sigma(best class logit)
    BBox box;
};

// Converts 8-bit images to a (batch, 1, H, W) tensor in [0, 1].
Tensor images_to_tensor(const std::vector<ImageGray>& images, const DetectorGeometry& geom);

// When graph is non-null the parameters are registered as leaves there and the
// forward is differentiable; the returned leaf handles alias params.tensors.
struct BoundParams {
    ModelParams* params = nullptr;
    std::vector<Tensor> leaves;
    Tensor& find(const std::string& name);
};
BoundParams bind_params(ModelParams& params, Graph* graph);

FeaturePyramid backbone_forward(BoundParams& bp, const Tensor& images);
RawPredictions head_forward(BoundParams& bp, const FeaturePyramid& pyr);

// Per-sample view of one batch entry of raw predictions, shape (M*(5+C), S, S).
SamplePredictions sample_predictions(const RawPredictions& raw, int sample_index);

TargetAssignment assign_targets(const std::vector<ObjectLabel>& labels,
                                const DetectorGeometry& geom);

std::vector<Detection> decode(const RawPredictions& raw, int sample_index,
                              const DetectorGeometry& geom, double conf_thresh);

std::vector<Detection> nms(std::vector<Detection> dets, double iou_thresh);

// Versioned binary checkpoint: magic "DDAC", format version, geometry, then
// named tensors (u32 name length, bytes, u32 rank, u32 dims, f64 LE values).
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace ddacdn

#endif
