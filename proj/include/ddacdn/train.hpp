#ifndef DDACDN_TRAIN_HPP
#define DDACDN_TRAIN_HPP

#include <string>
#include <vector>

#include "ddacdn/apage.hpp"
#include "ddacdn/augment.hpp"
#include "ddacdn/detector.hpp"
#include "ddacdn/losses.hpp"
#include "ddacdn/mkmmd.hpp"

namespace ddacdn {

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
    int epochs = 60;
    int batch_per_domain = 8;
    Optimizer optimizer = Optimizer::sgd_momentum;
    double lr = 0.01;
    double momentum = 0.9;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    LossWeights weights;
    FocalParams focal;
    ApageConfig apage;
    AugmentConfig aug;
    DetectorGeometry geom;
    bool use_apage = true;
    bool use_domain_loss = true;
    bool use_intermediate = true;
    bool augment_data = true;
    bool adaptive_bandwidth = true;  // median heuristic per batch
    double frozen_bandwidth = 1.0;   // used when adaptive_bandwidth is false
    int mmd_kernels = 5;
    int min_target_per_category = 1;
    uint64_t seed = 1;
    std::string checkpoint_dir;  // per-epoch checkpoints when non-empty

    void validate() const;
};

struct TrainRecord {
    int epoch = 0;
    int iter = 0;
    double l_box = 0, l_cls = 0, l_obj = 0;
    double l_dom[3] = {0, 0, 0};
    double total = 0;
    int lambda_obj = 0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
};

void write_train_log(const TrainLog& log, const std::string& path);

struct OptimizerState {
    std::vector<Tensor> velocity;  // sgd momentum buffers
    std::vector<Tensor> m, v;      // adam moments
    long step = 0;
};

// grads[i] aligns with params.tensors[i]; in-place update.
void optimizer_step(ModelParams& params, const std::vector<Tensor>& grads, OptimizerState& state,
                    const TrainConfig& cfg);

// Algorithm-1 training: category-balanced target batches, APAGE on target,
// six-way augmentation, shared-weight two-branch forward, three-scale MK-MMD
// domain loss, intermediate-domain supervised pass, one update per iteration.
std::pair<ModelParams, TrainLog> train_ddacdn(const TrainConfig& cfg,
                                              const std::vector<LabeledImage>& source_train,
                                              const std::vector<LabeledImage>& target_train);

// Source-only supervised training (no APAGE, no domain loss, no intermediate).
std::pair<ModelParams, TrainLog> train_baseline(const TrainConfig& cfg,
                                                const std::vector<LabeledImage>& source_train);

struct EvalConfig {
    double conf_thresh = 0.25;
    double nms_iou = 0.45;
    double match_iou = 0.5;
    bool apply_apage = false;
    ApageConfig apage;
};

std::vector<std::vector<Detection>> run_inference(const ModelParams& params,
                                                  const std::vector<LabeledImage>& data,
                                                  const EvalConfig& cfg);

// Writes content to path atomically (temp file + rename).
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace ddacdn

#endif
