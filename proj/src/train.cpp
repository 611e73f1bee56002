#include "ddacdn/train.hpp"

#include "ddacdn/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace ddacdn {

void TrainConfig::validate() const {
    if (epochs <= 0 || batch_per_domain <= 0)
        throw std::invalid_argument("train: epochs and batch size must be positive");
    if (lr <= 0) throw std::invalid_argument("train: learning rate must be > 0");
    geom.validate();
    apage.validate();
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ostringstream out;
    out << "epoch,iter,l_box,l_cls,l_obj,l_dom1,l_dom2,l_dom3,total,lambda_obj\n";
    char buf[256];
    for (const auto& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", r.epoch,
                      r.iter, r.l_box, r.l_cls, r.l_obj, r.l_dom[0], r.l_dom[1], r.l_dom[2],
                      r.total, r.lambda_obj);
        out << buf;
    }
    atomic_write_file(path, out.str());
}

void atomic_write_file(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

void optimizer_step(ModelParams& params, const std::vector<Tensor>& grads, OptimizerState& state,
                    const TrainConfig& cfg) {
    if (grads.size() != params.tensors.size())
        throw std::invalid_argument("optimizer_step: gradient count mismatch");
    size_t np = params.tensors.size();
    if (state.velocity.size() != np) {
        state.velocity.clear();
        state.m.clear();
        state.v.clear();
        for (const auto& t : params.tensors) {
            state.velocity.push_back(Tensor::zeros(t.shape));
            state.m.push_back(Tensor::zeros(t.shape));
            state.v.push_back(Tensor::zeros(t.shape));
        }
        state.step = 0;
    }
    ++state.step;
    for (size_t i = 0; i < np; ++i) {
        Tensor& p = params.tensors[i];
        const Tensor& g = grads[i];
        if (g.shape != p.shape)
            throw std::invalid_argument("optimizer_step: shape mismatch for " + params.names[i] +
                                        ": " + shape_str(g.shape) + " vs " + shape_str(p.shape));
        if (cfg.optimizer == Optimizer::sgd_momentum) {
            Tensor& v = state.velocity[i];
            for (int64_t k = 0; k < p.size(); ++k) {
                (*v.data)[k] = cfg.momentum * (*v.data)[k] + (*g.data)[k];
                (*p.data)[k] -= cfg.lr * (*v.data)[k];
            }
        } else {
            Tensor& m = state.m[i];
            Tensor& v = state.v[i];
            double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
            double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
            double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
            for (int64_t k = 0; k < p.size(); ++k) {
                double gk = (*g.data)[k];
                (*m.data)[k] = b1 * (*m.data)[k] + (1 - b1) * gk;
                (*v.data)[k] = b2 * (*v.data)[k] + (1 - b2) * gk * gk;
                double mh = (*m.data)[k] / c1;
                double vh = (*v.data)[k] / c2;
                (*p.data)[k] -= cfg.lr * mh / (std::sqrt(vh) + cfg.adam_eps);
            }
        }
    }
}

namespace {

int sample_category(const LabeledImage& s) {
    return s.labels.empty() ? -1 : s.labels[0].class_id;
}

// supervised losses for a batch of samples sharing one raw-prediction forward
struct SupervisedLosses {
    Tensor box, cls, obj;
    int lambda_obj = 0;
};

SupervisedLosses supervised_losses(const RawPredictions& raw,
                                   const std::vector<LabeledImage>& batch,
                                   const TrainConfig& cfg) {
    SupervisedLosses out{Tensor(0.0), Tensor(0.0), Tensor(0.0), 0};
    for (size_t i = 0; i < batch.size(); ++i) {
        TargetAssignment assign = assign_targets(batch[i].labels, cfg.geom);
        if (assign.has_objects) out.lambda_obj = 1;
        SamplePredictions sp = sample_predictions(raw, static_cast<int>(i));
        out.box = add(out.box, box_loss(assign, sp));
        out.cls = add(out.cls, cls_loss(assign, sp, cfg.focal));
        out.obj = add(out.obj, obj_loss(assign, sp, cfg.focal, cfg.weights));
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    out.box = mul(out.box, inv);
    out.cls = mul(out.cls, inv);
    out.obj = mul(out.obj, inv);
    return out;
}

std::vector<ImageGray> batch_images(const std::vector<LabeledImage>& batch) {
    std::vector<ImageGray> imgs;
    imgs.reserve(batch.size());
    for (const auto& s : batch) imgs.push_back(s.image);
    return imgs;
}

std::pair<ModelParams, TrainLog> train_impl(const TrainConfig& cfg,
                                            const std::vector<LabeledImage>& source_train,
                                            const std::vector<LabeledImage>& target_train,
                                            bool adapt) {
    cfg.validate();
    if (source_train.empty()) throw std::invalid_argument("train: empty source set");

    // category-indexed target pool (APAGE applied once, then expanded by the
    // six augmentation approaches)
    std::vector<std::vector<LabeledImage>> target_by_cat(
        static_cast<size_t>(cfg.geom.num_classes));
    Rng prep_rng(cfg.seed ^ 0xA5A5A5A5ULL);
    if (adapt) {
        for (const auto& t : target_train) {
            int c = sample_category(t);
            if (c < 0 || c >= cfg.geom.num_classes)
                throw std::invalid_argument("train: target sample without a valid category label");
            LabeledImage prepped = t;
            if (cfg.use_apage) prepped.image = apage(prepped.image, cfg.apage);
            target_by_cat[static_cast<size_t>(c)].push_back(prepped);
            if (cfg.augment_data)
                for (AugKind kind : kAllAugKinds)
                    target_by_cat[static_cast<size_t>(c)].push_back(
                        augment(prepped, kind, prep_rng, cfg.aug));
        }
        for (int c = 0; c < cfg.geom.num_classes; ++c) {
            int have = static_cast<int>(target_by_cat[static_cast<size_t>(c)].size());
            int need = std::max(1, cfg.min_target_per_category);
            if (have < need)
                throw std::runtime_error("train: insufficient labeled target samples for category " +
                                         std::string(kCategoryNames[c]) + " (" +
                                         std::to_string(have) + " < " + std::to_string(need) + ")");
        }
    }

    Rng rng(cfg.seed);
    ModelParams params = ModelParams::init(cfg.geom, rng);
    OptimizerState opt_state;
    TrainLog log;

    int batch = cfg.batch_per_domain;
    int iters_per_epoch =
        static_cast<int>((source_train.size() + static_cast<size_t>(batch) - 1) /
                         static_cast<size_t>(batch));
    std::vector<size_t> order(source_train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int iter_global = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(i))]);
        for (int it = 0; it < iters_per_epoch; ++it) {
            ++iter_global;
            // source mini-batch, one random augmentation per drawn image
            std::vector<LabeledImage> src_batch;
            for (int k = 0; k < batch; ++k) {
                size_t idx = order[(static_cast<size_t>(it) * batch + k) % order.size()];
                const LabeledImage& s = source_train[idx];
                if (cfg.augment_data) {
                    AugKind kind = kAllAugKinds[rng.uniform_int(6)];
                    src_batch.push_back(augment(s, kind, rng, cfg.aug));
                } else {
                    src_batch.push_back(s);
                }
            }
            // category-balanced target mini-batch
            std::vector<LabeledImage> tgt_batch;
            if (adapt) {
                for (int k = 0; k < batch; ++k) {
                    auto& pool = target_by_cat[static_cast<size_t>(k % cfg.geom.num_classes)];
                    tgt_batch.push_back(pool[static_cast<size_t>(rng.uniform_int(pool.size()))]);
                }
            }

            Graph graph;
            BoundParams bp = bind_params(params, &graph);

            TrainRecord rec;
            rec.epoch = epoch;
            rec.iter = iter_global;

            Tensor dom(0.0);
            std::vector<LabeledImage> sup_batch;
            RawPredictions sup_raw;

            if (adapt) {
                FeaturePyramid pyr_s =
                    backbone_forward(bp, images_to_tensor(batch_images(src_batch), cfg.geom));
                FeaturePyramid pyr_t =
                    backbone_forward(bp, images_to_tensor(batch_images(tgt_batch), cfg.geom));

                if (cfg.use_domain_loss) {
                    std::vector<Tensor> pooled_s, pooled_t;
                    std::vector<KernelBank> banks;
                    for (int sc = 0; sc < 3; ++sc) {
                        Tensor ps = global_avg_pool(pyr_s.scales[static_cast<size_t>(sc)]);
                        Tensor pt = global_avg_pool(pyr_t.scales[static_cast<size_t>(sc)]);
                        double base =
                            cfg.adaptive_bandwidth
                                ? median_bandwidth(*ps.data, *pt.data, ps.shape[1])
                                : cfg.frozen_bandwidth;
                        banks.push_back(KernelBank::multi_scale(base, cfg.mmd_kernels));
                        pooled_s.push_back(ps);
                        pooled_t.push_back(pt);
                        rec.l_dom[sc] =
                            cfg.weights.beta[sc] *
                            mmd2(banks.back(), Tensor(ps.shape, *ps.data),
                                 Tensor(pt.shape, *pt.data))
                                .scalar();
                    }
                    dom = domain_loss(pooled_s, pooled_t, banks, cfg.weights.beta);
                }

                if (cfg.use_intermediate) {
                    DomainBatch bs, bt;
                    bs.domain = Domain::source;
                    bt.domain = Domain::target;
                    for (const auto& s : src_batch) bs.samples.push_back({s, Domain::source});
                    for (const auto& t : tgt_batch) bt.samples.push_back({t, Domain::target});
                    DomainBatch di = build_intermediate(bs, bt, rng);
                    for (const auto& ds : di.samples) sup_batch.push_back(ds.sample);
                    FeaturePyramid pyr_i =
                        backbone_forward(bp, images_to_tensor(batch_images(sup_batch), cfg.geom));
                    sup_raw = head_forward(bp, pyr_i);
                } else {
                    sup_batch = src_batch;
                    sup_raw = head_forward(bp, pyr_s);
                }
            } else {
                sup_batch = src_batch;
                FeaturePyramid pyr =
                    backbone_forward(bp, images_to_tensor(batch_images(sup_batch), cfg.geom));
                sup_raw = head_forward(bp, pyr);
            }

            SupervisedLosses sup = supervised_losses(sup_raw, sup_batch, cfg);
            Tensor total = total_loss(sup.box, sup.cls, sup.obj, dom, sup.lambda_obj, cfg.weights);

            rec.l_box = sup.box.scalar();
            rec.l_cls = sup.cls.scalar();
            rec.l_obj = sup.obj.scalar();
            rec.total = total.scalar();
            rec.lambda_obj = sup.lambda_obj;
            for (double v : {rec.l_box, rec.l_cls, rec.l_obj, rec.l_dom[0], rec.l_dom[1],
                             rec.l_dom[2], rec.total})
                if (!std::isfinite(v))
                    throw std::runtime_error("train: non-finite loss at epoch " +
                                             std::to_string(epoch) + " iteration " +
                                             std::to_string(iter_global));
            log.records.push_back(rec);

            graph.backward(total);
            std::vector<Tensor> grads;
            grads.reserve(params.tensors.size());
            for (const auto& leaf : bp.leaves) grads.push_back(graph.grad(leaf));
            optimizer_step(params, grads, opt_state, cfg);
        }
        if (!cfg.checkpoint_dir.empty()) {
            std::error_code ec;
            fs::create_directories(cfg.checkpoint_dir, ec);
            char name[64];
            std::snprintf(name, sizeof(name), "/model_epoch_%03d.ckpt", epoch);
            save_checkpoint(params, cfg.checkpoint_dir + name);
        }
    }
    return {std::move(params), std::move(log)};
}

}  // namespace

std::pair<ModelParams, TrainLog> train_ddacdn(const TrainConfig& cfg,
                                              const std::vector<LabeledImage>& source_train,
                                              const std::vector<LabeledImage>& target_train) {
    // with every adaptation ingredient switched off this is exactly the baseline
    bool adapt = cfg.use_domain_loss || cfg.use_intermediate || cfg.use_apage;
    return train_impl(cfg, source_train, target_train, adapt);
}

std::pair<ModelParams, TrainLog> train_baseline(const TrainConfig& cfg,
                                                const std::vector<LabeledImage>& source_train) {
    return train_impl(cfg, source_train, {}, false);
}

std::vector<std::vector<Detection>> run_inference(const ModelParams& params,
                                                  const std::vector<LabeledImage>& data,
                                                  const EvalConfig& cfg) {
    ModelParams& p = const_cast<ModelParams&>(params);
    BoundParams bp = bind_params(p, nullptr);
    std::vector<std::vector<Detection>> out;
    out.reserve(data.size());
    for (const auto& sample : data) {
        ImageGray img = cfg.apply_apage ? apage(sample.image, cfg.apage) : sample.image;
        Tensor input = images_to_tensor({img}, p.geom);
        FeaturePyramid pyr = backbone_forward(bp, input);
        RawPredictions raw = head_forward(bp, pyr);
        out.push_back(nms(decode(raw, 0, p.geom, cfg.conf_thresh), cfg.nms_iou));
    }
    return out;
}

}  // namespace ddacdn
