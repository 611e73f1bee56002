// ddacdn: command-line front end wiring the library modules together.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddacdn/apage.hpp"
#include "ddacdn/augment.hpp"
#include "ddacdn/config.hpp"
#include "ddacdn/datasynth.hpp"
#include "ddacdn/detector.hpp"
#include "ddacdn/eval.hpp"
#include "ddacdn/mkmmd.hpp"
#include "ddacdn/train.hpp"

namespace fs = std::filesystem;
using namespace ddacdn;

namespace {

std::vector<LabeledImage> load_split(const std::string& dir, const std::string& domain,
                                     const std::string& split) {
    std::vector<LabeledImage> out;
    for (const auto& e : read_manifest(dir + "/manifest.txt"))
        if (e.domain == domain && e.split == split) out.push_back(load_sample(dir, e));
    if (out.empty())
        throw std::runtime_error("no samples with domain=" + domain + " split=" + split + " in " +
                                 dir);
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::istringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ','))
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string(what) + ": bad value \"" + part + "\"");
        }
    if (out.empty()) throw std::runtime_error(std::string(what) + ": empty list");
    return out;
}

TrainConfig make_train_config(const std::string& config_path, uint64_t seed) {
    TrainConfig cfg;
    if (!config_path.empty()) parse_config(config_path).apply(cfg);
    cfg.seed = seed;
    return cfg;
}

std::string metrics_csv(const std::vector<std::vector<Detection>>& dets,
                        const std::vector<LabeledImage>& data, double iou_thresh,
                        int num_classes) {
    std::vector<ClassCounts> box(static_cast<size_t>(num_classes));
    std::vector<ClassCounts> img(static_cast<size_t>(num_classes));
    for (size_t i = 0; i < data.size(); ++i) {
        accumulate_counts(box, match_detections(dets[i], data[i].labels, iou_thresh, num_classes));
        accumulate_counts(img, image_level_counts(dets[i], data[i].labels, num_classes));
    }
    std::ostringstream out;
    out << "mode,class,tp,fp,fn,tn,precision,recall,f1,acc\n";
    char buf[256];
    auto emit = [&](const char* mode, const std::vector<ClassCounts>& counts) {
        for (int c = 0; c < num_classes; ++c) {
            const ClassCounts& cc = counts[static_cast<size_t>(c)];
            Metrics m = metrics(cc);
            std::snprintf(buf, sizeof(buf), "%s,%s,%ld,%ld,%ld,%ld,%.9g,%.9g,%.9g,%.9g\n", mode,
                          kCategoryNames[c], cc.tp, cc.fp, cc.fn, cc.tn, m.precision, m.recall,
                          m.f1, m.acc);
            out << buf;
        }
    };
    emit("box", box);
    emit("image", img);
    return out.str();
}

int run(int argc, char** argv) {
    CLI::App app{"DDACDN crack-detection toolkit"};
    app.require_subcommand(1);

    // enhance
    auto* enhance = app.add_subcommand("enhance", "APAGE image enhancement (PGM in/out)");
    std::string in_path, out_path, tiles = "8x8";
    int patch = 100;
    double clip = 2.0;
    enhance->add_option("--in", in_path, "input PGM")->required();
    enhance->add_option("--out", out_path, "output PGM")->required();
    enhance->add_option("--patch", patch, "patch size in pixels");
    enhance->add_option("--clip", clip, "CLAHE clip limit");
    enhance->add_option("--tiles", tiles, "CLAHE tile grid, e.g. 8x8");
    enhance->callback([&] {
        ApageConfig cfg;
        cfg.patch_h = cfg.patch_w = patch;
        cfg.clahe_clip = clip;
        size_t x = tiles.find('x');
        if (x == std::string::npos) throw std::runtime_error("--tiles: expected <rows>x<cols>");
        cfg.clahe_tiles_y = std::stoi(tiles.substr(0, x));
        cfg.clahe_tiles_x = std::stoi(tiles.substr(x + 1));
        cfg.validate();
        write_pgm(apage(read_pgm(in_path), cfg), out_path);
    });

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic two-domain benchmark");
    std::string synth_out, synth_config;
    uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--config", synth_config, "key=value config file");
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->callback([&] {
        SynthSpec spec;
        if (!synth_config.empty()) parse_config(synth_config).apply(spec);
        spec.seed = synth_seed;
        synth_dataset(spec, synth_out);
    });

    // train
    auto* train = app.add_subcommand("train", "train a detector");
    std::string mode = "ddacdn", src_dir, tgt_dir, train_config, train_out;
    uint64_t train_seed = 1;
    train->add_option("--mode", mode, "ddacdn|baseline")
        ->check(CLI::IsMember({"ddacdn", "baseline"}));
    train->add_option("--source", src_dir, "source dataset directory")->required();
    train->add_option("--target", tgt_dir, "target dataset directory");
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--seed", train_seed, "RNG seed");
    train->add_option("--out", train_out, "output directory")->required();
    train->callback([&] {
        TrainConfig cfg = make_train_config(train_config, train_seed);
        auto source = load_split(src_dir, "source", "train");
        std::pair<ModelParams, TrainLog> result;
        if (mode == "ddacdn") {
            if (tgt_dir.empty()) throw std::runtime_error("train: --target required in ddacdn mode");
            auto target = load_split(tgt_dir, "target", "train");
            result = train_ddacdn(cfg, source, target);
        } else {
            result = train_baseline(cfg, source);
        }
        std::error_code ec;
        fs::create_directories(train_out, ec);
        save_checkpoint(result.first, train_out + "/model.ckpt");
        write_train_log(result.second, train_out + "/train_log.csv");
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string model_path, data_dir, metrics_out, pr_out, eval_domain = "target",
                eval_split = "test";
    double eval_iou = 0.5, eval_conf = 0.25;
    bool eval_apage = false;
    eval->add_option("--model", model_path, "checkpoint path")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--iou", eval_iou, "matching IoU threshold");
    eval->add_option("--conf", eval_conf, "confidence threshold");
    eval->add_option("--domain", eval_domain, "manifest domain to evaluate");
    eval->add_option("--split", eval_split, "manifest split to evaluate");
    eval->add_flag("--apage", eval_apage, "apply APAGE enhancement before inference");
    eval->add_option("--out", metrics_out, "metrics CSV path")->required();
    eval->add_option("--pr", pr_out, "optional precision-recall CSV path");
    eval->callback([&] {
        ModelParams params = load_checkpoint(model_path);
        auto data = load_split(data_dir, eval_domain, eval_split);
        EvalConfig ecfg;
        ecfg.conf_thresh = eval_conf;
        ecfg.match_iou = eval_iou;
        ecfg.apply_apage = eval_apage;
        auto dets = run_inference(params, data, ecfg);
        atomic_write_file(metrics_out,
                          metrics_csv(dets, data, eval_iou, params.geom.num_classes));
        if (!pr_out.empty()) {
            EvalConfig pcfg = ecfg;
            pcfg.conf_thresh = 0.0;  // keep everything; the curve sweeps thresholds
            auto all_dets = run_inference(params, data, pcfg);
            std::vector<std::vector<ObjectLabel>> gts;
            for (const auto& s : data) gts.push_back(s.labels);
            auto curve = pr_curve(all_dets, gts, eval_iou, params.geom.num_classes, 21);
            std::ostringstream out;
            out << "class,threshold,precision,recall\n";
            char buf[128];
            for (const auto& p : curve) {
                std::snprintf(buf, sizeof(buf), "all,%.9g,%.9g,%.9g\n", p.threshold, p.precision,
                              p.recall);
                out << buf;
            }
            atomic_write_file(pr_out, out.str());
        }
    });

    // mmd-demo
    auto* mmd = app.add_subcommand("mmd-demo", "MMD on shifted 1-D Gaussians");
    std::string shifts_str = "0,0.5,1,2,4", mmd_out;
    int mmd_n = 500;
    uint64_t mmd_seed = 7;
    mmd->add_option("--shift", shifts_str, "comma-separated mean shifts");
    mmd->add_option("--n", mmd_n, "samples per domain");
    mmd->add_option("--seed", mmd_seed, "RNG seed");
    mmd->add_option("--out", mmd_out, "output CSV")->required();
    mmd->callback([&] {
        auto shifts = parse_double_list(shifts_str, "--shift");
        if (mmd_n < 2) throw std::runtime_error("--n must be >= 2");
        std::ostringstream out;
        out << "shift,mmd2_biased,mmd2_unbiased\n";
        char buf[128];
        for (size_t si = 0; si < shifts.size(); ++si) {
            Rng rng(mmd_seed);  // same base draws per shift; only the mean moves
            std::vector<double> xs(static_cast<size_t>(mmd_n)), xt(static_cast<size_t>(mmd_n));
            for (auto& v : xs) v = rng.normal(0.0, 1.0);
            for (auto& v : xt) v = shifts[si] + rng.normal(0.0, 1.0);
            KernelBank bank = KernelBank::multi_scale(median_bandwidth(xs, xt, 1));
            Tensor ts(Shape{mmd_n, 1}, xs), tt(Shape{mmd_n, 1}, xt);
            double b = mmd2(bank, ts, tt, MmdEstimator::biased).scalar();
            double u = mmd2(bank, ts, tt, MmdEstimator::unbiased).scalar();
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", shifts[si], b, u);
            out << buf;
        }
        atomic_write_file(mmd_out, out.str());
    });

    // robustness
    auto* robust = app.add_subcommand("robustness", "Gaussian-corruption robustness protocol");
    std::string rob_model, rob_data, rob_out, ratios_str = "0,0.1,0.2,0.3";
    double rob_sigma = 25.0;
    int rob_seeds = 3;
    uint64_t rob_seed = 1;
    bool rob_apage = false;
    double rob_iou = 0.5, rob_conf = 0.25;
    robust->add_option("--model", rob_model, "checkpoint path")->required();
    robust->add_option("--data", rob_data, "dataset directory")->required();
    robust->add_option("--ratio", ratios_str, "comma-separated corruption ratios");
    robust->add_option("--sigma", rob_sigma, "corruption noise sigma");
    robust->add_option("--seeds", rob_seeds, "number of corruption seeds");
    robust->add_option("--seed", rob_seed, "base RNG seed");
    robust->add_option("--iou", rob_iou, "matching IoU threshold");
    robust->add_option("--conf", rob_conf, "confidence threshold");
    robust->add_flag("--apage", rob_apage, "apply APAGE before inference");
    robust->add_option("--out", rob_out, "output CSV")->required();
    robust->callback([&] {
        auto ratios = parse_double_list(ratios_str, "--ratio");
        if (rob_seeds < 1) throw std::runtime_error("--seeds must be >= 1");
        ModelParams params = load_checkpoint(rob_model);
        auto data = load_split(rob_data, "target", "test");
        EvalConfig ecfg;
        ecfg.conf_thresh = rob_conf;
        ecfg.match_iou = rob_iou;
        ecfg.apply_apage = rob_apage;
        int nc = params.geom.num_classes;
        std::ostringstream out;
        out << "ratio,seed,class,f1\n";
        char buf[128];
        for (double ratio : ratios)
            for (int s = 0; s < rob_seeds; ++s) {
                Rng rng(rob_seed + static_cast<uint64_t>(s));
                std::vector<LabeledImage> corrupted = data;
                for (auto& sample : corrupted)
                    sample.image = corrupt_gaussian(sample.image, ratio, rob_sigma, rng);
                auto dets = run_inference(params, corrupted, ecfg);
                std::vector<ClassCounts> counts(static_cast<size_t>(nc));
                for (size_t i = 0; i < corrupted.size(); ++i)
                    accumulate_counts(
                        counts, match_detections(dets[i], corrupted[i].labels, rob_iou, nc));
                for (int c = 0; c < nc; ++c) {
                    std::snprintf(buf, sizeof(buf), "%.9g,%d,%s,%.9g\n", ratio, s,
                                  kCategoryNames[c], metrics(counts[static_cast<size_t>(c)]).f1);
                    out << buf;
                }
            }
        atomic_write_file(rob_out, out.str());
    });

    // dump-features
    auto* dump = app.add_subcommand("dump-features", "dump per-stage feature maps as CSV");
    std::string dump_model, dump_image, dump_dir;
    dump->add_option("--model", dump_model, "checkpoint path")->required();
    dump->add_option("--image", dump_image, "input PGM")->required();
    dump->add_option("--out", dump_dir, "output directory")->required();
    dump->callback([&] {
        ModelParams params = load_checkpoint(dump_model);
        ImageGray img = read_pgm(dump_image);
        BoundParams bp = bind_params(params, nullptr);
        FeaturePyramid pyr = backbone_forward(bp, images_to_tensor({img}, params.geom));
        std::error_code ec;
        fs::create_directories(dump_dir, ec);
        for (int s = 0; s < 3; ++s) {
            const Tensor& t = pyr.scales[static_cast<size_t>(s)];
            int ch = t.shape[1], grid = t.shape[2];
            std::ostringstream out;
            out << "channel,y,x,value\n";
            char buf[128];
            for (int c = 0; c < ch; ++c)
                for (int y = 0; y < grid; ++y)
                    for (int x = 0; x < grid; ++x) {
                        int64_t idx = (static_cast<int64_t>(c) * grid + y) * grid + x;
                        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.9g\n", c, y, x, t[idx]);
                        out << buf;
                    }
            atomic_write_file(dump_dir + "/stage" + std::to_string(s + 2) + ".csv", out.str());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::string(e.what()).find("non-finite") != std::string::npos ? 3 : 2;
    }
}
