#include "ddacdn/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ddacdn {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> row(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        size_t diag = row[0];
        row[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t next = std::min({row[j] + 1, row[j - 1] + 1,
                                    diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = row[j];
            row[j] = next;
        }
    }
    return row[b.size()];
}

std::string nearest_key(const std::string& key) {
    const auto& known = known_config_keys();
    std::string best;
    size_t best_d = SIZE_MAX;
    for (const auto& k : known) {
        size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "loss.eta_box", "loss.eta_cls", "loss.eta_obj", "loss.alpha", "loss.gamma",
        "loss.balance", "loss.beta",
        "apage.patch_h", "apage.patch_w", "apage.clahe_clip", "apage.clahe_tiles",
        "train.epochs", "train.batch", "train.optimizer", "train.lr", "train.momentum",
        "train.use_apage", "train.use_domain_loss", "train.use_intermediate",
        "train.augment", "train.adaptive_bandwidth", "train.frozen_bandwidth",
        "mmd.kernels",
        "synth.image_size", "synth.source_train_per_category",
        "synth.target_train_per_category", "synth.target_test_per_category",
        "synth.multi_object",
    };
    return keys;
}

Config parse_config_text(const std::string& text, const std::string& source_name) {
    Config cfg;
    const auto& known = known_config_keys();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = source_name + ":" + std::to_string(lineno);
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(where + ": expected `key = value`, got \"" + line + "\"");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error(where + ": empty key");
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error(where + ": unknown key \"" + key + "\" (did you mean \"" +
                                     nearest_key(key) + "\"?)");
        if (cfg.values.count(key))
            throw std::runtime_error(where + ": duplicate key \"" + key + "\"");
        cfg.values[key] = value;
    }
    return cfg;
}

Config parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

bool Config::has(const std::string& key) const { return values.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    size_t pos = 0;
    double v;
    try {
        v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config key " + key + ": not a number: \"" + it->second + "\"");
    }
    if (pos != it->second.size())
        throw std::runtime_error("config key " + key + ": trailing junk in \"" + it->second + "\"");
    return v;
}

int Config::get_int(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    double v = get_double(key, 0);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw std::runtime_error("config key " + key + ": expected an integer");
    return i;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config key " + key + ": expected true/false, got \"" + it->second +
                             "\"");
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback, size_t n) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw std::runtime_error("config key " + key + ": bad list entry \"" + part + "\"");
        }
    }
    if (out.size() != n)
        throw std::runtime_error("config key " + key + ": expected " + std::to_string(n) +
                                 " comma-separated values, got " + std::to_string(out.size()));
    return out;
}

void Config::apply(TrainConfig& cfg) const {
    cfg.weights.eta_box = get_double("loss.eta_box", cfg.weights.eta_box);
    cfg.weights.eta_cls = get_double("loss.eta_cls", cfg.weights.eta_cls);
    cfg.weights.eta_obj = get_double("loss.eta_obj", cfg.weights.eta_obj);
    cfg.focal.alpha = get_double("loss.alpha", cfg.focal.alpha);
    cfg.focal.gamma = get_double("loss.gamma", cfg.focal.gamma);
    auto bal = get_doubles("loss.balance",
                           {cfg.weights.balance[0], cfg.weights.balance[1], cfg.weights.balance[2]},
                           3);
    auto beta = get_doubles("loss.beta",
                            {cfg.weights.beta[0], cfg.weights.beta[1], cfg.weights.beta[2]}, 3);
    for (int i = 0; i < 3; ++i) {
        cfg.weights.balance[i] = bal[static_cast<size_t>(i)];
        cfg.weights.beta[i] = beta[static_cast<size_t>(i)];
    }

    cfg.apage.patch_h = get_int("apage.patch_h", cfg.apage.patch_h);
    cfg.apage.patch_w = get_int("apage.patch_w", cfg.apage.patch_w);
    cfg.apage.clahe_clip = get_double("apage.clahe_clip", cfg.apage.clahe_clip);
    if (has("apage.clahe_tiles")) {
        std::string v = get_string("apage.clahe_tiles", "");
        size_t x = v.find('x');
        if (x == std::string::npos)
            throw std::runtime_error("config key apage.clahe_tiles: expected <rows>x<cols>");
        cfg.apage.clahe_tiles_y = std::stoi(v.substr(0, x));
        cfg.apage.clahe_tiles_x = std::stoi(v.substr(x + 1));
    }

    cfg.epochs = get_int("train.epochs", cfg.epochs);
    cfg.batch_per_domain = get_int("train.batch", cfg.batch_per_domain);
    std::string opt = get_string("train.optimizer",
                                 cfg.optimizer == Optimizer::adam ? "adam" : "sgd");
    if (opt == "sgd") cfg.optimizer = Optimizer::sgd_momentum;
    else if (opt == "adam") cfg.optimizer = Optimizer::adam;
    else throw std::runtime_error("config key train.optimizer: expected sgd or adam");
    cfg.lr = get_double("train.lr", cfg.lr);
    cfg.momentum = get_double("train.momentum", cfg.momentum);
    cfg.use_apage = get_bool("train.use_apage", cfg.use_apage);
    cfg.use_domain_loss = get_bool("train.use_domain_loss", cfg.use_domain_loss);
    cfg.use_intermediate = get_bool("train.use_intermediate", cfg.use_intermediate);
    cfg.augment_data = get_bool("train.augment", cfg.augment_data);
    cfg.adaptive_bandwidth = get_bool("train.adaptive_bandwidth", cfg.adaptive_bandwidth);
    cfg.frozen_bandwidth = get_double("train.frozen_bandwidth", cfg.frozen_bandwidth);
    cfg.mmd_kernels = get_int("mmd.kernels", cfg.mmd_kernels);
    cfg.validate();
}

void Config::apply(SynthSpec& spec) const {
    spec.image_size = get_int("synth.image_size", spec.image_size);
    spec.source_train_per_category =
        get_int("synth.source_train_per_category", spec.source_train_per_category);
    spec.target_train_per_category =
        get_int("synth.target_train_per_category", spec.target_train_per_category);
    spec.target_test_per_category =
        get_int("synth.target_test_per_category", spec.target_test_per_category);
    spec.multi_object = get_bool("synth.multi_object", spec.multi_object);
    spec.validate();
}

}  // namespace ddacdn
