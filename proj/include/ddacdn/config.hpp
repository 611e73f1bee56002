#ifndef DDACDN_CONFIG_HPP
#define DDACDN_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "ddacdn/datasynth.hpp"
#include "ddacdn/train.hpp"

namespace ddacdn {

// Flat `key = value` configuration file. Comments (#) and blank lines are
// ignored; duplicate and unknown keys are errors (unknown keys get a
// nearest-match suggestion).
struct Config {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // comma-separated reals, must have exactly n entries
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback,
                                    size_t n) const;

    // Overlays config keys onto defaults; validates via the owning structs.
    void apply(TrainConfig& cfg) const;
    void apply(SynthSpec& spec) const;
};

Config parse_config(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& source_name);

const std::vector<std::string>& known_config_keys();

}  // namespace ddacdn

#endif
