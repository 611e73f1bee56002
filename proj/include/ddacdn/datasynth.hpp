#ifndef DDACDN_DATASYNTH_HPP
#define DDACDN_DATASYNTH_HPP

#include <string>
#include <vector>

#include "ddacdn/bbox.hpp"
#include "ddacdn/rng.hpp"

namespace ddacdn {

// Crack categories, fixed ids.
enum Category : int {
    kLongitudinal = 0,
    kTransverse = 1,
    kAlligator = 2,
    kPothole = 3,
};
extern const char* const kCategoryNames[4];

struct SynthStyle {
    double background = 200;
    double texture_amp = 8;       // per-pixel noise
    double illum_gradient = 0;    // left-to-right additive ramp, total swing
    double crack_contrast = 120;  // crack value = background - contrast
    int line_width_min = 2;
    int line_width_max = 4;
};

struct SynthSpec {
    int image_size = 64;
    int num_classes = 4;
    int source_train_per_category = 200;
    int target_train_per_category = 50;
    int target_test_per_category = 50;
    SynthStyle source_style{200, 8, 0, 120, 2, 4};
    SynthStyle target_style{90, 6, 30, 25, 2, 4};
    uint64_t seed = 1;
    bool multi_object = false;

    void validate() const;
};

LabeledImage synth_sample(const SynthSpec& spec, Domain domain, int category, Rng& rng);

struct ManifestEntry {
    std::string stem;
    std::string domain;  // "source" | "target"
    std::string split;   // "train" | "test"
};

// Writes images/*.pgm, labels/*.txt and manifest.txt under out_dir.
std::vector<ManifestEntry> synth_dataset(const SynthSpec& spec, const std::string& out_dir);

// Label file: one `class cx cy w h` line per object, normalized, 6 decimals.
void write_label_file(const std::vector<ObjectLabel>& labels, const std::string& path);
std::vector<ObjectLabel> read_label_file(const std::string& path);

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads image + labels for a manifest entry rooted at dir.
LabeledImage load_sample(const std::string& dir, const ManifestEntry& entry);

}  // namespace ddacdn

#endif
