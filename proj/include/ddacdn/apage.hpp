#ifndef DDACDN_APAGE_HPP
#define DDACDN_APAGE_HPP

#include <utility>
#include <vector>

#include "ddacdn/image.hpp"

namespace ddacdn {

struct ApageConfig {
    int patch_h = 100;
    int patch_w = 100;
    std::vector<double> gamma_grid;  // defaults to 0.5..2.0 step 0.1
    double clahe_clip = 2.0;
    int clahe_tiles_x = 8;
    int clahe_tiles_y = 8;

    ApageConfig();
    void validate() const;
};

struct PatchView {
    int x0, y0, w, h;  // pixel rectangle within the parent image
};

// Residual tiling: edge patches take whatever remains, no pixel dropped.
// Returned row-major, rows = ceil(height/patch_h), cols = ceil(width/patch_w).
std::vector<std::vector<PatchView>> split_patches(const ImageGray& img, const ApageConfig& cfg);

ImageGray extract_patch(const ImageGray& img, const PatchView& pv);

// out = round(255 * (in/255)^gamma), clamped
ImageGray gamma_correct(const ImageGray& patch, double gamma);

// Grid gamma maximizing the corrected patch's variance. Ties go to the gamma
// closest to 1.0, then the smaller one.
std::pair<double, ImageGray> select_gamma(const ImageGray& patch, const ApageConfig& cfg);

ImageGray clahe(const ImageGray& img, const ApageConfig& cfg);

// Per-patch variance-maximizing gamma in place, then CLAHE over the image.
ImageGray apage(const ImageGray& img, const ApageConfig& cfg);

// Intermediate result after the patch-gamma stage, before CLAHE.
ImageGray apage_patch_stage(const ImageGray& img, const ApageConfig& cfg);

}  // namespace ddacdn

#endif
