#ifndef DDACDN_AUGMENT_HPP
#define DDACDN_AUGMENT_HPP

#include <array>

#include "ddacdn/bbox.hpp"
#include "ddacdn/rng.hpp"

namespace ddacdn {

enum class AugKind { sharpen, channel_scale, gaussian_noise, rotate, translate, contrast };
constexpr std::array<AugKind, 6> kAllAugKinds = {
    AugKind::sharpen,       AugKind::channel_scale, AugKind::gaussian_noise,
    AugKind::rotate,        AugKind::translate,     AugKind::contrast};

struct AugmentConfig {
    double sharpen_amount = 0.5;       // unsharp mask, 3x3 box blur
    double scale_lo = 0.8, scale_hi = 1.2;
    double noise_sigma = 5.0;
    double rotate_max_deg = 10.0;
    double translate_max = 0.1;        // fraction of each axis
    double contrast_lo = 0.7, contrast_hi = 1.3;
};

// Deterministic transforms with explicit parameters; labels follow geometry
// (axis-aligned hull of transformed corners, clipped, zero-area boxes dropped).
LabeledImage sharpen(const LabeledImage& s, double amount);
LabeledImage brightness_scale(const LabeledImage& s, double factor);
LabeledImage add_gaussian_noise(const LabeledImage& s, double sigma, Rng& rng);
LabeledImage rotate(const LabeledImage& s, double angle_deg);
LabeledImage translate(const LabeledImage& s, double dx, double dy);
LabeledImage contrast(const LabeledImage& s, double factor);

// Samples the kind's parameters from rng and applies it.
LabeledImage augment(const LabeledImage& sample, AugKind kind, Rng& rng,
                     const AugmentConfig& cfg = {});

// Exactly round(ratio*W*H) distinct pixels perturbed by N(0, sigma^2), clamped.
ImageGray corrupt_gaussian(const ImageGray& img, double ratio, double sigma, Rng& rng);

}  // namespace ddacdn

#endif
