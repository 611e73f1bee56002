#include "ddacdn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace ddacdn {

namespace {

uint8_t clamp_u8(double v) {
    long r = std::lround(v);
    return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

// hull of transformed box corners, clipped to [0,1]; false if degenerate
bool transform_box(const BBox& in, const std::function<void(double&, double&)>& map, BBox& out) {
    double xs[4] = {in.x1, in.x2, in.x1, in.x2};
    double ys[4] = {in.y1, in.y1, in.y2, in.y2};
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    for (int i = 0; i < 4; ++i) {
        map(xs[i], ys[i]);
        minx = std::min(minx, xs[i]);
        maxx = std::max(maxx, xs[i]);
        miny = std::min(miny, ys[i]);
        maxy = std::max(maxy, ys[i]);
    }
    out.x1 = std::clamp(minx, 0.0, 1.0);
    out.y1 = std::clamp(miny, 0.0, 1.0);
    out.x2 = std::clamp(maxx, 0.0, 1.0);
    out.y2 = std::clamp(maxy, 0.0, 1.0);
    return out.x2 > out.x1 && out.y2 > out.y1;
}

LabeledImage with_boxes(const LabeledImage& s, const ImageGray& img,
                        const std::function<void(double&, double&)>& map) {
    LabeledImage out;
    out.image = img;
    for (const auto& lab : s.labels) {
        BBox b;
        if (transform_box(lab.box, map, b)) out.labels.push_back(ObjectLabel{lab.class_id, b});
    }
    return out;
}

std::function<void(double&, double&)> identity_map() {
    return [](double&, double&) {};
}

}  // namespace

LabeledImage sharpen(const LabeledImage& s, double amount) {
    const ImageGray& in = s.image;
    ImageGray out = in;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double blur = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int xx = std::clamp(x + dx, 0, in.width - 1);
                    int yy = std::clamp(y + dy, 0, in.height - 1);
                    blur += in.at(xx, yy);
                }
            blur /= 9.0;
            out.at(x, y) = clamp_u8(in.at(x, y) + amount * (in.at(x, y) - blur));
        }
    return with_boxes(s, out, identity_map());
}

LabeledImage brightness_scale(const LabeledImage& s, double factor) {
    ImageGray out = s.image;
    for (auto& p : out.pixels) p = clamp_u8(p * factor);
    return with_boxes(s, out, identity_map());
}

LabeledImage add_gaussian_noise(const LabeledImage& s, double sigma, Rng& rng) {
    ImageGray out = s.image;
    for (auto& p : out.pixels) p = clamp_u8(p + rng.normal(0.0, sigma));
    return with_boxes(s, out, identity_map());
}

LabeledImage rotate(const LabeledImage& s, double angle_deg) {
    const ImageGray& in = s.image;
    double a = angle_deg * M_PI / 180.0;
    double ca = std::cos(a), sa = std::sin(a);
    double cx = (in.width - 1) / 2.0, cy = (in.height - 1) / 2.0;
    ImageGray out(in.width, in.height);
    // inverse mapping with bilinear sampling, edge pixels clamped
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double rx = ca * (x - cx) + sa * (y - cy) + cx;
            double ry = -sa * (x - cx) + ca * (y - cy) + cy;
            rx = std::clamp(rx, 0.0, in.width - 1.0);
            ry = std::clamp(ry, 0.0, in.height - 1.0);
            int x0 = static_cast<int>(rx), y0 = static_cast<int>(ry);
            int x1 = std::min(x0 + 1, in.width - 1), y1 = std::min(y0 + 1, in.height - 1);
            double fx = rx - x0, fy = ry - y0;
            double v = (1 - fy) * ((1 - fx) * in.at(x0, y0) + fx * in.at(x1, y0)) +
                       fy * ((1 - fx) * in.at(x0, y1) + fx * in.at(x1, y1));
            out.at(x, y) = clamp_u8(v);
        }
    // forward map for labels, in normalized coordinates around (0.5, 0.5)
    auto map = [ca, sa](double& bx, double& by) {
        double px = bx - 0.5, py = by - 0.5;
        bx = ca * px - sa * py + 0.5;
        by = sa * px + ca * py + 0.5;
    };
    return with_boxes(s, out, map);
}

LabeledImage translate(const LabeledImage& s, double dx, double dy) {
    const ImageGray& in = s.image;
    int sx = static_cast<int>(std::lround(dx * in.width));
    int sy = static_cast<int>(std::lround(dy * in.height));
    ImageGray out(in.width, in.height, 0);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            int ox = x + sx, oy = y + sy;
            if (ox >= 0 && ox < in.width && oy >= 0 && oy < in.height)
                out.at(ox, oy) = in.at(x, y);
        }
    double ndx = static_cast<double>(sx) / in.width, ndy = static_cast<double>(sy) / in.height;
    auto map = [ndx, ndy](double& bx, double& by) {
        bx += ndx;
        by += ndy;
    };
    return with_boxes(s, out, map);
}

LabeledImage contrast(const LabeledImage& s, double factor) {
    double m = pixel_mean(s.image);
    ImageGray out = s.image;
    for (auto& p : out.pixels) p = clamp_u8(m + factor * (p - m));
    return with_boxes(s, out, identity_map());
}

LabeledImage augment(const LabeledImage& sample, AugKind kind, Rng& rng,
                     const AugmentConfig& cfg) {
    switch (kind) {
        case AugKind::sharpen:
            return sharpen(sample, cfg.sharpen_amount);
        case AugKind::channel_scale:
            return brightness_scale(sample, rng.uniform(cfg.scale_lo, cfg.scale_hi));
        case AugKind::gaussian_noise:
            return add_gaussian_noise(sample, cfg.noise_sigma, rng);
        case AugKind::rotate:
            return rotate(sample, rng.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg));
        case AugKind::translate:
            return translate(sample, rng.uniform(-cfg.translate_max, cfg.translate_max),
                             rng.uniform(-cfg.translate_max, cfg.translate_max));
        case AugKind::contrast:
            return contrast(sample, rng.uniform(cfg.contrast_lo, cfg.contrast_hi));
    }
    throw std::invalid_argument("augment: unknown kind");
}

ImageGray corrupt_gaussian(const ImageGray& img, double ratio, double sigma, Rng& rng) {
    if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("corrupt_gaussian: ratio outside [0,1]");
    size_t total = img.size();
    size_t count = static_cast<size_t>(std::lround(ratio * static_cast<double>(total)));
    ImageGray out = img;
    // partial Fisher-Yates to pick `count` distinct positions
    std::vector<uint32_t> idx(total);
    for (size_t i = 0; i < total; ++i) idx[i] = static_cast<uint32_t>(i);
    for (size_t i = 0; i < count; ++i) {
        size_t j = i + static_cast<size_t>(rng.uniform_int(total - i));
        std::swap(idx[i], idx[j]);
        out.pixels[idx[i]] = clamp_u8(out.pixels[idx[i]] + rng.normal(0.0, sigma));
    }
    return out;
}

}  // namespace ddacdn
