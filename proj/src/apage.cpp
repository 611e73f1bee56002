#include "ddacdn/apage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace ddacdn {

ApageConfig::ApageConfig() {
    gamma_grid.reserve(16);
    for (int i = 5; i <= 20; ++i) gamma_grid.push_back(static_cast<double>(i) / 10.0);
}

void ApageConfig::validate() const {
    if (patch_h <= 0 || patch_w <= 0) throw std::invalid_argument("patch size must be positive");
    if (clahe_clip <= 0) throw std::invalid_argument("clahe clip limit must be positive");
    if (clahe_tiles_x <= 0 || clahe_tiles_y <= 0)
        throw std::invalid_argument("clahe tile counts must be positive");
    if (gamma_grid.empty()) throw std::invalid_argument("gamma grid is empty");
    bool has_one = false;
    for (size_t i = 0; i < gamma_grid.size(); ++i) {
        if (gamma_grid[i] <= 0) throw std::invalid_argument("gamma grid values must be > 0");
        if (i > 0 && gamma_grid[i] <= gamma_grid[i - 1])
            throw std::invalid_argument("gamma grid must be strictly increasing");
        if (gamma_grid[i] == 1.0) has_one = true;
    }
    if (!has_one) throw std::invalid_argument("gamma grid must contain 1.0");
}

std::vector<std::vector<PatchView>> split_patches(const ImageGray& img, const ApageConfig& cfg) {
    if (img.empty()) throw std::invalid_argument("split_patches: empty image");
    int rows = (img.height + cfg.patch_h - 1) / cfg.patch_h;
    int cols = (img.width + cfg.patch_w - 1) / cfg.patch_w;
    std::vector<std::vector<PatchView>> grid(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        grid[r].reserve(static_cast<size_t>(cols));
        for (int c = 0; c < cols; ++c) {
            PatchView pv;
            pv.x0 = c * cfg.patch_w;
            pv.y0 = r * cfg.patch_h;
            pv.w = std::min(cfg.patch_w, img.width - pv.x0);
            pv.h = std::min(cfg.patch_h, img.height - pv.y0);
            grid[r].push_back(pv);
        }
    }
    return grid;
}

ImageGray extract_patch(const ImageGray& img, const PatchView& pv) {
    ImageGray out(pv.w, pv.h);
    for (int y = 0; y < pv.h; ++y)
        for (int x = 0; x < pv.w; ++x) out.at(x, y) = img.at(pv.x0 + x, pv.y0 + y);
    return out;
}

namespace {

std::array<uint8_t, 256> gamma_lut(double gamma) {
    std::array<uint8_t, 256> lut;
    for (int v = 0; v < 256; ++v) {
        double y = 255.0 * std::pow(v / 255.0, gamma);
        long r = std::lround(y);
        lut[static_cast<size_t>(v)] = static_cast<uint8_t>(std::clamp(r, 0L, 255L));
    }
    return lut;
}

}  // namespace

ImageGray gamma_correct(const ImageGray& patch, double gamma) {
    if (gamma <= 0) throw std::domain_error("gamma_correct: gamma must be > 0");
    auto lut = gamma_lut(gamma);
    ImageGray out = patch;
    for (auto& p : out.pixels) p = lut[p];
    return out;
}

std::pair<double, ImageGray> select_gamma(const ImageGray& patch, const ApageConfig& cfg) {
    if (patch.empty()) throw std::invalid_argument("select_gamma: empty patch");
    cfg.validate();
    double best_gamma = 1.0;
    double best_var = -1.0;
    ImageGray best_img;
    for (double g : cfg.gamma_grid) {
        ImageGray corrected = gamma_correct(patch, g);
        double var = pixel_variance(corrected);
        bool better = var > best_var;
        if (var == best_var) {
            // tie-break: gamma closest to 1.0, then smaller gamma
            double cur_d = std::abs(g - 1.0), best_d = std::abs(best_gamma - 1.0);
            better = cur_d < best_d || (cur_d == best_d && g < best_gamma);
        }
        if (better) {
            best_gamma = g;
            best_var = var;
            best_img = std::move(corrected);
        }
    }
    return {best_gamma, std::move(best_img)};
}

ImageGray clahe(const ImageGray& img, const ApageConfig& cfg) {
    cfg.validate();
    int tx = cfg.clahe_tiles_x, ty = cfg.clahe_tiles_y;
    if (img.width < tx || img.height < ty)
        throw std::invalid_argument("clahe: image " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + " smaller than tile grid " +
                                    std::to_string(tx) + "x" + std::to_string(ty));

    // per-tile clipped-histogram CDF mapping
    std::vector<std::array<uint8_t, 256>> maps(static_cast<size_t>(tx * ty));
    std::vector<double> centers_x(static_cast<size_t>(tx)), centers_y(static_cast<size_t>(ty));
    for (int tj = 0; tj < ty; ++tj) {
        int y0 = tj * img.height / ty, y1 = (tj + 1) * img.height / ty;
        centers_y[static_cast<size_t>(tj)] = (y0 + y1 - 1) / 2.0;
        for (int ti = 0; ti < tx; ++ti) {
            int x0 = ti * img.width / tx, x1 = (ti + 1) * img.width / tx;
            centers_x[static_cast<size_t>(ti)] = (x0 + x1 - 1) / 2.0;
            int64_t npix = static_cast<int64_t>(x1 - x0) * (y1 - y0);

            std::array<double, 256> hist{};
            int occupied = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    if (hist[img.at(x, y)] == 0) ++occupied;
                    hist[img.at(x, y)] += 1.0;
                }

            auto& map = maps[static_cast<size_t>(tj * tx + ti)];
            if (occupied <= 1) {
                // a flat tile has nothing to equalize; keep its level unchanged
                for (int v = 0; v < 256; ++v) map[static_cast<size_t>(v)] = static_cast<uint8_t>(v);
                continue;
            }

            double clip = cfg.clahe_clip * static_cast<double>(npix) / 256.0;
            double excess = 0;
            for (auto& h : hist)
                if (h > clip) {
                    excess += h - clip;
                    h = clip;
                }
            double bonus = excess / 256.0;
            for (auto& h : hist) h += bonus;

            double cdf = 0;
            double scale = 255.0 / static_cast<double>(npix);
            for (int v = 0; v < 256; ++v) {
                cdf += hist[static_cast<size_t>(v)];
                long m = std::lround(cdf * scale);
                map[static_cast<size_t>(v)] = static_cast<uint8_t>(std::clamp(m, 0L, 255L));
            }
        }
    }

    // bilinear interpolation of tile mappings between tile centers
    ImageGray out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        int tj0 = 0;
        while (tj0 + 1 < ty && centers_y[static_cast<size_t>(tj0 + 1)] <= y) ++tj0;
        int tj1 = std::min(tj0 + 1, ty - 1);
        double fy = 0.0;
        if (tj1 != tj0 && y >= centers_y[static_cast<size_t>(tj0)])
            fy = (y - centers_y[static_cast<size_t>(tj0)]) /
                 (centers_y[static_cast<size_t>(tj1)] - centers_y[static_cast<size_t>(tj0)]);
        fy = std::clamp(fy, 0.0, 1.0);
        for (int x = 0; x < img.width; ++x) {
            int ti0 = 0;
            while (ti0 + 1 < tx && centers_x[static_cast<size_t>(ti0 + 1)] <= x) ++ti0;
            int ti1 = std::min(ti0 + 1, tx - 1);
            double fx = 0.0;
            if (ti1 != ti0 && x >= centers_x[static_cast<size_t>(ti0)])
                fx = (x - centers_x[static_cast<size_t>(ti0)]) /
                     (centers_x[static_cast<size_t>(ti1)] - centers_x[static_cast<size_t>(ti0)]);
            fx = std::clamp(fx, 0.0, 1.0);

            uint8_t v = img.at(x, y);
            double m00 = maps[static_cast<size_t>(tj0 * tx + ti0)][v];
            double m01 = maps[static_cast<size_t>(tj0 * tx + ti1)][v];
            double m10 = maps[static_cast<size_t>(tj1 * tx + ti0)][v];
            double m11 = maps[static_cast<size_t>(tj1 * tx + ti1)][v];
            double blended = (1 - fy) * ((1 - fx) * m00 + fx * m01) +
                             fy * ((1 - fx) * m10 + fx * m11);
            long r = std::lround(blended);
            out.at(x, y) = static_cast<uint8_t>(std::clamp(r, 0L, 255L));
        }
    }
    return out;
}

ImageGray apage_patch_stage(const ImageGray& img, const ApageConfig& cfg) {
    if (img.empty()) throw std::invalid_argument("apage: empty image");
    ImageGray out = img;
    for (const auto& row : split_patches(img, cfg))
        for (const auto& pv : row) {
            auto [gamma, corrected] = select_gamma(extract_patch(img, pv), cfg);
            (void)gamma;
            for (int y = 0; y < pv.h; ++y)
                for (int x = 0; x < pv.w; ++x) out.at(pv.x0 + x, pv.y0 + y) = corrected.at(x, y);
        }
    return out;
}

ImageGray apage(const ImageGray& img, const ApageConfig& cfg) {
    return clahe(apage_patch_stage(img, cfg), cfg);
}

}  // namespace ddacdn
