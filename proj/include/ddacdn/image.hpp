#ifndef DDACDN_IMAGE_HPP
#define DDACDN_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ddacdn {

// 8-bit single-channel raster, row-major.
struct ImageGray {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    ImageGray() = default;
    ImageGray(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
    bool empty() const { return pixels.empty(); }

    bool operator==(const ImageGray& o) const {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

double pixel_mean(const ImageGray& img);
double pixel_variance(const ImageGray& img);  // population variance
double pixel_std(const ImageGray& img);

// Binary P5 PGM, maxval 255 only. read(write(img)) is bit-exact.
ImageGray read_pgm(const std::string& path);
void write_pgm(const ImageGray& img, const std::string& path);

}  // namespace ddacdn

#endif
