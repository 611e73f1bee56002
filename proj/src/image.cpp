#include "ddacdn/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ddacdn {

double pixel_mean(const ImageGray& img) {
    if (img.empty()) return 0.0;
    double s = 0;
    for (uint8_t p : img.pixels) s += p;
    return s / static_cast<double>(img.size());
}

double pixel_variance(const ImageGray& img) {
    if (img.empty()) return 0.0;
    double m = pixel_mean(img);
    double s = 0;
    for (uint8_t p : img.pixels) {
        double d = p - m;
        s += d * d;
    }
    return s / static_cast<double>(img.size());
}

double pixel_std(const ImageGray& img) { return std::sqrt(pixel_variance(img)); }

namespace {

[[noreturn]] void parse_fail(const std::string& path, long offset, const std::string& what) {
    throw std::runtime_error("PGM parse error in " + path + " at byte " + std::to_string(offset) +
                             ": " + what);
}

// next whitespace-delimited token, skipping '#' comment lines
std::string next_token(std::istream& in, const std::string& path) {
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF) parse_fail(path, static_cast<long>(in.tellg()), "unexpected end of file");
    std::string tok;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    return tok;
}

}  // namespace

ImageGray read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic = next_token(in, path);
    if (magic != "P5")
        throw std::runtime_error("unsupported PGM format \"" + magic + "\" in " + path +
                                 " (only binary P5 supported)");
    int w, h, maxval;
    try {
        w = std::stoi(next_token(in, path));
        h = std::stoi(next_token(in, path));
        maxval = std::stoi(next_token(in, path));
    } catch (const std::logic_error&) {
        parse_fail(path, static_cast<long>(in.tellg()), "malformed header field");
    }
    if (w <= 0 || h <= 0) parse_fail(path, static_cast<long>(in.tellg()), "non-positive dimensions");
    if (maxval != 255)
        throw std::runtime_error("unsupported PGM maxval " + std::to_string(maxval) + " in " +
                                 path + " (only 255 supported)");
    ImageGray img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.size()));
    if (static_cast<size_t>(in.gcount()) != img.size())
        parse_fail(path, static_cast<long>(in.tellg()), "truncated pixel data");
    return img;
}

void write_pgm(const ImageGray& img, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out << "P5\n" << img.width << " " << img.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(img.pixels.data()),
                  static_cast<std::streamsize>(img.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace ddacdn
