#include "ddacdn/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace ddacdn {

const char* const kCategoryNames[4] = {"longitudinal", "transverse", "alligator", "pothole"};

void SynthSpec::validate() const {
    if (image_size < 16) throw std::invalid_argument("synth: image size too small");
    if (num_classes < 1 || num_classes > 4)
        throw std::invalid_argument("synth: num_classes must be in [1,4]");
    if (source_train_per_category < 1 || target_train_per_category < 1 ||
        target_test_per_category < 1)
        throw std::invalid_argument("synth: per-category counts must be >= 1");
}

namespace {

uint8_t clamp_u8(double v) {
    long r = std::lround(v);
    return static_cast<uint8_t>(std::clamp(r, 0L, 255L));
}

struct Rect {
    int x0, y0, x1, y1;  // inclusive pixel bounds
};

// paints one category structure, returns its pixel bounding rect
Rect paint_structure(ImageGray& img, int category, double crack_value, Rng& rng,
                     const SynthStyle& style) {
    int n = img.width;
    auto put = [&](int x, int y) {
        if (x >= 0 && x < n && y >= 0 && y < n)
            img.at(x, y) = clamp_u8(crack_value + rng.normal(0.0, 4.0));
    };
    int margin = 4;
    switch (category) {
        case kLongitudinal: {
            int w = style.line_width_min +
                    static_cast<int>(rng.uniform_int(
                        static_cast<uint64_t>(style.line_width_max - style.line_width_min + 1)));
            int h = n / 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n / 4)));
            int x0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - w - 2 * margin)));
            int y0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - h - 2 * margin)));
            int wobble = 0;
            for (int y = y0; y < y0 + h; ++y) {
                if (rng.uniform() < 0.2) wobble += rng.uniform() < 0.5 ? -1 : 1;
                wobble = std::clamp(wobble, -1, 1);
                for (int dx = 0; dx < w; ++dx) put(x0 + wobble + dx, y);
            }
            return Rect{x0 - 1, y0, x0 + w, y0 + h - 1};
        }
        case kTransverse: {
            int h = style.line_width_min +
                    static_cast<int>(rng.uniform_int(
                        static_cast<uint64_t>(style.line_width_max - style.line_width_min + 1)));
            int w = n / 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n / 4)));
            int x0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - w - 2 * margin)));
            int y0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - h - 2 * margin)));
            int wobble = 0;
            for (int x = x0; x < x0 + w; ++x) {
                if (rng.uniform() < 0.2) wobble += rng.uniform() < 0.5 ? -1 : 1;
                wobble = std::clamp(wobble, -1, 1);
                for (int dy = 0; dy < h; ++dy) put(x, y0 + wobble + dy);
            }
            return Rect{x0, y0 - 1, x0 + w - 1, y0 + h};
        }
        case kAlligator: {
            int sz = n / 3 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n / 6)));
            int x0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - sz - 2 * margin)));
            int y0 = margin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - sz - 2 * margin)));
            int spacing = 4 + static_cast<int>(rng.uniform_int(3));
            for (int y = y0; y < y0 + sz; ++y)
                for (int x = x0; x < x0 + sz; ++x)
                    if ((x - x0) % spacing == 0 || (y - y0) % spacing == 0) put(x, y);
            return Rect{x0, y0, x0 + sz - 1, y0 + sz - 1};
        }
        case kPothole: {
            int r = n / 10 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n / 12)));
            int cx = margin + r +
                     static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 2 * (margin + r))));
            int cy = margin + r +
                     static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 2 * (margin + r))));
            double ry = r * rng.uniform(0.7, 1.0);
            for (int y = cy - r; y <= cy + r; ++y)
                for (int x = cx - r; x <= cx + r; ++x) {
                    double dx = (x - cx) / static_cast<double>(r), dy = (y - cy) / ry;
                    if (dx * dx + dy * dy <= 1.0) put(x, y);
                }
            return Rect{cx - r, cy - static_cast<int>(std::floor(ry)), cx + r,
                        cy + static_cast<int>(std::floor(ry))};
        }
        default:
            throw std::invalid_argument("synth_sample: bad category " + std::to_string(category));
    }
}

}  // namespace

LabeledImage synth_sample(const SynthSpec& spec, Domain domain, int category, Rng& rng) {
    spec.validate();
    if (category < 0 || category >= spec.num_classes)
        throw std::invalid_argument("synth_sample: category out of range");
    const SynthStyle& style = domain == Domain::source ? spec.source_style : spec.target_style;
    int n = spec.image_size;
    ImageGray img(n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double ramp =
                style.illum_gradient * (static_cast<double>(x) / (n - 1) - 0.5);
            img.at(x, y) = clamp_u8(style.background + ramp + rng.normal(0.0, style.texture_amp));
        }
    LabeledImage out;
    int objects = spec.multi_object ? 1 + static_cast<int>(rng.uniform_int(2)) : 1;
    for (int o = 0; o < objects; ++o) {
        int cat = o == 0 ? category : static_cast<int>(rng.uniform_int(
                                          static_cast<uint64_t>(spec.num_classes)));
        Rect r = paint_structure(img, cat, style.background - style.crack_contrast, rng, style);
        BBox b{static_cast<double>(r.x0) / n, static_cast<double>(r.y0) / n,
               static_cast<double>(r.x1 + 1) / n, static_cast<double>(r.y1 + 1) / n};
        b.x1 = std::clamp(b.x1, 0.0, 1.0);
        b.y1 = std::clamp(b.y1, 0.0, 1.0);
        b.x2 = std::clamp(b.x2, 0.0, 1.0);
        b.y2 = std::clamp(b.y2, 0.0, 1.0);
        out.labels.push_back(ObjectLabel{cat, b});
    }
    out.image = std::move(img);
    return out;
}

void write_label_file(const std::vector<ObjectLabel>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    char buf[128];
    for (const auto& lab : labels) {
        std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f\n", lab.class_id, lab.box.cx(),
                      lab.box.cy(), lab.box.width(), lab.box.height());
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ObjectLabel> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label file " + path);
    std::vector<ObjectLabel> labels;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        int cls;
        double cx, cy, w, h;
        if (!(ls >> cls >> cx >> cy >> w >> h))
            throw std::runtime_error("malformed label line " + std::to_string(lineno) + " in " + path);
        labels.push_back(ObjectLabel{cls, BBox::from_cxcywh(cx, cy, w, h)});
    }
    return labels;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& e : entries) out << e.stem << "\t" << e.domain << "\t" << e.split << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw std::runtime_error("malformed manifest line " + std::to_string(lineno) + " in " + path);
        entries.push_back(ManifestEntry{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                                        line.substr(t2 + 1)});
    }
    return entries;
}

LabeledImage load_sample(const std::string& dir, const ManifestEntry& entry) {
    LabeledImage s;
    s.image = read_pgm(dir + "/images/" + entry.stem + ".pgm");
    s.labels = read_label_file(dir + "/labels/" + entry.stem + ".txt");
    return s;
}

std::vector<ManifestEntry> synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir + "/images", ec);
    fs::create_directories(out_dir + "/labels", ec);
    if (!fs::exists(out_dir + "/images") || !fs::exists(out_dir + "/labels"))
        throw std::runtime_error("cannot create dataset directories under " + out_dir);

    Rng root(spec.seed);
    std::vector<ManifestEntry> entries;
    uint64_t index = 0;
    auto emit = [&](Domain dom, const char* dom_name, const char* split, int per_cat) {
        for (int c = 0; c < spec.num_classes; ++c)
            for (int i = 0; i < per_cat; ++i) {
                Rng rng = root.fork(index++);
                LabeledImage sample = synth_sample(spec, dom, c, rng);
                char stem[64];
                std::snprintf(stem, sizeof(stem), "%s_%s_c%d_%04d", dom_name, split, c, i);
                write_pgm(sample.image, out_dir + "/images/" + stem + ".pgm");
                write_label_file(sample.labels, out_dir + "/labels/" + stem + ".txt");
                entries.push_back(ManifestEntry{stem, dom_name, split});
            }
    };
    emit(Domain::source, "source", "train", spec.source_train_per_category);
    emit(Domain::target, "target", "train", spec.target_train_per_category);
    emit(Domain::target, "target", "test", spec.target_test_per_category);
    write_manifest(entries, out_dir + "/manifest.txt");
    return entries;
}

}  // namespace ddacdn
