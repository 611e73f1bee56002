#ifndef DDACDN_BBOX_HPP
#define DDACDN_BBOX_HPP

#include <vector>

#include "ddacdn/image.hpp"

namespace ddacdn {

// Axis-aligned box in normalized image coordinates, x1 <= x2, y1 <= y2.
struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    static BBox from_cxcywh(double cx, double cy, double w, double h) {
        return BBox{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    }
};

double iou(const BBox& a, const BBox& b);

// IoU - (area(C) - area(union)) / area(C), C the minimum enclosing box.
// Degenerate case (both boxes zero-area at the same point) returns 0.
double giou(const BBox& a, const BBox& b);

struct ObjectLabel {
    int class_id = 0;
    BBox box;
};

enum class Domain { source, target, intermediate };

struct LabeledImage {
    ImageGray image;
    std::vector<ObjectLabel> labels;
};

}  // namespace ddacdn

#endif
