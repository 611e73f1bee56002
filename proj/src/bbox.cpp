#include "ddacdn/bbox.hpp"

#include <algorithm>
#include <cstdio>

namespace ddacdn {

double iou(const BBox& a, const BBox& b) {
    double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
    double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    double carea = cw * ch;
    if (carea <= 0.0) {
        std::fprintf(stderr, "warning: giou of two zero-area boxes at the same point, returning 0\n");
        return 0.0;
    }
    double i = uni > 0 ? inter / uni : 0.0;
    return i - (carea - uni) / carea;
}

}  // namespace ddacdn
