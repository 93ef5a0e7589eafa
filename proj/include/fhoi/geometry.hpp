#pragma once

#include <algorithm>

namespace fhoi {

// Normalized box, center + extent parameterization.
struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;
};

inline double box_area(const Box& b) { return std::max(b.w, 0.0) * std::max(b.h, 0.0); }

inline double iou(const Box& a, const Box& b) {
    const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
    const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
    const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
    const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
    const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    const double inter = iw * ih;
    const double uni = box_area(a) + box_area(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// IoU minus the empty fraction of the smallest enclosing box; in (-1, 1].
inline double giou(const Box& a, const Box& b) {
    const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
    const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
    const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
    const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
    const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
    const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
    const double inter = iw * ih;
    const double uni = box_area(a) + box_area(b) - inter;
    const double ew = std::max(ax2, bx2) - std::min(ax1, bx1);
    const double eh = std::max(ay2, by2) - std::min(ay1, by1);
    const double enc = ew * eh;
    const double i = uni > 0.0 ? inter / uni : 0.0;
    return enc > 0.0 ? i - (enc - uni) / enc : i;
}

}  // namespace fhoi
