// SPDX-License-Identifier: Apache-2.0

#include "hqc/boxgeom.hpp"

#include "hqc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace hqc {

namespace {

constexpr double kSnap = 1e-9;

int place_axis(int lo, int hi, int side, int limit) {
    const int extent = hi - lo;
    const int start = extent <= side ? lo - (side - extent) / 2 : lo;
    return std::clamp(start, 0, limit - side);
}

}  // namespace

SquareCrop squarify(const BBox& box, int img_w, int img_h) {
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x + kSnap)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y + kSnap)));
    const int x1 = std::max(x0 + 1, static_cast<int>(std::ceil(box.x + box.w - kSnap)));
    const int y1 = std::max(y0 + 1, static_cast<int>(std::ceil(box.y + box.h - kSnap)));

    const int side = std::min(std::max(x1 - x0, y1 - y0), std::min(img_w, img_h));

    SquareCrop crop;
    crop.side = side;
    crop.x = place_axis(x0, x1, side, img_w);
    crop.y = place_axis(y0, y1, side, img_h);
    crop.source_box = box;
    const double cx = crop.x + side / 2.0;
    const double cy = crop.y + side / 2.0;
    crop.center_distance = std::hypot(cx - img_w / 2.0, cy - img_h / 2.0);
    return crop;
}

bool size_gate(const SquareCrop& crop, int min_side) {
    return crop.side >= min_side;
}

double iou(const BBox& a, const BBox& b) {
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    if (inter <= 0.0) {
        return 0.0;
    }
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const SquareCrop& a, const SquareCrop& b) {
    return iou(BBox{double(a.x), double(a.y), double(a.side), double(a.side)},
               BBox{double(b.x), double(b.y), double(b.side), double(b.side)});
}

bool center_priority_less(const SquareCrop& a, const SquareCrop& b) {
    return std::tie(a.center_distance, a.x, a.y, a.side, a.source_box.x, a.source_box.y, a.source_box.w,
                    a.source_box.h) < std::tie(b.center_distance, b.x, b.y, b.side, b.source_box.x, b.source_box.y,
                                               b.source_box.w, b.source_box.h);
}

std::vector<SquareCrop> center_priority_nms(std::vector<SquareCrop> crops, double iou_threshold) {
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
        throw ConfigError("iou_threshold must lie in [0, 1], got " + std::to_string(iou_threshold));
    }
    std::sort(crops.begin(), crops.end(), center_priority_less);
    std::vector<SquareCrop> kept;
    for (auto& candidate : crops) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const SquareCrop& k) {
            return iou(candidate, k) > iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(std::move(candidate));
        }
    }
    return kept;
}

}  // namespace hqc
