// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/geometry.hpp"
#include "hqc/imaging.hpp"

#include <vector>

namespace hqc {

/// Square, in-bounds crop derived from one person box.
///
/// Invariants: 0 <= x, 0 <= y, x + side <= image width, y + side <= image
/// height; side covers the pixel-aligned box extent unless it was clamped to
/// the shorter image dimension.
struct SquareCrop {
    int x = 0;
    int y = 0;
    int side = 0;
    BBox source_box;
    double center_distance = 0.0;

    PixelSquare region() const noexcept { return {x, y, side}; }
    friend bool operator==(const SquareCrop&, const SquareCrop&) = default;
};

inline constexpr double kDefaultIouThreshold = 0.45;
inline constexpr int kDefaultMinSide = 384;

/// Expands `box` to a square whose side is the longer pixel-aligned edge,
/// clamped to min(img_w, img_h). Along an axis where the box fits, the square
/// is centered on the box; along an axis where the box is longer than the
/// square, it is aligned to the box's leading (left/top) edge. The square is
/// then translated, never resized, the minimal distance into the image.
SquareCrop squarify(const BBox& box, int img_w, int img_h);

/// True iff crop.side >= min_side.
bool size_gate(const SquareCrop& crop, int min_side);

double iou(const BBox& a, const BBox& b);
double iou(const SquareCrop& a, const SquareCrop& b);

/// Strict priority order used by NMS: center distance, then x, y, side and
/// the source box coordinates.
bool center_priority_less(const SquareCrop& a, const SquareCrop& b);

/// Greedy NMS visiting crops in center_priority_less order. A candidate is
/// suppressed iff its IoU with any kept crop exceeds `iou_threshold`.
/// Throws ConfigError when the threshold is outside [0, 1].
std::vector<SquareCrop> center_priority_nms(std::vector<SquareCrop> crops, double iou_threshold);

}  // namespace hqc
