// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

namespace hqc {

/// Axis-aligned box in source-image pixel coordinates (left, top, width, height).
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct ImageSize {
    int width = 0;
    int height = 0;

    friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Clamps `box` to [0, width] x [0, height]. Returns nullopt when nothing of
/// positive area remains.
std::optional<BBox> clamp_to_image(const BBox& box, ImageSize size);

/// True when the box has positive area and lies fully inside the image.
bool inside_image(const BBox& box, ImageSize size);

}  // namespace hqc
