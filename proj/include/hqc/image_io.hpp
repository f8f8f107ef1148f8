// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/geometry.hpp"
#include "hqc/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hqc {

/// Decodes a JPEG or PNG file into RGB (3 channels) or grayscale (1 channel).
/// Throws DataError when the file cannot be read or decoded.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit image; format follows the extension (.png or .jpg).
void write_image(const std::filesystem::path& path, const ImageBuffer& img, int jpeg_quality = 95);

/// Reads width and height from a PNG or JPEG header without decoding pixels.
std::optional<ImageSize> probe_dimensions(const std::filesystem::path& path);

/// Header probe over an in-memory prefix of a file.
std::optional<ImageSize> probe_dimensions(std::span<const std::uint8_t> bytes);

/// Encodes to JPEG at `quality` and decodes again.
ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality);

/// Codec identity recorded next to synthesized data, e.g. "OpenCV 4.5.4 imgcodecs".
std::string codec_identity();

}  // namespace hqc
