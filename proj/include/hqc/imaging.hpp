// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hqc {

/// Row-major, channel-interleaved image with real-valued samples on the
/// 8-bit scale [0, 255]. Quantization happens only at file I/O.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);
    ImageBuffer(int width, int height, int channels, std::vector<double> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    double& at(int x, int y, int c = 0) noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const noexcept {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Integer square region inside an image.
struct PixelSquare {
    int x = 0;
    int y = 0;
    int side = 0;
};

enum class ResampleFilter { box, triangle, bicubic, lanczos3 };

/// BT.601 luma (0.299, 0.587, 0.114). One-channel input is returned as is.
ImageBuffer to_luma(const ImageBuffer& img);

/// Population variance of the 4-neighbour Laplacian response with edge
/// replication. Requires a one-channel image of at least 3x3.
double laplacian_variance(const ImageBuffer& gray);

/// Variance of the Laplacian over a sub-rectangle, evaluated on the full
/// image so border replication only applies at true image edges.
double laplacian_variance(const ImageBuffer& gray, const PixelSquare& region);

/// Copies a square sub-image. Throws std::out_of_range when `rect` leaves the image.
ImageBuffer crop(const ImageBuffer& img, const PixelSquare& rect);

/// Separable resampling to an arbitrary size. When downscaling with
/// `antialias`, the kernel is stretched by the inverse scale. Sample
/// positions and symmetric edge handling follow MATLAB's imresize.
ImageBuffer resample(const ImageBuffer& img, int out_width, int out_height, ResampleFilter filter,
                     bool antialias = true);

/// Resample by a uniform scale factor; output dims are ceil(scale * input).
ImageBuffer rescale(const ImageBuffer& img, double scale, ResampleFilter filter, bool antialias = true);

/// Lanczos3 when shrinking, bicubic when enlarging or keeping size.
ResampleFilter default_resize_filter(int input_side, int target_side);

/// Square-to-square resize used for curated crops. Throws std::invalid_argument
/// on a non-square input.
ImageBuffer resize_square(const ImageBuffer& img, int target_side, ResampleFilter filter);
ImageBuffer resize_square(const ImageBuffer& img, int target_side);

/// Isotropic Gaussian blur with a kernel radius of ceil(3 sigma) and
/// replicated borders. sigma <= 0 returns the input.
ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma);

enum class BorderMode { replicate, reflect101 };

/// Dense 2-D correlation with an odd-sized kernel, applied per channel.
ImageBuffer filter2d(const ImageBuffer& img, std::span<const double> kernel, int ksize, BorderMode border);

/// Rounds and clamps every sample to an integer in [0, 255].
ImageBuffer quantize_8bit(const ImageBuffer& img);

/// Maximum absolute per-sample difference. Dimensions must agree.
double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b);

double mean_value(const ImageBuffer& img);

}  // namespace hqc
