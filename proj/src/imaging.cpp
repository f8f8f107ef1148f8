// SPDX-License-Identifier: Apache-2.0

#include "hqc/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hqc {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
        throw std::invalid_argument("ImageBuffer: invalid dimensions " + std::to_string(width) + "x" +
                                    std::to_string(height) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
        throw std::invalid_argument("ImageBuffer: invalid dimensions");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw std::invalid_argument("ImageBuffer: data length does not match dimensions");
    }
}

ImageBuffer to_luma(const ImageBuffer& img) {
    if (img.channels() == 1) {
        return img;
    }
    ImageBuffer out(img.width(), img.height(), 1);
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    }
    return out;
}

namespace {

void require_gray(const ImageBuffer& img, int min_side, const char* what) {
    if (img.channels() != 1) {
        throw std::invalid_argument(std::string(what) + ": expected a one-channel image");
    }
    if (img.width() < min_side || img.height() < min_side) {
        throw std::invalid_argument("image too small");
    }
}

double laplacian_at(const ImageBuffer& g, int x, int y) {
    const int w = g.width();
    const int h = g.height();
    const double c = g.at(x, y);
    const double up = g.at(x, y > 0 ? y - 1 : 0);
    const double down = g.at(x, y + 1 < h ? y + 1 : h - 1);
    const double left = g.at(x > 0 ? x - 1 : 0, y);
    const double right = g.at(x + 1 < w ? x + 1 : w - 1, y);
    return up + down + left + right - 4.0 * c;
}

double variance_of_region(const ImageBuffer& g, int x0, int y0, int x1, int y1) {
    const double n = static_cast<double>(x1 - x0) * (y1 - y0);
    double sum = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            sum += laplacian_at(g, x, y);
        }
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double d = laplacian_at(g, x, y) - mean;
            ss += d * d;
        }
    }
    return ss / n;
}

}  // namespace

double laplacian_variance(const ImageBuffer& gray) {
    require_gray(gray, 3, "laplacian_variance");
    return variance_of_region(gray, 0, 0, gray.width(), gray.height());
}

double laplacian_variance(const ImageBuffer& gray, const PixelSquare& region) {
    require_gray(gray, 3, "laplacian_variance");
    if (region.side < 3 || region.x < 0 || region.y < 0 || region.x + region.side > gray.width() ||
        region.y + region.side > gray.height()) {
        throw std::out_of_range("laplacian_variance: region outside image or smaller than kernel");
    }
    return variance_of_region(gray, region.x, region.y, region.x + region.side, region.y + region.side);
}

ImageBuffer crop(const ImageBuffer& img, const PixelSquare& rect) {
    if (rect.side <= 0 || rect.x < 0 || rect.y < 0 || rect.x + rect.side > img.width() ||
        rect.y + rect.side > img.height()) {
        throw std::out_of_range("crop: rectangle (" + std::to_string(rect.x) + "," + std::to_string(rect.y) + "," +
                                std::to_string(rect.side) + ") outside " + std::to_string(img.width()) + "x" +
                                std::to_string(img.height()));
    }
    const int c = img.channels();
    ImageBuffer out(rect.side, rect.side, c);
    auto src = img.data();
    auto dst = out.data();
    const std::size_t row_len = static_cast<std::size_t>(rect.side) * c;
    for (int y = 0; y < rect.side; ++y) {
        const auto* from = src.data() + (static_cast<std::size_t>(rect.y + y) * img.width() + rect.x) * c;
        std::copy(from, from + row_len, dst.data() + y * row_len);
    }
    return out;
}

namespace {

double cubic(double x) {
    const double ax = std::abs(x);
    const double ax2 = ax * ax;
    const double ax3 = ax2 * ax;
    if (ax <= 1.0) {
        return 1.5 * ax3 - 2.5 * ax2 + 1.0;
    }
    if (ax <= 2.0) {
        return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
    }
    return 0.0;
}

double lanczos3(double x) {
    if (std::abs(x) >= 3.0) {
        return 0.0;
    }
    if (x == 0.0) {
        return 1.0;
    }
    const double px = std::numbers::pi * x;
    return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

double kernel_value(ResampleFilter f, double x) {
    switch (f) {
    case ResampleFilter::box: return (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
    case ResampleFilter::triangle: return std::max(0.0, 1.0 - std::abs(x));
    case ResampleFilter::bicubic: return cubic(x);
    case ResampleFilter::lanczos3: return lanczos3(x);
    }
    return 0.0;
}

double kernel_width(ResampleFilter f) {
    switch (f) {
    case ResampleFilter::box: return 1.0;
    case ResampleFilter::triangle: return 2.0;
    case ResampleFilter::bicubic: return 4.0;
    case ResampleFilter::lanczos3: return 6.0;
    }
    return 1.0;
}

struct Tap {
    int index;
    double weight;
};

// Per output coordinate, the input indices and normalized weights.
std::vector<std::vector<Tap>> contributions(int in_len, int out_len, double scale, ResampleFilter f,
                                            bool antialias) {
    const bool stretch = antialias && scale < 1.0;
    const double width = stretch ? kernel_width(f) / scale : kernel_width(f);
    const int taps = static_cast<int>(std::ceil(width)) + 2;
    const int period = 2 * in_len;

    std::vector<std::vector<Tap>> out(out_len);
    for (int i = 0; i < out_len; ++i) {
        // 1-based output coordinate mapped to 1-based input space.
        const double u = (i + 1) / scale + 0.5 * (1.0 - 1.0 / scale);
        const int left = static_cast<int>(std::floor(u - width / 2.0));
        std::vector<Tap> row;
        row.reserve(taps);
        double total = 0.0;
        for (int k = 0; k < taps; ++k) {
            const int idx1 = left + k;
            const double d = u - idx1;
            const double w = stretch ? scale * kernel_value(f, scale * d) : kernel_value(f, d);
            if (w == 0.0) {
                continue;
            }
            int m = ((idx1 - 1) % period + period) % period;
            const int idx0 = m < in_len ? m : period - 1 - m;
            row.push_back({idx0, w});
            total += w;
        }
        for (auto& t : row) {
            t.weight /= total;
        }
        out[i] = std::move(row);
    }
    return out;
}

ImageBuffer resample_rows(const ImageBuffer& img, int out_height, double scale, ResampleFilter f, bool aa) {
    const auto contrib = contributions(img.height(), out_height, scale, f, aa);
    const int c = img.channels();
    const std::size_t row_len = static_cast<std::size_t>(img.width()) * c;
    ImageBuffer out(img.width(), out_height, c);
    auto src = img.data();
    auto dst = out.data();
    for (int y = 0; y < out_height; ++y) {
        double* o = dst.data() + y * row_len;
        for (const auto& t : contrib[y]) {
            const double* r = src.data() + t.index * row_len;
            for (std::size_t i = 0; i < row_len; ++i) {
                o[i] += t.weight * r[i];
            }
        }
    }
    return out;
}

ImageBuffer resample_cols(const ImageBuffer& img, int out_width, double scale, ResampleFilter f, bool aa) {
    const auto contrib = contributions(img.width(), out_width, scale, f, aa);
    const int c = img.channels();
    ImageBuffer out(out_width, img.height(), c);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < out_width; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (const auto& t : contrib[x]) {
                    acc += t.weight * img.at(t.index, y, ch);
                }
                out.at(x, y, ch) = acc;
            }
        }
    }
    return out;
}

}  // namespace

ImageBuffer resample(const ImageBuffer& img, int out_width, int out_height, ResampleFilter filter, bool antialias) {
    if (out_width <= 0 || out_height <= 0) {
        throw std::invalid_argument("resample: target size must be positive");
    }
    const double sx = static_cast<double>(out_width) / img.width();
    const double sy = static_cast<double>(out_height) / img.height();
    if (sy <= sx) {
        return resample_cols(resample_rows(img, out_height, sy, filter, antialias), out_width, sx, filter, antialias);
    }
    return resample_rows(resample_cols(img, out_width, sx, filter, antialias), out_height, sy, filter, antialias);
}

ImageBuffer rescale(const ImageBuffer& img, double scale, ResampleFilter filter, bool antialias) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("rescale: scale must be positive");
    }
    const int w = static_cast<int>(std::ceil(img.width() * scale - 1e-9));
    const int h = static_cast<int>(std::ceil(img.height() * scale - 1e-9));
    const auto rows = resample_rows(img, std::max(h, 1), scale, filter, antialias);
    return resample_cols(rows, std::max(w, 1), scale, filter, antialias);
}

ResampleFilter default_resize_filter(int input_side, int target_side) {
    return input_side > target_side ? ResampleFilter::lanczos3 : ResampleFilter::bicubic;
}

ImageBuffer resize_square(const ImageBuffer& img, int target_side, ResampleFilter filter) {
    if (img.width() != img.height()) {
        throw std::invalid_argument("resize_square: input is not square");
    }
    if (img.width() == target_side) {
        return img;
    }
    return resample(img, target_side, target_side, filter, true);
}

ImageBuffer resize_square(const ImageBuffer& img, int target_side) {
    return resize_square(img, target_side, default_resize_filter(img.width(), target_side));
}

ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    if (!(sigma > 0.0)) {
        return img;
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        total += k[i + radius];
    }
    for (auto& v : k) {
        v /= total;
    }
    const int w = img.width();
    const int h = img.height();
    const int c = img.channels();
    ImageBuffer tmp(w, h, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += k[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, ch);
                }
                tmp.at(x, y, ch) = acc;
            }
        }
    }
    ImageBuffer out(w, h, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1), ch);
                }
                out.at(x, y, ch) = acc;
            }
        }
    }
    return out;
}

namespace {

int border_index(int i, int n, BorderMode mode) {
    if (i >= 0 && i < n) {
        return i;
    }
    if (mode == BorderMode::replicate || n == 1) {
        return std::clamp(i, 0, n - 1);
    }
    const int period = 2 * (n - 1);
    int m = ((i % period) + period) % period;
    return m < n ? m : period - m;
}

}  // namespace

ImageBuffer filter2d(const ImageBuffer& img, std::span<const double> kernel, int ksize, BorderMode border) {
    if (ksize <= 0 || ksize % 2 == 0 || kernel.size() != static_cast<std::size_t>(ksize) * ksize) {
        throw std::invalid_argument("filter2d: kernel must be odd-sized and square");
    }
    const int r = ksize / 2;
    const int w = img.width();
    const int h = img.height();
    const int c = img.channels();
    std::vector<int> xi(w + 2 * r);
    std::vector<int> yi(h + 2 * r);
    for (int i = 0; i < w + 2 * r; ++i) xi[i] = border_index(i - r, w, border);
    for (int i = 0; i < h + 2 * r; ++i) yi[i] = border_index(i - r, h, border);

    ImageBuffer out(w, h, c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int ky = 0; ky < ksize; ++ky) {
                    const int sy = yi[y + ky];
                    const double* krow = kernel.data() + ky * ksize;
                    for (int kx = 0; kx < ksize; ++kx) {
                        acc += krow[kx] * img.at(xi[x + kx], sy, ch);
                    }
                }
                out.at(x, y, ch) = acc;
            }
        }
    }
    return out;
}

ImageBuffer quantize_8bit(const ImageBuffer& img) {
    ImageBuffer out = img;
    for (auto& v : out.data()) {
        v = std::clamp(std::round(v), 0.0, 255.0);
    }
    return out;
}

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
        throw std::invalid_argument("max_abs_diff: dimension mismatch");
    }
    double m = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        m = std::max(m, std::abs(da[i] - db[i]));
    }
    return m;
}

double mean_value(const ImageBuffer& img) {
    double s = 0.0;
    for (double v : img.data()) {
        s += v;
    }
    return img.empty() ? 0.0 : s / static_cast<double>(img.size());
}

}  // namespace hqc
