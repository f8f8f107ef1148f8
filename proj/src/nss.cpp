// SPDX-License-Identifier: Apache-2.0

#include "hqc/nss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hqc {

namespace {

constexpr int kWindow = 7;
constexpr double kWindowSigma = 7.0 / 6.0;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> k{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        k[i] = std::exp(-(d * d) / (2.0 * kWindowSigma * kWindowSigma));
        total += k[i];
    }
    for (auto& v : k) {
        v /= total;
    }
    return k;
}

// Separable correlation with replicated borders.
std::vector<double> smooth(std::span<const double> src, int w, int h) {
    static const auto taps = gaussian_taps();
    constexpr int r = kWindow / 2;
    std::vector<double> tmp(src.size());
    for (int y = 0; y < h; ++y) {
        const double* row = src.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += taps[k + r] * row[std::clamp(x + k, 0, w - 1)];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    std::vector<double> out(src.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += taps[k + r] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

struct ShapeTables {
    std::vector<double> alpha;
    std::vector<double> ggd_ratio;   // Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2
    std::vector<double> aggd_ratio;  // Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a))
};

const ShapeTables& shape_tables() {
    static const ShapeTables tables = [] {
        ShapeTables t;
        const int lo = static_cast<int>(std::lround(kShapeGridMin / kShapeGridStep));
        const int hi = static_cast<int>(std::lround(kShapeGridMax / kShapeGridStep));
        for (int i = lo; i <= hi; ++i) {
            const double a = i * kShapeGridStep;
            const double log_r = std::lgamma(1.0 / a) + std::lgamma(3.0 / a) - 2.0 * std::lgamma(2.0 / a);
            t.alpha.push_back(a);
            t.ggd_ratio.push_back(std::exp(log_r));
            t.aggd_ratio.push_back(std::exp(-log_r));
        }
        return t;
    }();
    return tables;
}

double nearest_shape(const std::vector<double>& ratio, double target) {
    const auto& t = shape_tables();
    std::size_t best = 0;
    double best_diff = std::abs(target - ratio[0]);
    for (std::size_t i = 1; i < ratio.size(); ++i) {
        const double d = std::abs(target - ratio[i]);
        if (d < best_diff) {
            best_diff = d;
            best = i;
        }
    }
    return t.alpha[best];
}

}  // namespace

MscnField mscn(const ImageBuffer& gray) {
    if (gray.channels() != 1) {
        throw std::invalid_argument("mscn: expected a one-channel image");
    }
    if (gray.width() < kWindow || gray.height() < kWindow) {
        throw std::invalid_argument("mscn: image too small");
    }
    const int w = gray.width();
    const int h = gray.height();
    auto src = gray.data();
    std::vector<double> sq(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        sq[i] = src[i] * src[i];
    }
    const auto mu = smooth(src, w, h);
    const auto mu_sq = smooth(sq, w, h);

    MscnField f;
    f.width = w;
    f.height = h;
    f.values.resize(src.size());
    f.local_deviation.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double sigma = std::sqrt(std::abs(mu_sq[i] - mu[i] * mu[i]));
        f.local_deviation[i] = sigma;
        f.values[i] = (src[i] - mu[i]) / (sigma + 1.0);
    }
    return f;
}

GgdParams estimate_ggd(std::span<const double> samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("estimate_ggd: need at least 2 samples");
    }
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    bool all_same = true;
    for (double v : samples) {
        sum_sq += v * v;
        sum_abs += std::abs(v);
        all_same = all_same && v == samples[0];
    }
    if (all_same || sum_sq == 0.0) {
        throw std::invalid_argument("estimate_ggd: zero variance");
    }
    const double n = static_cast<double>(samples.size());
    const double sigma_sq = sum_sq / n;
    const double e_abs = sum_abs / n;
    const double rho = sigma_sq / (e_abs * e_abs);
    return {nearest_shape(shape_tables().ggd_ratio, rho), sigma_sq};
}

AggdParams estimate_aggd(std::span<const double> samples, ZeroSamples zeros) {
    if (samples.size() < 2) {
        throw std::invalid_argument("estimate_aggd: need at least 2 samples");
    }
    double left_sq = 0.0, right_sq = 0.0, sum_abs = 0.0, sum_sq = 0.0;
    std::size_t n_left = 0, n_right = 0;
    for (double v : samples) {
        if (v < 0.0) {
            left_sq += v * v;
            ++n_left;
        } else if (v > 0.0 || zeros == ZeroSamples::right) {
            right_sq += v * v;
            ++n_right;
        }
        sum_abs += std::abs(v);
        sum_sq += v * v;
    }
    if (n_left == 0 || n_right == 0) {
        throw std::invalid_argument("estimate_aggd: one-sided support");
    }
    const double n = static_cast<double>(samples.size());
    const double sl = std::sqrt(left_sq / static_cast<double>(n_left));
    const double sr = std::sqrt(right_sq / static_cast<double>(n_right));
    const double mean_abs = sum_abs / n;
    const double r_hat = mean_abs * mean_abs / (sum_sq / n);
    // Symmetric in (sl, sr) so that negating the samples yields the same shape.
    const double sl2 = sl * sl, sr2 = sr * sr;
    const double r_norm = r_hat * (sl2 * sl + sr2 * sr) * (sl + sr) / ((sl2 + sr2) * (sl2 + sr2));

    AggdParams p;
    p.alpha = nearest_shape(shape_tables().aggd_ratio, r_norm);
    const double scale = std::sqrt(std::exp(std::lgamma(1.0 / p.alpha) - std::lgamma(3.0 / p.alpha)));
    p.sigma_left = sl;
    p.sigma_right = sr;
    p.beta_left = sl * scale;
    p.beta_right = sr * scale;
    p.mean_offset = (p.beta_right - p.beta_left) * std::exp(std::lgamma(2.0 / p.alpha) - std::lgamma(1.0 / p.alpha));
    return p;
}

std::vector<double> pairwise_products(std::span<const double> field, int width, int height, int dy, int dx) {
    std::vector<double> out(field.size());
    for (int y = 0; y < height; ++y) {
        const int sy = ((y - dy) % height + height) % height;
        for (int x = 0; x < width; ++x) {
            const int sx = ((x - dx) % width + width) % width;
            out[static_cast<std::size_t>(y) * width + x] =
                field[static_cast<std::size_t>(y) * width + x] * field[static_cast<std::size_t>(sy) * width + sx];
        }
    }
    return out;
}

NssFeatures18 nss_features_18(const MscnField& field, ZeroSamples zeros) {
    NssFeatures18 f{};
    const auto ggd = estimate_ggd(field.values);
    f[0] = ggd.alpha;
    f[1] = ggd.sigma_sq;
    std::size_t k = 2;
    for (const auto& s : kPairShifts) {
        const auto pairs = pairwise_products(field.values, field.width, field.height, s[0], s[1]);
        const auto a = estimate_aggd(pairs, zeros);
        f[k++] = a.alpha;
        f[k++] = a.mean_offset;
        f[k++] = a.sigma_left * a.sigma_left;
        f[k++] = a.sigma_right * a.sigma_right;
    }
    return f;
}

ImageBuffer half_scale(const ImageBuffer& gray) {
    return rescale(gray, 0.5, ResampleFilter::bicubic, true);
}

ImageBuffer brisque_luma(const ImageBuffer& img) {
    if (img.channels() == 1) {
        return img;
    }
    ImageBuffer out(img.width(), img.height(), 1);
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = 0.2125 * src[3 * i] + 0.7154 * src[3 * i + 1] + 0.0721 * src[3 * i + 2];
    }
    return out;
}

ImageBuffer brisque_half_scale(const ImageBuffer& gray) {
    if (gray.channels() != 1) {
        throw std::invalid_argument("brisque_half_scale: expected a one-channel image");
    }
    // Cubic convolution weights at offsets 1.5, 0.5, 0.5, 1.5 for a = -0.75.
    constexpr std::array<double, 4> taps{-0.09375, 0.59375, 0.59375, -0.09375};
    const int w = gray.width();
    const int h = gray.height();
    const int ow = std::max(1, static_cast<int>(std::lrint(w * 0.5)));
    const int oh = std::max(1, static_cast<int>(std::lrint(h * 0.5)));
    ImageBuffer rows(w, oh, 1);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                acc += taps[k] * gray.at(x, std::clamp(2 * y - 1 + k, 0, h - 1));
            }
            rows.at(x, y) = acc;
        }
    }
    ImageBuffer out(ow, oh, 1);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                acc += taps[k] * rows.at(std::clamp(2 * x - 1 + k, 0, w - 1), y);
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

BrisqueFeatures brisque_features(const ImageBuffer& img) {
    const ImageBuffer g = brisque_luma(img);
    const auto full = nss_features_18(mscn(g), ZeroSamples::right);
    const auto half = nss_features_18(mscn(brisque_half_scale(g)), ZeroSamples::right);
    BrisqueFeatures out{};
    std::copy(full.begin(), full.end(), out.begin());
    std::copy(half.begin(), half.end(), out.begin() + 18);
    return out;
}

}  // namespace hqc
