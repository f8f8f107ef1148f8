// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/imaging.hpp"

#include <array>
#include <span>
#include <vector>

namespace hqc {

/// Mean-subtracted contrast-normalized coefficients, (I - mu) / (sigma + 1),
/// with mu and sigma from a 7x7 Gaussian window (sigma_w = 7/6, replicated
/// borders). `local_deviation` holds sigma per pixel.
struct MscnField {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<double> local_deviation;

    double at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Generalized Gaussian fit. `sigma_sq` is the sample second moment.
struct GgdParams {
    double alpha = 0.0;
    double sigma_sq = 0.0;
};

/// Asymmetric generalized Gaussian fit.
///
/// `sigma_left`/`sigma_right` are the one-sided RMS values of the negative and
/// positive samples; `beta_*` are the corresponding AGGD scale parameters,
/// beta = sigma * sqrt(Gamma(1/alpha) / Gamma(3/alpha)). `mean_offset` is the
/// distribution mean (beta_r - beta_l) * Gamma(2/alpha) / Gamma(1/alpha).
struct AggdParams {
    double alpha = 0.0;
    double beta_left = 0.0;
    double beta_right = 0.0;
    double mean_offset = 0.0;
    double sigma_left = 0.0;
    double sigma_right = 0.0;
};

inline constexpr double kShapeGridMin = 0.05;
inline constexpr double kShapeGridMax = 10.0;
inline constexpr double kShapeGridStep = 0.001;

MscnField mscn(const ImageBuffer& gray);

/// Moment matching of rho = E[x^2] / E[|x|]^2 against
/// r(alpha) = Gamma(1/alpha) Gamma(3/alpha) / Gamma(2/alpha)^2 over the shape grid.
GgdParams estimate_ggd(std::span<const double> samples);

/// Where exact zeros go in the one-sided second moments.
enum class ZeroSamples { excluded, right };

AggdParams estimate_aggd(std::span<const double> samples, ZeroSamples zeros = ZeroSamples::excluded);

/// Neighbour shifts for the pairwise products, in feature order:
/// horizontal, vertical, main diagonal, anti-diagonal. A shift (dy, dx)
/// pairs A(y, x) with A(y - dy, x - dx), wrapping around the field.
inline constexpr std::array<std::array<int, 2>, 4> kPairShifts{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

/// Circular pairwise products of a `width` x `height` row-major field.
std::vector<double> pairwise_products(std::span<const double> field, int width, int height, int dy, int dx);

using NssFeatures18 = std::array<double, 18>;

/// [ggd.alpha, ggd.sigma_sq, then per orientation (alpha, mean_offset,
/// sigma_left^2, sigma_right^2)]. The orientation tail uses squared one-sided
/// deviations, the layout of the LIVE BRISQUE feature vector.
NssFeatures18 nss_features_18(const MscnField& field, ZeroSamples zeros = ZeroSamples::excluded);

/// Half-resolution image used for the second feature scale (bicubic,
/// antialiased, output ceil(n / 2)).
ImageBuffer half_scale(const ImageBuffer& gray);

using BrisqueFeatures = std::array<double, 36>;

/// Luma with weights 0.2125, 0.7154, 0.0721; one-channel input passes through.
ImageBuffer brisque_luma(const ImageBuffer& img);

/// Non-antialiased bicubic (a = -0.75) 2x decimation sampling at 2x + 0.5 with
/// clamped borders; output round-half-even(n / 2). The shipped BRISQUE model
/// was trained on this second scale.
ImageBuffer brisque_half_scale(const ImageBuffer& gray);

/// nss_features_18 (zeros counted on the right side) at full scale followed
/// by the same on brisque_half_scale, both on brisque_luma of the input.
BrisqueFeatures brisque_features(const ImageBuffer& img);

}  // namespace hqc
