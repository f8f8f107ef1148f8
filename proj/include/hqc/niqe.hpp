// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/imaging.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace hqc {

inline constexpr int kNiqeDim = 36;
inline constexpr int kNiqeDefaultPatch = 96;
inline constexpr double kNiqeDefaultSharpness = 0.75;

using NiqePatchFeatures = std::array<double, kNiqeDim>;

/// Multivariate Gaussian fitted to pristine patch features.
struct NiqeModel {
    std::vector<double> mean;        // kNiqeDim
    std::vector<double> covariance;  // kNiqeDim x kNiqeDim, row-major
    int patch_size = kNiqeDefaultPatch;
    double sharpness_fraction = kNiqeDefaultSharpness;

    /// Throws DataError unless the covariance is symmetric within 1e-9 and
    /// has no eigenvalue below -1e-9.
    void validate() const;
};

/// Text container, see README "NIQE model file".
NiqeModel read_niqe_model(std::istream& in);
NiqeModel load_niqe_model(const std::filesystem::path& path);
void write_niqe_model(std::ostream& out, const NiqeModel& model);
void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model);

/// 18 features of one MSCN block: AGGD shape and mean scale of the
/// coefficients, then per pair orientation (alpha, mean_offset, beta_left,
/// beta_right). Products wrap within the block.
std::array<double, 18> niqe_block_features(std::span<const double> block, int width, int height);

/// Per-patch 36-vectors (full scale then half scale) for every complete
/// patch_size tile, in row-major tile order. `sharpness` receives the mean
/// local deviation of each tile at full scale when non-null. Tiles whose
/// features are undefined (flat or one-sided) are returned as NaN rows.
std::vector<NiqePatchFeatures> niqe_patch_features(const ImageBuffer& gray, int patch_size,
                                                   std::vector<double>* sharpness = nullptr);

/// Fits the pristine model. Each image contributes the sharpest
/// ceil(sharpness_fraction * tiles) tiles. Throws DataError when an image is
/// smaller than 2 * patch_size on a side or fewer than 36 patches remain.
NiqeModel niqe_fit(std::span<const ImageBuffer> pristine, int patch_size = kNiqeDefaultPatch,
                   double sharpness_fraction = kNiqeDefaultSharpness);

/// Distance between the image's patch statistics and the model,
/// sqrt(d' pinv((S1 + S2) / 2) d). Lower is better. RGB input is converted to
/// rounded BT.601 luma first.
double niqe_score(const ImageBuffer& img, const NiqeModel& model);

/// Path of the pristine model shipped in data/.
std::filesystem::path default_niqe_model_path();

}  // namespace hqc
