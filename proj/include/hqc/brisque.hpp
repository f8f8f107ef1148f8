// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/diagnostics.hpp"
#include "hqc/nss.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hqc {

/// RBF-kernel epsilon-SVR with per-feature min/max scaling to [lower, upper].
struct SvrModel {
    double gamma = 0.0;
    double rho = 0.0;  // prediction = sum(coef_i * K(sv_i, x)) - rho
    std::vector<double> dual_coefs;
    std::vector<std::vector<double>> support_vectors;  // dense, 1-based libsvm indices mapped to 0..dim-1
    double scale_lower = -1.0;
    double scale_upper = 1.0;
    std::vector<double> feature_min;
    std::vector<double> feature_max;
};

/// Reads a libsvm text model (epsilon_svr / rbf only).
SvrModel read_libsvm_model(std::istream& in, int dim = 36);

/// Reads an svm-scale range file ("x", "lower upper", then "index min max").
void read_scale_ranges(std::istream& in, SvrModel& model, int dim = 36);

/// Loads `<stem>.svm` and its `<stem>.range` sidecar.
SvrModel load_brisque_model(const std::filesystem::path& svm_path, const std::filesystem::path& range_path);

/// Model shipped in data/, or nullopt when absent (feature-only mode).
std::optional<SvrModel> load_default_brisque_model();

/// Scales the features, clamping values that fall outside the model's
/// training range (one warning per clamped feature), and evaluates the SVR.
/// Throws std::invalid_argument on non-finite features.
double brisque_score(const BrisqueFeatures& features, const SvrModel& model, Diagnostics* diag = nullptr);

}  // namespace hqc
