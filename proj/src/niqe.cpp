// SPDX-License-Identifier: Apache-2.0

#include "hqc/niqe.hpp"

#include "hqc/error.hpp"
#include "hqc/nss.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace hqc {

namespace {

constexpr const char* kModelFormat = "hqc-niqe-model";
constexpr int kModelVersion = 1;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix as_matrix(const std::vector<double>& cov) {
    return Eigen::Map<const Matrix>(cov.data(), kNiqeDim, kNiqeDim);
}

Matrix pseudo_inverse(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const auto& vals = eig.eigenvalues();
    const double cutoff = 1e-10 * vals.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        inv[i] = std::abs(vals[i]) > cutoff ? 1.0 / vals[i] : 0.0;
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

bool finite_row(const NiqePatchFeatures& f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
}

void mean_and_covariance(const std::vector<NiqePatchFeatures>& rows, std::vector<double>& mean,
                         std::vector<double>& cov) {
    const std::size_t n = rows.size();
    mean.assign(kNiqeDim, 0.0);
    for (const auto& r : rows) {
        for (int i = 0; i < kNiqeDim; ++i) mean[i] += r[i];
    }
    for (auto& m : mean) m /= static_cast<double>(n);

    cov.assign(kNiqeDim * kNiqeDim, 0.0);
    if (n < 2) {
        return;
    }
    for (const auto& r : rows) {
        for (int i = 0; i < kNiqeDim; ++i) {
            const double di = r[i] - mean[i];
            for (int j = i; j < kNiqeDim; ++j) {
                cov[i * kNiqeDim + j] += di * (r[j] - mean[j]);
            }
        }
    }
    for (int i = 0; i < kNiqeDim; ++i) {
        for (int j = i; j < kNiqeDim; ++j) {
            const double v = cov[i * kNiqeDim + j] / static_cast<double>(n - 1);
            cov[i * kNiqeDim + j] = v;
            cov[j * kNiqeDim + i] = v;
        }
    }
}

std::vector<double> extract_block(std::span<const double> field, int field_w, int x0, int y0, int side) {
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y) {
        const double* row = field.data() + static_cast<std::size_t>(y0 + y) * field_w + x0;
        std::copy(row, row + side, out.begin() + static_cast<std::ptrdiff_t>(y) * side);
    }
    return out;
}

ImageBuffer top_left(const ImageBuffer& gray, int w, int h) {
    ImageBuffer out(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) out.at(x, y) = gray.at(x, y);
    }
    return out;
}

ImageBuffer scoring_luma(const ImageBuffer& img) {
    if (img.channels() == 1) {
        return img;
    }
    ImageBuffer y = to_luma(img);
    for (auto& v : y.data()) v = std::round(v);
    return y;
}

}  // namespace

void NiqeModel::validate() const {
    if (mean.size() != kNiqeDim || covariance.size() != kNiqeDim * kNiqeDim) {
        throw DataError("NIQE model must hold a 36-vector mean and a 36x36 covariance");
    }
    for (int i = 0; i < kNiqeDim; ++i) {
        if (!std::isfinite(mean[i])) {
            throw DataError("NIQE model mean is not finite");
        }
        for (int j = 0; j < kNiqeDim; ++j) {
            if (std::abs(covariance[i * kNiqeDim + j] - covariance[j * kNiqeDim + i]) > 1e-9) {
                throw DataError("NIQE model covariance is not symmetric");
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(as_matrix(covariance), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-9) {
        throw DataError("NIQE model covariance is not positive semi-definite");
    }
    if (patch_size < 14 || patch_size % 2 != 0) {
        throw DataError("NIQE model patch_size must be even and at least 14");
    }
    if (!(sharpness_fraction > 0.0 && sharpness_fraction <= 1.0)) {
        throw DataError("NIQE model sharpness_fraction must lie in (0, 1]");
    }
}

NiqeModel read_niqe_model(std::istream& in) {
    NiqeModel m;
    std::string line;
    std::string section;
    int dim = 0;
    bool saw_format = false;
    auto read_values = [&](std::size_t count) {
        std::vector<double> v;
        v.reserve(count);
        double x;
        while (v.size() < count && in >> x) v.push_back(x);
        if (v.size() != count) throw DataError("NIQE model file is truncated");
        return v;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "format") {
            std::string name;
            int version = 0;
            ls >> name >> version;
            if (name != kModelFormat || version != kModelVersion) {
                throw DataError("unsupported NIQE model format '" + name + " " + std::to_string(version) + "'");
            }
            saw_format = true;
        } else if (key == "dim") {
            ls >> dim;
            if (dim != kNiqeDim) throw DataError("NIQE model dim must be 36");
        } else if (key == "patch_size") {
            ls >> m.patch_size;
        } else if (key == "sharpness_fraction") {
            ls >> m.sharpness_fraction;
        } else if (key == "mean") {
            m.mean = read_values(kNiqeDim);
        } else if (key == "covariance") {
            m.covariance = read_values(kNiqeDim * kNiqeDim);
        } else {
            throw DataError("unknown key '" + key + "' in NIQE model file");
        }
    }
    if (!saw_format) {
        throw DataError("NIQE model file lacks a format line");
    }
    m.validate();
    return m;
}

NiqeModel load_niqe_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open NIQE model " + path.string());
    }
    return read_niqe_model(in);
}

void write_niqe_model(std::ostream& out, const NiqeModel& model) {
    out << "# NIQE pristine multivariate Gaussian\n";
    out << "format " << kModelFormat << ' ' << kModelVersion << '\n';
    out << "dim " << kNiqeDim << '\n';
    out << "patch_size " << model.patch_size << '\n';
    out << std::setprecision(17) << "sharpness_fraction " << model.sharpness_fraction << '\n';
    out << "mean\n";
    for (int i = 0; i < kNiqeDim; ++i) out << model.mean[i] << (i + 1 == kNiqeDim ? '\n' : ' ');
    out << "covariance\n";
    for (int i = 0; i < kNiqeDim; ++i) {
        for (int j = 0; j < kNiqeDim; ++j) {
            out << model.covariance[i * kNiqeDim + j] << (j + 1 == kNiqeDim ? '\n' : ' ');
        }
    }
}

void save_niqe_model(const std::filesystem::path& path, const NiqeModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write NIQE model " + path.string());
    }
    write_niqe_model(out, model);
}

std::array<double, 18> niqe_block_features(std::span<const double> block, int width, int height) {
    std::array<double, 18> f{};
    const auto base = estimate_aggd(block);
    f[0] = base.alpha;
    f[1] = (base.beta_left + base.beta_right) / 2.0;
    std::size_t k = 2;
    for (const auto& s : kPairShifts) {
        const auto a = estimate_aggd(pairwise_products(block, width, height, s[0], s[1]));
        f[k++] = a.alpha;
        f[k++] = a.mean_offset;
        f[k++] = a.beta_left;
        f[k++] = a.beta_right;
    }
    return f;
}

std::vector<NiqePatchFeatures> niqe_patch_features(const ImageBuffer& gray, int patch_size,
                                                   std::vector<double>* sharpness) {
    if (gray.channels() != 1) {
        throw std::invalid_argument("niqe_patch_features: expected a one-channel image");
    }
    if (patch_size < 14 || patch_size % 2 != 0) {
        throw std::invalid_argument("niqe_patch_features: patch size must be even and at least 14");
    }
    const int nx = gray.width() / patch_size;
    const int ny = gray.height() / patch_size;
    if (nx == 0 || ny == 0) {
        throw DataError("image too small for one " + std::to_string(patch_size) + "px patch");
    }
    const ImageBuffer cropped =
        (nx * patch_size == gray.width() && ny * patch_size == gray.height())
            ? gray
            : top_left(gray, nx * patch_size, ny * patch_size);

    const MscnField full = mscn(cropped);
    const MscnField half = mscn(half_scale(cropped));
    const int hp = patch_size / 2;

    std::vector<NiqePatchFeatures> rows;
    rows.reserve(static_cast<std::size_t>(nx) * ny);
    if (sharpness) {
        sharpness->clear();
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (int by = 0; by < ny; ++by) {
        for (int bx = 0; bx < nx; ++bx) {
            NiqePatchFeatures row;
            try {
                const auto b1 = extract_block(full.values, full.width, bx * patch_size, by * patch_size, patch_size);
                const auto b2 = extract_block(half.values, half.width, bx * hp, by * hp, hp);
                const auto f1 = niqe_block_features(b1, patch_size, patch_size);
                const auto f2 = niqe_block_features(b2, hp, hp);
                std::copy(f1.begin(), f1.end(), row.begin());
                std::copy(f2.begin(), f2.end(), row.begin() + 18);
            } catch (const std::invalid_argument&) {
                row.fill(nan);
            }
            rows.push_back(row);
            if (sharpness) {
                const auto dev =
                    extract_block(full.local_deviation, full.width, bx * patch_size, by * patch_size, patch_size);
                sharpness->push_back(std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(dev.size()));
            }
        }
    }
    return rows;
}

NiqeModel niqe_fit(std::span<const ImageBuffer> pristine, int patch_size, double sharpness_fraction) {
    if (!(sharpness_fraction > 0.0 && sharpness_fraction <= 1.0)) {
        throw ConfigError("sharpness_fraction must lie in (0, 1]");
    }
    std::vector<NiqePatchFeatures> kept;
    for (std::size_t i = 0; i < pristine.size(); ++i) {
        const ImageBuffer gray = scoring_luma(pristine[i]);
        if (gray.width() < 2 * patch_size || gray.height() < 2 * patch_size) {
            throw DataError("pristine image " + std::to_string(i) + " is smaller than twice the patch size");
        }
        std::vector<double> sharp;
        const auto rows = niqe_patch_features(gray, patch_size, &sharp);
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sharp[a] > sharp[b]; });
        const auto keep = static_cast<std::size_t>(
            std::max(1.0, std::ceil(sharpness_fraction * static_cast<double>(rows.size()) - 1e-9)));
        for (std::size_t k = 0; k < keep && k < order.size(); ++k) {
            if (finite_row(rows[order[k]])) {
                kept.push_back(rows[order[k]]);
            }
        }
    }
    if (kept.size() < static_cast<std::size_t>(kNiqeDim)) {
        throw DataError("insufficient pristine data: " + std::to_string(kept.size()) + " usable patches, need 36");
    }
    NiqeModel model;
    model.patch_size = patch_size;
    model.sharpness_fraction = sharpness_fraction;
    mean_and_covariance(kept, model.mean, model.covariance);
    return model;
}

double niqe_score(const ImageBuffer& img, const NiqeModel& model) {
    const ImageBuffer gray = scoring_luma(img);
    auto rows = niqe_patch_features(gray, model.patch_size);
    std::erase_if(rows, [](const NiqePatchFeatures& r) { return !finite_row(r); });
    if (rows.empty()) {
        throw DataError("no patch with defined NSS features");
    }
    std::vector<double> mean, cov;
    mean_and_covariance(rows, mean, cov);

    const Matrix pooled = (as_matrix(model.covariance) + as_matrix(cov)) / 2.0;
    const Matrix pinv = pseudo_inverse(pooled);
    Eigen::VectorXd d(kNiqeDim);
    for (int i = 0; i < kNiqeDim; ++i) d[i] = model.mean[i] - mean[i];
    const double q = d.dot(pinv * d);
    return std::sqrt(std::max(0.0, q));
}

std::filesystem::path default_niqe_model_path() {
    return std::filesystem::path(HQC_DATA_DIR) / "niqe_pristine_model.txt";
}

}  // namespace hqc
