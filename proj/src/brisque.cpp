// SPDX-License-Identifier: Apache-2.0

#include "hqc/brisque.hpp"

#include "hqc/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hqc {

SvrModel read_libsvm_model(std::istream& in, int dim) {
    SvrModel m;
    std::string line;
    bool saw_svr = false, saw_rbf = false, saw_gamma = false, saw_rho = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "SV") {
            break;
        }
        if (key == "svm_type") {
            std::string v;
            ls >> v;
            if (v != "epsilon_svr" && v != "nu_svr") throw DataError("unsupported svm_type '" + v + "'");
            saw_svr = true;
        } else if (key == "kernel_type") {
            std::string v;
            ls >> v;
            if (v != "rbf") throw DataError("unsupported kernel_type '" + v + "'");
            saw_rbf = true;
        } else if (key == "gamma") {
            saw_gamma = static_cast<bool>(ls >> m.gamma);
        } else if (key == "rho") {
            saw_rho = static_cast<bool>(ls >> m.rho);
        }
    }
    if (!(saw_svr && saw_rbf && saw_gamma && saw_rho)) {
        throw DataError("libsvm model header incomplete");
    }
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        double coef;
        if (!(ls >> coef)) continue;
        std::vector<double> sv(static_cast<std::size_t>(dim), 0.0);
        std::string tok;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos) throw DataError("malformed support vector entry '" + tok + "'");
            const int idx = std::stoi(tok.substr(0, colon));
            if (idx < 1 || idx > dim) throw DataError("support vector index out of range: " + tok);
            sv[static_cast<std::size_t>(idx - 1)] = std::stod(tok.substr(colon + 1));
        }
        m.dual_coefs.push_back(coef);
        m.support_vectors.push_back(std::move(sv));
    }
    if (m.support_vectors.empty()) {
        throw DataError("libsvm model has no support vectors");
    }
    return m;
}

void read_scale_ranges(std::istream& in, SvrModel& model, int dim) {
    std::string line;
    if (!std::getline(in, line) || line.rfind('x', 0) != 0) {
        throw DataError("range file must start with 'x'");
    }
    if (!(in >> model.scale_lower >> model.scale_upper) || !(model.scale_lower < model.scale_upper)) {
        throw DataError("range file has an invalid scaling interval");
    }
    model.feature_min.assign(static_cast<std::size_t>(dim), 0.0);
    model.feature_max.assign(static_cast<std::size_t>(dim), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(dim), false);
    int idx;
    double lo, hi;
    while (in >> idx >> lo >> hi) {
        if (idx < 1 || idx > dim) throw DataError("range index out of range: " + std::to_string(idx));
        model.feature_min[idx - 1] = lo;
        model.feature_max[idx - 1] = hi;
        seen[idx - 1] = true;
    }
    for (int i = 0; i < dim; ++i) {
        if (!seen[i]) throw DataError("range file lacks feature " + std::to_string(i + 1));
    }
}

SvrModel load_brisque_model(const std::filesystem::path& svm_path, const std::filesystem::path& range_path) {
    std::ifstream svm(svm_path);
    if (!svm) throw DataError("cannot open BRISQUE model " + svm_path.string());
    std::ifstream range(range_path);
    if (!range) throw DataError("cannot open BRISQUE range file " + range_path.string());
    SvrModel m = read_libsvm_model(svm);
    read_scale_ranges(range, m);
    return m;
}

std::optional<SvrModel> load_default_brisque_model() {
    const std::filesystem::path dir(HQC_DATA_DIR);
    const auto svm = dir / "brisque_live.svm";
    const auto range = dir / "brisque_live.range";
    if (!std::filesystem::exists(svm) || !std::filesystem::exists(range)) {
        return std::nullopt;
    }
    return load_brisque_model(svm, range);
}

double brisque_score(const BrisqueFeatures& features, const SvrModel& model, Diagnostics* diag) {
    const std::size_t dim = features.size();
    const bool scaled = model.feature_min.size() == dim;
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double v = features[i];
        if (!std::isfinite(v)) {
            throw std::invalid_argument("brisque_score: non-finite feature " + std::to_string(i));
        }
        if (scaled) {
            const double lo = model.feature_min[i];
            const double hi = model.feature_max[i];
            if (v < lo || v > hi) {
                if (diag) diag->warn("BRISQUE feature " + std::to_string(i + 1) + " outside training range, clamped");
                v = std::clamp(v, lo, hi);
            }
            v = hi > lo ? model.scale_lower + (model.scale_upper - model.scale_lower) * (v - lo) / (hi - lo)
                        : model.scale_lower;
        }
        x[i] = v;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < model.support_vectors.size(); ++k) {
        const auto& sv = model.support_vectors[k];
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = sv[i] - x[i];
            d2 += d * d;
        }
        acc += model.dual_coefs[k] * std::exp(-model.gamma * d2);
    }
    return acc - model.rho;
}

}  // namespace hqc
