// SPDX-License-Identifier: Apache-2.0

// Independent reference computations shared by the unit and acceptance tests.
// None of them call into the library code they are used to check.

#pragma once

#include "hqc/boxgeom.hpp"
#include "hqc/imaging.hpp"
#include "hqc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace hqc::oracle {

/// 4-neighbour Laplacian evaluated as a direct 3x3 correlation with clamped indices.
inline std::vector<double> laplacian_response(const ImageBuffer& g) {
    const int w = g.width(), h = g.height();
    auto px = [&](int x, int y) { return g.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
    const int kernel[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
    std::vector<double> r;
    r.reserve(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i) acc += kernel[j + 1][i + 1] * px(x + i, y + j);
            r.push_back(acc);
        }
    }
    return r;
}

inline double population_variance(const std::vector<double>& r) {
    long double mean = 0.0L;
    for (double v : r) mean += v;
    mean /= r.size();
    long double var = 0.0L;
    for (double v : r) var += (v - mean) * (v - mean);
    return static_cast<double>(var / r.size());
}

inline double laplacian_variance(const ImageBuffer& g) { return population_variance(laplacian_response(g)); }

using Region = std::tuple<int, int, int>;

inline Region region_of(const SquareCrop& c) { return {c.x, c.y, c.side}; }

/// Greedy-by-center keep set characterised without running the greedy loop:
/// K is the answer iff, for every crop c in priority order (center distance,
/// then x, y, side), c is in K exactly when no higher-priority member of K
/// overlaps it beyond the threshold. All 2^n subsets are tested; `solutions`
/// receives how many satisfy the characterisation (always 1).
inline std::vector<Region> nms_exhaustive(const std::vector<SquareCrop>& crops, double threshold,
                                          std::size_t* solutions = nullptr) {
    const std::size_t n = crops.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& A = crops[a];
        const auto& B = crops[b];
        return std::tie(A.center_distance, A.x, A.y, A.side) < std::tie(B.center_distance, B.x, B.y, B.side);
    });
    auto overlap = [&](std::size_t a, std::size_t b) {
        const auto& A = crops[a];
        const auto& B = crops[b];
        const double ix = std::max(0, std::min(A.x + A.side, B.x + B.side) - std::max(A.x, B.x));
        const double iy = std::max(0, std::min(A.y + A.side, B.y + B.side) - std::max(A.y, B.y));
        const double inter = ix * iy;
        return inter / (double(A.side) * A.side + double(B.side) * B.side - inter);
    };
    std::vector<Region> found;
    std::size_t count = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        bool ok = true;
        for (std::size_t p = 0; p < n && ok; ++p) {
            const std::size_t c = order[p];
            bool blocked = false;
            for (std::size_t q = 0; q < p; ++q)
                if (((mask >> order[q]) & 1u) && overlap(order[q], c) > threshold) blocked = true;
            ok = (((mask >> c) & 1u) != 0) == !blocked;
        }
        if (!ok) continue;
        ++count;
        found.clear();
        for (std::size_t p = 0; p < n; ++p)
            if ((mask >> order[p]) & 1u) found.push_back(region_of(crops[order[p]]));
    }
    if (solutions) *solutions = count;
    return found;
}

/// Empty when `c` satisfies the squarify contract for `box` in a W x H image:
/// in bounds, side equals the longer pixel extent of the box whenever that
/// fits (min(W, H) otherwise), and the box is contained whenever it can be.
inline std::string squarify_violation(const BBox& box, int W, int H, const SquareCrop& c) {
    if (c.side <= 0) return "non-positive side";
    if (c.x < 0 || c.y < 0 || c.x + c.side > W || c.y + c.side > H) return "out of bounds";
    const int ext_w = static_cast<int>(std::ceil(box.x + box.w - 1e-9) - std::floor(box.x + 1e-9));
    const int ext_h = static_cast<int>(std::ceil(box.y + box.h - 1e-9) - std::floor(box.y + 1e-9));
    const int longer = std::max(ext_w, ext_h);
    if (longer > std::min(W, H)) return c.side == std::min(W, H) ? "" : "side is not min(W, H)";
    if (c.side != longer) return "side is not the longer extent";
    if (c.x > box.x + 1e-9 || c.y > box.y + 1e-9 || c.x + c.side < box.x + box.w - 1e-9 ||
        c.y + c.side < box.y + box.h - 1e-9)
        return "box not contained";
    return "";
}

/// Random box inside a random image of up to 800 x 800, optionally on the integer grid.
/// Returns false when an integral draw does not fit.
inline bool random_box(std::mt19937& gen, BBox& box, int& W, int& H, bool& integral) {
    W = 1 + static_cast<int>(gen() % 800);
    H = 1 + static_cast<int>(gen() % 800);
    integral = gen() % 2;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(gen) * W, y = u(gen) * H;
    double w = std::max(0.01, u(gen) * (W - x)), h = std::max(0.01, u(gen) * (H - y));
    if (integral) {
        x = std::floor(x);
        y = std::floor(y);
        w = std::max(1.0, std::floor(w));
        h = std::max(1.0, std::floor(h));
        if (x + w > W || y + h > H) return false;
    }
    box = {x, y, w, h};
    return true;
}

/// Random squarified crops inside a W x H image.
inline std::vector<SquareCrop> random_crops(std::mt19937& gen, int W, int H, std::size_t n) {
    std::vector<SquareCrop> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 1 + gen() % 120, h = 1 + gen() % 120;
        const double x = gen() % static_cast<unsigned>(W - w + 1), y = gen() % static_cast<unsigned>(H - h + 1);
        out.push_back(squarify({x, y, w, h}, W, H));
    }
    return out;
}

/// Long-double z-scores (lower_better negated, population deviation) and their mean.
struct Standardized {
    std::vector<std::vector<long double>> z;  // per spec, per row
    std::vector<long double> aggregate;
};

inline Standardized standardize(const ScoreTable& t, const std::vector<MetricSpec>& specs) {
    Standardized s;
    s.aggregate.assign(t.rows(), 0.0L);
    for (const auto& spec : specs) {
        const double sign = spec.direction == Direction::lower_better ? -1.0 : 1.0;
        long double mean = 0.0L, sq = 0.0L;
        for (std::size_t r = 0; r < t.rows(); ++r) mean += sign * t.get(r, spec.name);
        mean /= t.rows();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const long double d = sign * t.get(r, spec.name) - mean;
            sq += d * d;
        }
        const long double sd = std::sqrt(sq / t.rows());
        std::vector<long double> z(t.rows());
        for (std::size_t r = 0; r < t.rows(); ++r) {
            z[r] = (sign * t.get(r, spec.name) - mean) / sd;
            s.aggregate[r] += z[r] / specs.size();
        }
        s.z.push_back(std::move(z));
    }
    return s;
}

/// Expected selection: rank rows by (aggregate desc, crop_id asc), cut
/// floor(fraction * n), keep rows passing every threshold in native direction.
struct ExpectedSelection {
    std::vector<std::string> ranked;    // all crop ids in rank order
    std::vector<std::string> selected;  // in rank order
    std::size_t failed_threshold = 0;
    std::size_t cut = 0;
};

inline ExpectedSelection sort_and_filter(const ScoreTable& raw, const std::vector<double>& aggregate, double fraction,
                                         const std::vector<MetricSpec>& specs) {
    std::vector<std::size_t> order(raw.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (aggregate[a] != aggregate[b]) return aggregate[a] > aggregate[b];
        return raw.crop_id(a) < raw.crop_id(b);
    });
    ExpectedSelection e;
    e.cut = static_cast<std::size_t>(std::floor(fraction * raw.rows() + 1e-9));
    for (std::size_t i = 0; i < order.size(); ++i) {
        e.ranked.push_back(raw.crop_id(order[i]));
        if (i >= e.cut) continue;
        bool pass = true;
        for (const auto& s : specs) {
            if (!s.threshold) continue;
            const double v = raw.get(order[i], s.name);
            pass = pass && (s.direction == Direction::higher_better ? v >= *s.threshold : v <= *s.threshold);
        }
        if (pass)
            e.selected.push_back(raw.crop_id(order[i]));
        else
            ++e.failed_threshold;
    }
    return e;
}

/// Random score table with 1..5 metrics. `coarse` draws values from {0..3}
/// so that aggregate ties occur.
struct RandomTable {
    ScoreTable table;
    std::vector<MetricSpec> specs;
};

inline RandomTable random_table(std::mt19937& gen, std::size_t rows, std::size_t metrics, bool coarse) {
    static const char* names[] = {"niqe", "clipiqa", "maniqa", "musiq", "brisque"};
    RandomTable c;
    std::uniform_real_distribution<double> u(-50.0, 150.0);
    for (std::size_t m = 0; m < metrics; ++m) {
        MetricSpec s;
        s.name = names[m];
        s.direction = (m == 0 || gen() % 3 == 0) ? Direction::lower_better : Direction::higher_better;
        c.specs.push_back(s);
    }
    std::vector<std::size_t> ids(rows);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), gen);
    for (std::size_t r : ids) {
        const auto row = c.table.add_row("crop" + std::to_string(r));
        for (const auto& s : c.specs) c.table.set(row, s.name, coarse ? static_cast<double>(gen() % 4) : u(gen));
    }
    return c;
}

inline bool has_constant_column(const RandomTable& c) {
    for (const auto& s : c.specs) {
        const auto& col = c.table.column(s.name);
        if (std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; })) return true;
    }
    return false;
}

/// Samples from AGGD(alpha, beta_l, beta_r): side chosen with probability
/// beta_side / (beta_l + beta_r), magnitude beta_side * Gamma(1/alpha, 1)^(1/alpha).
inline std::vector<double> sample_aggd(std::size_t n, double alpha, double beta_l, double beta_r, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::gamma_distribution<double> gamma(1.0 / alpha, 1.0);
    std::bernoulli_distribution left(beta_l / (beta_l + beta_r));
    std::vector<double> out(n);
    for (auto& v : out) {
        const double mag = std::pow(gamma(gen), 1.0 / alpha);
        v = left(gen) ? -beta_l * mag : beta_r * mag;
    }
    return out;
}

}  // namespace hqc::oracle
