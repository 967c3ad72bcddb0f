// Independent brute-force reference implementations used by the test
// suites. These deliberately recompute everything from the definitions and
// must stay decoupled from the library's implementation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mindiff/mlp.hpp"

namespace oracles {

// Naive O(n^2) V-statistic double sum, written from the definition.
inline double naive_mmd_sq(std::span<const double> a, std::span<const double> b, double bandwidth) {
    auto kern = [bandwidth](double x, double y) {
        return std::exp(-((x - y) * (x - y)) / (2.0 * bandwidth * bandwidth));
    };
    double waa = 0.0, wbb = 0.0, wab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) waa += kern(a[i], a[j]);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) wbb += kern(b[i], b[j]);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) wab += kern(a[i], b[j]);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    return waa / (na * na) + wbb / (nb * nb) - 2.0 * wab / (na * nb);
}

// Exhaustive positive/negative pair comparison; ties count one half.
inline std::optional<double> pairwise_roc_auc(std::span<const double> scores,
                                              std::span<const std::uint8_t> labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    if (pairs == 0) return std::nullopt;
    return wins / static_cast<double>(pairs);
}

// Step-wise precision * delta-recall walk in descending score order, ties
// broken by original position.
inline std::optional<double> stepwise_average_precision(std::span<const double> scores,
                                                        std::span<const std::uint8_t> labels) {
    std::size_t n_pos = 0;
    for (auto y : labels) n_pos += y ? 1 : 0;
    if (scores.empty() || n_pos == 0) return std::nullopt;

    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t x, std::uint32_t y) { return scores[x] > scores[y]; });

    double ap = 0.0, recall_prev = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]]) ++tp;
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        ap += precision * (recall - recall_prev);
        recall_prev = recall;
    }
    return ap;
}

// ---- central finite differences over MlpParams ----

inline std::vector<double*> param_entries(mindiff::MlpParams& p) {
    std::vector<double*> out;
    for (auto& v : p.w1) out.push_back(&v);
    for (auto& v : p.b1) out.push_back(&v);
    for (auto& v : p.w2) out.push_back(&v);
    for (auto& v : p.b2) out.push_back(&v);
    return out;
}

inline std::vector<double> gradient_entries(const mindiff::Gradients& g) {
    std::vector<double> out;
    out.insert(out.end(), g.w1.begin(), g.w1.end());
    out.insert(out.end(), g.b1.begin(), g.b1.end());
    out.insert(out.end(), g.w2.begin(), g.w2.end());
    out.insert(out.end(), g.b2.begin(), g.b2.end());
    return out;
}

// Central finite difference of a scalar loss for every parameter entry.
inline std::vector<double> finite_difference(mindiff::MlpParams params,
                                             const std::function<double(const mindiff::MlpParams&)>& loss,
                                             double step = 1e-5) {
    std::vector<double> out;
    for (double* entry : param_entries(params)) {
        const double saved = *entry;
        *entry = saved + step;
        const double up = loss(params);
        *entry = saved - step;
        const double down = loss(params);
        *entry = saved;
        out.push_back((up - down) / (2.0 * step));
    }
    return out;
}

// Relative-error comparison with an absolute floor for near-zero entries.
struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    bool ok(double tol) const { return max_rel_err < tol; }
};

inline GradCheck compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                   double abs_floor = 1e-8) {
    GradCheck check;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double diff = std::abs(analytic[i] - numeric[i]);
        if (diff <= abs_floor) continue;
        const double rel = diff / std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-12});
        if (rel > check.max_rel_err) {
            check.max_rel_err = rel;
            check.worst_index = i;
        }
    }
    return check;
}

}  // namespace oracles
