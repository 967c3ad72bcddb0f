// System-level composite prediction, threshold calibration, and evaluation
// metrics: per-group FPR gaps, ROC AUC, average precision, accuracy.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/mlp.hpp"
#include "mindiff/training.hpp"

namespace mindiff {

struct ThresholdSet {
    std::vector<double> per_task;
};

struct SystemPrediction {
    bool hard = false;
    double soft = 0.0;
};

// System-level prediction: positive if any head clears its threshold; the
// soft score is the max of the head probabilities.
inline SystemPrediction overall_predict(std::span<const double> probs, const ThresholdSet& thresholds) {
    if (probs.size() != thresholds.per_task.size())
        throw ConfigError("overall_predict: probs/thresholds length mismatch");
    SystemPrediction out;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] >= thresholds.per_task[k]) out.hard = true;
        out.soft = std::max(out.soft, probs[k]);
    }
    return out;
}

// ROC AUC via the Mann-Whitney rank statistic; tied pairs contribute 1/2.
// Undefined (nullopt) when either class is absent.
inline std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (auto y : labels) n_pos += y ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) pos_rank_sum += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Average precision over descending score order (AUCPR summary). Ties are
// broken by original position (stable sort). Undefined without positives.
inline std::optional<double> average_precision(std::span<const double> scores,
                                               std::span<const std::uint8_t> labels) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (auto y : labels) n_pos += y ? 1 : 0;
    if (n == 0 || n_pos == 0) return std::nullopt;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[order[k]]) {
            ++tp;
            ap += static_cast<double>(tp) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

// The calibration rule for one task: the smallest prediction quantile over
// the task's validation negatives whose empirical FPR stays at or below
// target_fpr. target_fpr = 0 lands strictly above the maximum prediction.
inline double threshold_for_negatives(std::vector<double> negative_preds, double target_fpr) {
    if (negative_preds.empty())
        throw CalibrationError("threshold_for_negatives: no negative predictions");
    std::sort(negative_preds.begin(), negative_preds.end(), std::greater<>());
    const auto allowed = static_cast<std::size_t>(
        std::floor(target_fpr * static_cast<double>(negative_preds.size()) + 1e-9));
    // Walk distinct values from the top; keep the lowest threshold whose
    // flagged count stays within the allowance.
    double threshold = std::nextafter(negative_preds.front(), 2.0);  // flags nothing
    for (std::size_t i = 0; i < negative_preds.size();) {
        std::size_t j = i;
        while (j < negative_preds.size() && negative_preds[j] == negative_preds[i]) ++j;
        if (j > allowed) break;
        threshold = negative_preds[i];
        i = j;
    }
    return threshold;
}

// Per-task thresholds calibrated on a validation set.
inline ThresholdSet calibrate_thresholds(const MlpParams& params, const Dataset& validation,
                                         double target_fpr = 0.05) {
    if (!(target_fpr >= 0.0 && target_fpr <= 1.0))
        throw ConfigError("calibrate_thresholds: target_fpr must lie in [0,1]");
    const std::size_t heads = params.num_heads;
    const bool direct = heads == 1 && validation.num_tasks > 1;

    std::vector<std::vector<double>> neg_preds(heads);
    for (const Example& ex : validation.examples) {
        const ForwardCache cache = forward(params, ex.features);
        for (std::size_t k = 0; k < heads; ++k)
            if (head_target(ex, k, direct) == 0.0) neg_preds[k].push_back(cache.probs[k]);
    }

    ThresholdSet out;
    out.per_task.resize(heads);
    for (std::size_t k = 0; k < heads; ++k) {
        if (neg_preds[k].empty()) {
            const std::string name = direct ? "overall" : validation.task_names[k];
            throw CalibrationError("calibrate_thresholds: no negatives for task '" + name + "'");
        }
        out.per_task[k] = threshold_for_negatives(std::move(neg_preds[k]), target_fpr);
    }
    return out;
}

struct GroupFairness {
    std::optional<double> fpr_member;
    std::optional<double> fpr_nonmember;
    std::optional<double> d_eo;
    std::optional<double> r_eo;
    std::size_t n_member_neg = 0;
    std::size_t n_nonmember_neg = 0;
};

struct EvalReport {
    std::vector<GroupFairness> groups;
    std::optional<double> system_roc_auc;
    double accuracy = 0.0;
    std::vector<std::optional<double>> task_aucpr;
    std::size_t n_eval = 0;
};

// Metric computation over precomputed per-head probabilities
// (probs[i][k] for example i, head k). Group FPRs are computed over
// system-level negatives with known membership only; examples with unknown
// membership still count towards AUC and accuracy.
inline EvalReport evaluate_scores(const std::vector<std::vector<double>>& probs, const Dataset& test,
                                  const ThresholdSet& thresholds) {
    if (test.size() == 0) throw ConfigError("evaluate: empty test set");
    if (probs.size() != test.size()) throw ConfigError("evaluate: probs/test size mismatch");
    const std::size_t heads = thresholds.per_task.size();
    const bool direct = heads == 1 && test.num_tasks > 1;

    const std::size_t n = test.size();
    std::vector<double> soft(n);
    std::vector<std::uint8_t> hard(n), sys_label(n);
    std::vector<std::vector<double>> head_scores(heads, std::vector<double>(n));
    std::vector<std::vector<std::uint8_t>> head_labels(heads, std::vector<std::uint8_t>(n));

    for (std::size_t i = 0; i < n; ++i) {
        const Example& ex = test.examples[i];
        const SystemPrediction pred = overall_predict(probs[i], thresholds);
        soft[i] = pred.soft;
        hard[i] = pred.hard ? 1 : 0;
        sys_label[i] = overall_label(ex) ? 1 : 0;
        for (std::size_t k = 0; k < heads; ++k) {
            head_scores[k][i] = probs[i][k];
            head_labels[k][i] = head_target(ex, k, direct) > 0.5 ? 1 : 0;
        }
    }

    EvalReport report;
    report.n_eval = n;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += hard[i] == sys_label[i] ? 1 : 0;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    report.system_roc_auc = roc_auc(soft, sys_label);
    for (std::size_t k = 0; k < heads; ++k)
        report.task_aucpr.push_back(average_precision(head_scores[k], head_labels[k]));

    report.groups.resize(test.num_groups);
    for (std::size_t m = 0; m < test.num_groups; ++m) {
        GroupFairness& gf = report.groups[m];
        std::size_t fp_member = 0, fp_nonmember = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (sys_label[i]) continue;
            const Membership g = test.examples[i].groups[m];
            if (g == Membership::Member) {
                ++gf.n_member_neg;
                fp_member += hard[i];
            } else if (g == Membership::NonMember) {
                ++gf.n_nonmember_neg;
                fp_nonmember += hard[i];
            }
        }
        if (gf.n_member_neg > 0)
            gf.fpr_member = static_cast<double>(fp_member) / static_cast<double>(gf.n_member_neg);
        if (gf.n_nonmember_neg > 0)
            gf.fpr_nonmember =
                static_cast<double>(fp_nonmember) / static_cast<double>(gf.n_nonmember_neg);
        if (gf.fpr_member && gf.fpr_nonmember) {
            gf.d_eo = std::abs(*gf.fpr_member - *gf.fpr_nonmember);
            if (*gf.fpr_nonmember > 0.0) gf.r_eo = *gf.fpr_member / *gf.fpr_nonmember;
        }
    }
    return report;
}

inline EvalReport evaluate(const MlpParams& params, const Dataset& test, const ThresholdSet& thresholds) {
    std::vector<std::vector<double>> probs;
    probs.reserve(test.size());
    for (const Example& ex : test.examples) probs.push_back(forward(params, ex.features).probs);
    return evaluate_scores(probs, test, thresholds);
}

}  // namespace mindiff
