// Brute-force fairness-property checking over explicit finite joint
// distributions of (task predictions, group membership, true overall label).
//
// Used to demonstrate that, when no input fires two task classifiers at
// once, per-task equal opportunity conditioned on all-negative truth bounds
// the overall equal-opportunity gap by the sum of per-task gaps, and that
// the non-overlap requirement is load-bearing (counterexamples exist
// without it).
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mindiff/errors.hpp"
#include "mindiff/rng.hpp"

namespace mindiff {

// Joint law over (prediction pattern, g, y): pattern is a bitmask of fired
// task heads, g is binary group membership, y the true overall label.
class JointTable {
public:
    explicit JointTable(std::size_t num_tasks)
        : num_tasks_(num_tasks), p_(std::size_t{1} << (num_tasks + 2), 0.0) {}

    std::size_t num_tasks() const { return num_tasks_; }
    std::size_t num_patterns() const { return std::size_t{1} << num_tasks_; }

    double& prob(std::uint32_t pattern, int g, int y) { return p_[index(pattern, g, y)]; }
    double prob(std::uint32_t pattern, int g, int y) const { return p_[index(pattern, g, y)]; }

    double total() const {
        double s = 0.0;
        for (double v : p_) s += v;
        return s;
    }

    double slice_mass(int g, int y) const {
        double s = 0.0;
        for (std::uint32_t pat = 0; pat < num_patterns(); ++pat) s += prob(pat, g, y);
        return s;
    }

    // P(Yhat_t = 1 | G = g, Y = 0)
    double cond_task_fire(std::size_t t, int g) const {
        const double denom = slice_mass(g, 0);
        if (denom <= 0.0)
            throw ConfigError("JointTable: conditioning event P(G=" + std::to_string(g) +
                              ", Y=0) has zero probability");
        double s = 0.0;
        for (std::uint32_t pat = 0; pat < num_patterns(); ++pat)
            if (pat & (1u << t)) s += prob(pat, g, 0);
        return s / denom;
    }

    // P(max_t Yhat_t = 1 | G = g, Y = 0)
    double cond_overall_fire(int g) const {
        const double denom = slice_mass(g, 0);
        if (denom <= 0.0)
            throw ConfigError("JointTable: conditioning event P(G=" + std::to_string(g) +
                              ", Y=0) has zero probability");
        double s = 0.0;
        for (std::uint32_t pat = 1; pat < num_patterns(); ++pat) s += prob(pat, g, 0);
        return s / denom;
    }

    // No outcome fires two task heads simultaneously.
    bool satisfies_assumption1(double tol = 0.0) const {
        for (std::uint32_t pat = 0; pat < num_patterns(); ++pat)
            if (std::popcount(pat) >= 2)
                for (int g = 0; g < 2; ++g)
                    for (int y = 0; y < 2; ++y)
                        if (prob(pat, g, y) > tol) return false;
        return true;
    }

private:
    std::size_t index(std::uint32_t pattern, int g, int y) const {
        return (static_cast<std::size_t>(pattern) * 2 + static_cast<std::size_t>(g)) * 2 +
               static_cast<std::size_t>(y);
    }

    std::size_t num_tasks_;
    std::vector<double> p_;
};

inline double overconditioned_eo_gap(const JointTable& table) {
    double gap = 0.0;
    for (std::size_t t = 0; t < table.num_tasks(); ++t)
        gap = std::max(gap, std::abs(table.cond_task_fire(t, 0) - table.cond_task_fire(t, 1)));
    return gap;
}

inline double overall_eo_gap(const JointTable& table) {
    return std::abs(table.cond_overall_fire(0) - table.cond_overall_fire(1));
}

inline bool check_overconditioned_eo(const JointTable& table, double eps) {
    return overconditioned_eo_gap(table) <= eps;
}

inline bool check_overall_eo(const JointTable& table, double eps) {
    return overall_eo_gap(table) <= eps;
}

struct Lemma1Report {
    std::size_t tables_checked = 0;
    std::size_t bound_violations = 0;        // overall gap > T*eps on a projected table
    std::size_t projection_failures = 0;     // projected table missed overconditioned EO
    double max_overall_gap = 0.0;
    double max_decomposition_error = 0.0;    // additive-decomposition identity check
    std::size_t counterexamples_tried = 0;   // non-overlap assumption dropped
    std::size_t counterexamples_found = 0;
    double max_counterexample_gap = 0.0;

    bool passed() const {
        return tables_checked > 0 && bound_violations == 0 && projection_failures == 0 &&
               max_decomposition_error <= 1e-12 && counterexamples_found >= 1;
    }

    std::string summary() const {
        std::ostringstream os;
        os << "lemma1 sweep: " << tables_checked << " non-overlap tables, " << bound_violations
           << " bound violations, max overall gap " << max_overall_gap
           << ", max decomposition error " << max_decomposition_error << "\n"
           << "counterexample search (assumption dropped): " << counterexamples_found << "/"
           << counterexamples_tried << " found, max overall gap " << max_counterexample_gap << "\n"
           << (passed() ? "PASS" : "FAIL") << "\n";
        return os.str();
    }
};

namespace detail {

inline double positive_weight(Rng& rng) {
    return 1e-6 - std::log(std::max(1.0 - rng.uniform01(), 1e-300));
}

// Random table with mass only on the zero pattern and single-task patterns,
// then rescaled within each (g, y=0) slice so each task's conditional firing
// probability matches a shared target up to a jitter of at most eps/2.
inline JointTable random_assumption1_table(std::size_t num_tasks, double eps, Rng& rng) {
    JointTable table(num_tasks);
    for (int g = 0; g < 2; ++g)
        for (int y = 0; y < 2; ++y) {
            table.prob(0, g, y) = positive_weight(rng);
            for (std::size_t t = 0; t < num_tasks; ++t)
                table.prob(1u << t, g, y) = positive_weight(rng);
        }
    double total = table.total();
    for (std::uint32_t pat = 0; pat < table.num_patterns(); ++pat)
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) table.prob(pat, g, y) /= total;

    // Shared per-task targets, slightly shrunk so jitter cannot overflow the
    // slice.
    std::vector<double> target(num_tasks);
    for (std::size_t t = 0; t < num_tasks; ++t)
        target[t] = 0.5 * (table.cond_task_fire(t, 0) + table.cond_task_fire(t, 1)) * (1.0 - 1e-3);

    for (int g = 0; g < 2; ++g) {
        const double slice = table.slice_mass(g, 0);
        double fired = 0.0;
        for (std::size_t t = 0; t < num_tasks; ++t) {
            double q = target[t] + rng.uniform(-eps / 2.0, eps / 2.0);
            q = std::max(q, 0.0);
            table.prob(1u << t, g, 0) = q * slice;
            fired += q;
        }
        table.prob(0, g, 0) = (1.0 - fired) * slice;
    }
    return table;
}

// Table violating the non-overlap assumption but with exactly matched
// per-task conditional firing probabilities: group 0 fires heads together
// (nested patterns), group 1 fires them one at a time.
inline JointTable coupling_counterexample(std::size_t num_tasks, Rng& rng) {
    std::vector<double> q(num_tasks);
    for (auto& v : q) v = rng.uniform(0.05, 0.8 / static_cast<double>(num_tasks));

    JointTable table(num_tasks);
    const double slice0 = 0.15 + 0.2 * rng.uniform01();
    const double slice1 = 0.15 + 0.2 * rng.uniform01();
    const double rest = 1.0 - slice0 - slice1;

    std::vector<std::size_t> order(num_tasks);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });

    // G=0: nested prefix patterns give marginal q_t per task but overall
    // firing probability max_t q_t.
    std::uint32_t prefix = 0;
    double prev = 1.0;
    table.prob(0, 0, 0) = (1.0 - q[order[0]]) * slice0;
    for (std::size_t k = 0; k < num_tasks; ++k) {
        prefix |= 1u << order[k];
        const double next = k + 1 < num_tasks ? q[order[k + 1]] : 0.0;
        table.prob(prefix, 0, 0) = (q[order[k]] - next) * slice0;
        prev = next;
    }
    (void)prev;

    // G=1: disjoint single-task firing gives the same marginals but overall
    // firing probability sum_t q_t.
    double fired = 0.0;
    for (std::size_t t = 0; t < num_tasks; ++t) {
        table.prob(1u << t, 1, 0) = q[t] * slice1;
        fired += q[t];
    }
    table.prob(0, 1, 0) = (1.0 - fired) * slice1;

    // Remaining mass on the y=1 slices, split arbitrarily.
    table.prob(0, 0, 1) = rest * 0.5;
    table.prob(0, 1, 1) = rest * 0.5;
    return table;
}

}  // namespace detail

// Property sweep: on random non-overlap tables projected to per-task
// equal opportunity within eps, the overall gap never exceeds T*eps; with
// the non-overlap assumption dropped, counterexamples are searched for and
// counted.
inline Lemma1Report lemma1_property_sweep(std::size_t n_tables, std::size_t t_max, double eps,
                                          std::uint64_t seed) {
    if (n_tables == 0) throw ConfigError("lemma1_property_sweep: n_tables must be positive");
    if (t_max == 0) throw ConfigError("lemma1_property_sweep: t_max must be positive");
    Rng rng(derive_seed(seed, "lemma1"));
    Lemma1Report report;

    for (std::size_t i = 0; i < n_tables; ++i) {
        const std::size_t T = 1 + rng.uniform_below(t_max);
        const JointTable table = detail::random_assumption1_table(T, eps, rng);
        ++report.tables_checked;

        if (!check_overconditioned_eo(table, eps)) ++report.projection_failures;

        // Key identity: with non-overlapping heads the overall firing
        // probability decomposes into the sum of per-task ones.
        for (int g = 0; g < 2; ++g) {
            double task_sum = 0.0;
            for (std::size_t t = 0; t < T; ++t) task_sum += table.cond_task_fire(t, g);
            report.max_decomposition_error = std::max(
                report.max_decomposition_error, std::abs(task_sum - table.cond_overall_fire(g)));
        }

        const double gap = overall_eo_gap(table);
        report.max_overall_gap = std::max(report.max_overall_gap, gap);
        if (gap > static_cast<double>(T) * eps) ++report.bound_violations;
    }

    const std::size_t n_counter = std::max<std::size_t>(n_tables / 10, 10);
    for (std::size_t i = 0; i < n_counter; ++i) {
        const std::size_t T = 2 + rng.uniform_below(std::max<std::size_t>(t_max, 2) - 1);
        const JointTable table = detail::coupling_counterexample(T, rng);
        ++report.counterexamples_tried;
        if (!table.satisfies_assumption1() && check_overconditioned_eo(table, 1e-9) &&
            overall_eo_gap(table) > 0.01) {
            ++report.counterexamples_found;
            report.max_counterexample_gap =
                std::max(report.max_counterexample_gap, overall_eo_gap(table));
        }
    }
    return report;
}

}  // namespace mindiff
