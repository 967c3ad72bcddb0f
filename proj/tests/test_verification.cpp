#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mindiff/rng.hpp"
#include "mindiff/verification.hpp"

using namespace mindiff;

namespace {

// Independent conditional probability computation: raw loops over the
// table's outcome space.
double oracle_cond_task(const JointTable& t, std::size_t task, int g) {
    double num = 0.0, den = 0.0;
    for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat) {
        den += t.prob(pat, g, 0);
        if (pat & (1u << task)) num += t.prob(pat, g, 0);
    }
    return num / den;
}

double oracle_cond_overall(const JointTable& t, int g) {
    double num = 0.0, den = 0.0;
    for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat) {
        den += t.prob(pat, g, 0);
        if (pat != 0) num += t.prob(pat, g, 0);
    }
    return num / den;
}

JointTable random_table(std::size_t tasks, Rng& rng) {
    JointTable t(tasks);
    double total = 0.0;
    for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat)
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) {
                const double w = 0.01 + rng.uniform01();
                t.prob(pat, g, y) = w;
                total += w;
            }
    for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat)
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) t.prob(pat, g, y) /= total;
    return t;
}

}  // namespace

TEST_CASE("check_overconditioned_eo: independence of G passes at eps = 0") {
    JointTable t(2);
    // P(pattern | g, y) identical for both g; only slice masses differ.
    // Power-of-two slice masses keep the scaled conditionals exact.
    const double pattern_probs[4] = {0.6, 0.2, 0.15, 0.05};
    const double slice[2][2] = {{0.25, 0.125}, {0.5, 0.125}};  // [g][y]
    for (std::uint32_t pat = 0; pat < 4; ++pat)
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) t.prob(pat, g, y) = pattern_probs[pat] * slice[g][y];
    CHECK(check_overconditioned_eo(t, 0.0));
    CHECK(check_overall_eo(t, 0.0));
}

TEST_CASE("check_overconditioned_eo: constructed violation is caught") {
    JointTable t(2);
    // Task 0 fires only when G = 1 (given Y = 0).
    t.prob(0, 0, 0) = 0.25;
    t.prob(0, 1, 0) = 0.15;
    t.prob(1, 1, 0) = 0.10;  // pattern 01: task 0 fires
    t.prob(0, 0, 1) = 0.25;
    t.prob(0, 1, 1) = 0.25;
    const double gap = 0.10 / 0.25;  // P(task0 | g=1, y=0) - 0
    CHECK_FALSE(check_overconditioned_eo(t, gap - 1e-9));
    CHECK(check_overconditioned_eo(t, gap + 1e-9));
    CHECK_FALSE(check_overall_eo(t, gap - 1e-9));
}

TEST_CASE("conditional probabilities agree with direct arithmetic on random tables") {
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t tasks = 1 + rng.uniform_below(4);
        const JointTable t = random_table(tasks, rng);
        for (int g = 0; g < 2; ++g) {
            for (std::size_t task = 0; task < tasks; ++task)
                CHECK(t.cond_task_fire(task, g) ==
                      Catch::Approx(oracle_cond_task(t, task, g)).epsilon(0).margin(1e-12));
            CHECK(t.cond_overall_fire(g) ==
                  Catch::Approx(oracle_cond_overall(t, g)).epsilon(0).margin(1e-12));
        }
    }
}

TEST_CASE("zero-probability conditioning event is an error") {
    JointTable t(1);
    t.prob(0, 0, 0) = 0.5;
    t.prob(1, 0, 0) = 0.5;  // all mass on g = 0
    CHECK_THROWS_AS(t.cond_task_fire(0, 1), ConfigError);
    CHECK_THROWS_AS(t.cond_overall_fire(1), ConfigError);
}

TEST_CASE("single task: overconditioned and overall gaps coincide exactly") {
    Rng rng(72);
    for (int trial = 0; trial < 30; ++trial) {
        const JointTable t = random_table(1, rng);
        CHECK(overconditioned_eo_gap(t) == overall_eo_gap(t));
    }
}

TEST_CASE("assumption-1 tables: overall firing decomposes into the task sum") {
    Rng rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t tasks = 1 + rng.uniform_below(4);
        JointTable t(tasks);
        double total = 0.0;
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) {
                t.prob(0, g, y) = 0.05 + rng.uniform01();
                total += t.prob(0, g, y);
                for (std::size_t task = 0; task < tasks; ++task) {
                    t.prob(1u << task, g, y) = 0.05 + rng.uniform01();
                    total += t.prob(1u << task, g, y);
                }
            }
        for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat)
            for (int g = 0; g < 2; ++g)
                for (int y = 0; y < 2; ++y) t.prob(pat, g, y) /= total;

        REQUIRE(t.satisfies_assumption1());
        for (int g = 0; g < 2; ++g) {
            double task_sum = 0.0;
            for (std::size_t task = 0; task < tasks; ++task) task_sum += t.cond_task_fire(task, g);
            CHECK(std::abs(task_sum - t.cond_overall_fire(g)) <= 1e-12);
        }
    }
}

TEST_CASE("per-task gaps bound the overall gap additively on assumption-1 tables") {
    Rng rng(74);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t tasks = 2 + rng.uniform_below(3);
        JointTable t(tasks);
        double total = 0.0;
        for (int g = 0; g < 2; ++g)
            for (int y = 0; y < 2; ++y) {
                t.prob(0, g, y) = 0.5 + rng.uniform01();
                total += t.prob(0, g, y);
                for (std::size_t task = 0; task < tasks; ++task) {
                    t.prob(1u << task, g, y) = 0.02 + 0.1 * rng.uniform01();
                    total += t.prob(1u << task, g, y);
                }
            }
        for (std::uint32_t pat = 0; pat < t.num_patterns(); ++pat)
            for (int g = 0; g < 2; ++g)
                for (int y = 0; y < 2; ++y) t.prob(pat, g, y) /= total;

        double gap_sum = 0.0;
        for (std::size_t task = 0; task < tasks; ++task)
            gap_sum += std::abs(t.cond_task_fire(task, 0) - t.cond_task_fire(task, 1));
        CHECK(overall_eo_gap(t) <= gap_sum + 1e-12);
    }
}

TEST_CASE("lemma1_property_sweep: full sweep passes and finds counterexamples") {
    const Lemma1Report report = lemma1_property_sweep(1000, 4, 1e-6, 2024);
    CHECK(report.tables_checked == 1000);
    CHECK(report.bound_violations == 0);
    CHECK(report.projection_failures == 0);
    CHECK(report.max_decomposition_error <= 1e-12);
    CHECK(report.counterexamples_found >= 1);
    CHECK(report.max_counterexample_gap > 0.01);
    CHECK(report.passed());
    CHECK(report.summary().find("PASS") != std::string::npos);
}

TEST_CASE("lemma1_property_sweep: rejects empty configuration") {
    CHECK_THROWS_AS(lemma1_property_sweep(0, 4, 1e-6, 1), ConfigError);
    CHECK_THROWS_AS(lemma1_property_sweep(10, 0, 1e-6, 1), ConfigError);
}
