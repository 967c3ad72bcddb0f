// Synthetic biased-data generator.
//
// Texts are drawn from task-indicative, group-indicative and noise token
// pools. Each task label is signalled by its own token pool; group members
// with negative task labels receive spurious task-token leakage with
// probability equal to the configured bias strength, which induces a false
// positive rate gap for an unremediated model.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/features.hpp"
#include "mindiff/rng.hpp"

namespace mindiff {

struct SynthConfig {
    std::size_t num_tasks = 3;
    std::size_t num_groups = 2;
    std::size_t n = 10000;
    std::size_t dim = 1000;
    std::vector<double> group_prevalence;    // per group, default 0.3
    std::vector<double> task_positive_rate;  // per task, default 0.12
    std::vector<double> bias;                // row-major [task][group], default 0

    // Token pool shape. Defaults keep texts short and vocabulary collisions
    // rare at dim=1000.
    std::size_t noise_tokens = 8;
    std::size_t signal_tokens = 4;
    std::size_t group_tokens = 3;
    std::size_t leak_tokens = 3;
    std::size_t noise_vocab = 200;
    std::size_t signal_vocab = 20;
    std::size_t group_vocab = 12;

    double bias_at(std::size_t t, std::size_t m) const {
        return bias.empty() ? 0.0 : bias[t * num_groups + m];
    }
};

namespace detail {
inline void validate(const SynthConfig& cfg, const std::vector<double>& prev,
                     const std::vector<double>& rate) {
    for (double p : prev)
        if (!(p > 0.0 && p < 1.0)) throw ConfigError("synthesize: group prevalence must lie in (0,1)");
    for (double r : rate)
        if (!(r > 0.0 && r < 1.0)) throw ConfigError("synthesize: task positive rate must lie in (0,1)");
    if (!cfg.bias.empty() && cfg.bias.size() != cfg.num_tasks * cfg.num_groups)
        throw ConfigError("synthesize: bias must have num_tasks*num_groups entries");
    for (double b : cfg.bias)
        if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("synthesize: bias strength must lie in [0,1]");
}
}  // namespace detail

inline Dataset synthesize(const SynthConfig& cfg, std::uint64_t seed) {
    std::vector<double> prev = cfg.group_prevalence;
    if (prev.empty()) prev.assign(cfg.num_groups, 0.3);
    std::vector<double> rate = cfg.task_positive_rate;
    if (rate.empty()) rate.assign(cfg.num_tasks, 0.12);
    if (prev.size() != cfg.num_groups) throw ConfigError("synthesize: group_prevalence size mismatch");
    if (rate.size() != cfg.num_tasks) throw ConfigError("synthesize: task_positive_rate size mismatch");
    detail::validate(cfg, prev, rate);

    Dataset ds;
    ds.num_tasks = cfg.num_tasks;
    ds.num_groups = cfg.num_groups;
    for (std::size_t t = 0; t < cfg.num_tasks; ++t) ds.task_names.push_back("task" + std::to_string(t));
    for (std::size_t m = 0; m < cfg.num_groups; ++m) ds.group_names.push_back("group" + std::to_string(m));
    ds.examples.reserve(cfg.n);
    ds.texts.reserve(cfg.n);

    Rng rng(seed);
    std::string text;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        Example ex;
        ex.groups.resize(cfg.num_groups);
        for (std::size_t m = 0; m < cfg.num_groups; ++m)
            ex.groups[m] = rng.bernoulli(prev[m]) ? Membership::Member : Membership::NonMember;
        ex.labels.resize(cfg.num_tasks);
        for (std::size_t t = 0; t < cfg.num_tasks; ++t)
            ex.labels[t] = rng.bernoulli(rate[t]) ? 1 : 0;

        text.clear();
        auto emit = [&](const char* prefix, std::size_t pool, std::size_t vocab) {
            if (!text.empty()) text.push_back(' ');
            text += prefix;
            text += std::to_string(pool);
            text.push_back('v');
            text += std::to_string(rng.uniform_below(vocab));
        };
        for (std::size_t k = 0; k < cfg.noise_tokens; ++k) emit("nz", 0, cfg.noise_vocab);
        for (std::size_t t = 0; t < cfg.num_tasks; ++t)
            if (ex.labels[t])
                for (std::size_t k = 0; k < cfg.signal_tokens; ++k) emit("ts", t, cfg.signal_vocab);
        for (std::size_t m = 0; m < cfg.num_groups; ++m)
            if (ex.groups[m] == Membership::Member)
                for (std::size_t k = 0; k < cfg.group_tokens; ++k) emit("gk", m, cfg.group_vocab);
        for (std::size_t t = 0; t < cfg.num_tasks; ++t)
            for (std::size_t m = 0; m < cfg.num_groups; ++m)
                if (!ex.labels[t] && ex.groups[m] == Membership::Member &&
                    rng.bernoulli(cfg.bias_at(t, m)))
                    for (std::size_t k = 0; k < cfg.leak_tokens; ++k) emit("ts", t, cfg.signal_vocab);

        ex.features = hash_vectorize(text, cfg.dim);
        ds.examples.push_back(std::move(ex));
        ds.texts.push_back(text);
    }
    return ds;
}

}  // namespace mindiff
