// Strategy-dependent stream and batch composition.
//
// The remediation strategies differ in which conditioned example pools they
// maintain and how many side examples each batch carries:
//   Baseline          2*T*|G| pools (y_t = 0 per task), 2*b_s*T*|G| per batch
//   Overconditioned   2*|G| pools (all labels negative), 2*b_s*|G| per batch
//   Interleaved       same pools as Overconditioned, one group per batch
//   Direct            single-head variant of Interleaved
//   None              main stream only
#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/rng.hpp"

namespace mindiff {

enum class Strategy { None, Direct, Baseline, Overconditioned, InterleavedOverconditioned };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::None: return "none";
        case Strategy::Direct: return "direct";
        case Strategy::Baseline: return "baseline";
        case Strategy::Overconditioned: return "overconditioned";
        case Strategy::InterleavedOverconditioned: return "interleaved";
    }
    return "?";
}

inline std::optional<Strategy> parse_strategy(const std::string& name) {
    if (name == "none") return Strategy::None;
    if (name == "direct") return Strategy::Direct;
    if (name == "baseline") return Strategy::Baseline;
    if (name == "overconditioned") return Strategy::Overconditioned;
    if (name == "interleaved") return Strategy::InterleavedOverconditioned;
    return std::nullopt;
}

struct StreamSpec {
    Strategy strategy = Strategy::None;
    std::size_t main_batch = 128;
    std::size_t side_batch = 16;  // examples per conditioned side (b_s)
    // Interleaving group distribution; empty means uniform. Only consulted
    // by the interleaving strategies (Interleaved, Direct).
    std::vector<double> group_weights;
};

// One conditioned side pair. task < 0 means the pair is shared across all
// task heads; otherwise it belongs to the single task `task`.
struct SideBatch {
    int task = -1;
    std::size_t group = 0;
    std::vector<std::uint32_t> nonmember;
    std::vector<std::uint32_t> member;
};

struct Batch {
    std::vector<std::uint32_t> main;
    std::vector<SideBatch> sides;

    std::size_t side_example_count() const {
        std::size_t n = 0;
        for (const auto& s : sides) n += s.nonmember.size() + s.member.size();
        return n;
    }
};

// Side examples carried per batch, exact by construction.
inline std::size_t side_examples_per_batch(const StreamSpec& spec, std::size_t num_tasks,
                                           std::size_t num_groups) {
    switch (spec.strategy) {
        case Strategy::None: return 0;
        case Strategy::Baseline: return 2 * spec.side_batch * num_tasks * num_groups;
        case Strategy::Overconditioned: return 2 * spec.side_batch * num_groups;
        case Strategy::InterleavedOverconditioned:
        case Strategy::Direct: return 2 * spec.side_batch;
    }
    return 0;
}

// An infinite shuffled cycle over a fixed index pool. Every pass is a fresh
// seeded permutation covering the pool exactly once.
class IndexStream {
public:
    IndexStream() = default;
    IndexStream(std::vector<std::uint32_t> pool, std::uint64_t seed)
        : pool_(std::move(pool)), rng_(seed) {
        rng_.shuffle(pool_);
    }

    std::uint32_t next() {
        if (cursor_ == pool_.size()) {
            rng_.shuffle(pool_);
            cursor_ = 0;
        }
        return pool_[cursor_++];
    }

    std::size_t size() const { return pool_.size(); }
    bool empty() const { return pool_.empty(); }

private:
    std::vector<std::uint32_t> pool_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

// Normalized group-draw probabilities for the interleaving strategies.
inline std::vector<double> group_probabilities(const StreamSpec& spec, std::size_t num_groups) {
    if (spec.group_weights.empty())
        return std::vector<double>(num_groups, 1.0 / static_cast<double>(num_groups));
    if (spec.group_weights.size() != num_groups)
        throw ConfigError("group_weights must have one entry per group");
    double total = 0.0;
    for (double w : spec.group_weights) {
        if (!(w > 0.0)) throw ConfigError("group_weights must be positive");
        total += w;
    }
    std::vector<double> probs;
    probs.reserve(num_groups);
    for (double w : spec.group_weights) probs.push_back(w / total);
    return probs;
}

class StreamSet {
public:
    StreamSet(const Dataset& ds, const StreamSpec& spec, std::uint64_t seed)
        : ds_(&ds), spec_(spec) {
        const std::size_t n = ds.size();
        const std::size_t T = ds.num_tasks;
        const std::size_t G = ds.num_groups;

        if (spec.main_batch == 0 || spec.side_batch == 0)
            throw ConfigError("build_streams: batch sizes must be >= 1");
        if (spec.strategy == Strategy::InterleavedOverconditioned || spec.strategy == Strategy::Direct)
            group_probs_ = group_probabilities(spec, G);

        std::vector<std::uint32_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<std::uint32_t>(i);
        if (all.empty()) throw StreamError("build_streams: dataset is empty");
        main_ = IndexStream(std::move(all), derive_seed(seed, "stream.main"));

        auto collect = [&](auto&& qualifies) {
            std::vector<std::uint32_t> pool;
            for (std::size_t i = 0; i < n; ++i)
                if (qualifies(ds.examples[i])) pool.push_back(static_cast<std::uint32_t>(i));
            return pool;
        };
        auto side_of = [](const Example& ex, std::size_t m, int side) {
            return ex.groups[m] == (side ? Membership::Member : Membership::NonMember);
        };

        if (spec.strategy == Strategy::Baseline) {
            sides_.resize(2 * T * G);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t m = 0; m < G; ++m)
                    for (int side = 0; side < 2; ++side) {
                        auto pool = collect([&](const Example& ex) {
                            return ex.labels[t] == 0 && side_of(ex, m, side);
                        });
                        if (pool.empty())
                            throw StreamError("unremediable stream: no " +
                                              std::string(side ? "member" : "non-member") +
                                              " negatives for task '" + ds.task_names[t] +
                                              "', group '" + ds.group_names[m] + "'");
                        const std::size_t id = (t * G + m) * 2 + static_cast<std::size_t>(side);
                        sides_[id] = IndexStream(std::move(pool),
                                                 derive_seed(seed, "stream.baseline", id));
                    }
        } else if (spec.strategy != Strategy::None) {
            // Overconditioned pools, shared by Overconditioned, Interleaved
            // and Direct: all labels negative, known membership.
            sides_.resize(2 * G);
            for (std::size_t m = 0; m < G; ++m)
                for (int side = 0; side < 2; ++side) {
                    auto pool = collect([&](const Example& ex) {
                        return all_labels_negative(ex) && side_of(ex, m, side);
                    });
                    if (pool.empty())
                        throw StreamError("unremediable stream: no all-negative " +
                                          std::string(side ? "member" : "non-member") +
                                          " examples for group '" + ds.group_names[m] + "'");
                    const std::size_t id = m * 2 + static_cast<std::size_t>(side);
                    sides_[id] = IndexStream(std::move(pool), derive_seed(seed, "stream.over", id));
                }
        }
    }

    const Dataset& dataset() const { return *ds_; }
    const StreamSpec& spec() const { return spec_; }
    std::size_t side_pool_count() const { return sides_.size(); }

    const IndexStream& side_pool(std::size_t id) const { return sides_[id]; }

    // Composes the next batch. `rng` drives only the interleaving group
    // draw; pool order comes from each pool's own generator.
    Batch next_batch(Rng& rng) {
        const std::size_t T = ds_->num_tasks;
        const std::size_t G = ds_->num_groups;
        Batch b;
        b.main.reserve(spec_.main_batch);
        for (std::size_t i = 0; i < spec_.main_batch; ++i) b.main.push_back(main_.next());

        switch (spec_.strategy) {
            case Strategy::None: break;
            case Strategy::Baseline:
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t m = 0; m < G; ++m)
                        b.sides.push_back(draw_side(static_cast<int>(t), m, (t * G + m) * 2));
                break;
            case Strategy::Overconditioned:
                for (std::size_t m = 0; m < G; ++m) b.sides.push_back(draw_side(-1, m, m * 2));
                break;
            case Strategy::InterleavedOverconditioned:
            case Strategy::Direct: {
                const std::size_t m = draw_group(rng);
                b.sides.push_back(draw_side(-1, m, m * 2));
                break;
            }
        }
        check_conditioning(b);
        return b;
    }

    std::span<const double> group_probs() const { return group_probs_; }

private:
    std::size_t draw_group(Rng& rng) {
        if (spec_.group_weights.empty()) return rng.uniform_below(ds_->num_groups);
        const double u = rng.uniform01();
        double cum = 0.0;
        for (std::size_t m = 0; m + 1 < group_probs_.size(); ++m) {
            cum += group_probs_[m];
            if (u < cum) return m;
        }
        return group_probs_.size() - 1;
    }

    SideBatch draw_side(int task, std::size_t group, std::size_t pool_base) {
        SideBatch sb;
        sb.task = task;
        sb.group = group;
        sb.nonmember.reserve(spec_.side_batch);
        sb.member.reserve(spec_.side_batch);
        for (std::size_t i = 0; i < spec_.side_batch; ++i) sb.nonmember.push_back(sides_[pool_base].next());
        for (std::size_t i = 0; i < spec_.side_batch; ++i) sb.member.push_back(sides_[pool_base + 1].next());
        return sb;
    }

    void check_conditioning([[maybe_unused]] const Batch& b) const {
#ifndef NDEBUG
        for (const auto& sb : b.sides) {
            auto check = [&](std::uint32_t idx, Membership want) {
                const Example& ex = ds_->examples[idx];
                assert(ex.groups[sb.group] == want);
                if (sb.task >= 0)
                    assert(ex.labels[static_cast<std::size_t>(sb.task)] == 0);
                else
                    assert(all_labels_negative(ex));
            };
            for (auto i : sb.nonmember) check(i, Membership::NonMember);
            for (auto i : sb.member) check(i, Membership::Member);
        }
#endif
    }

    const Dataset* ds_;
    StreamSpec spec_;
    IndexStream main_;
    std::vector<IndexStream> sides_;
    std::vector<double> group_probs_;
};

inline StreamSet build_streams(const Dataset& ds, const StreamSpec& spec, std::uint64_t seed) {
    return StreamSet(ds, spec, seed);
}

inline Batch next_batch(StreamSet& streams, Rng& rng) { return streams.next_batch(rng); }

}  // namespace mindiff
