// Strategy-dispatched loss assembly and the training loop.
//
// The loss is mean per-task binary cross-entropy over the main batch plus
// lambda times the strategy's MMD side terms:
//   Baseline          one term per (task, group), head t vs its (y_t=0) pair
//   Overconditioned   per group, summed over all heads on the shared pair
//   Interleaved       the Overconditioned term of one sampled group,
//                     optionally rescaled by |G| to match it in expectation
//   Direct            single head trained on the OR label, interleaved sides
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/mlp.hpp"
#include "mindiff/mmd.hpp"
#include "mindiff/streams.hpp"

namespace mindiff {

struct TrainConfig {
    StreamSpec stream;
    double lambda = 0.0;
    std::size_t epochs = 25;
    double lr = 0.1;
    KernelConfig kernel;
    std::size_t hidden = 64;
    std::size_t dim = 1000;
    std::uint64_t seed = 0;
    // Multiply the interleaved regularizer by |G| so its expectation over the
    // group draw equals the full overconditioned double sum.
    bool interleave_rescale = true;
};

inline std::size_t num_heads_for(const TrainConfig& cfg, const Dataset& ds) {
    return cfg.stream.strategy == Strategy::Direct ? 1 : ds.num_tasks;
}

// Head target: task labels for component strategies, the OR label for the
// single-head direct model.
inline double head_target(const Example& ex, std::size_t head, bool direct) {
    if (direct) return overall_label(ex) ? 1.0 : 0.0;
    return ex.labels[head] ? 1.0 : 0.0;
}

struct EpochLoss {
    double ce = 0.0;
    double reg = 0.0;
};

struct TrainResult {
    MlpParams params;
    double steps_per_sec = 0.0;
    std::vector<EpochLoss> per_epoch_loss;
    std::size_t total_steps = 0;
    std::size_t skipped_side_pairs = 0;
};

struct BatchLossResult {
    double loss = 0.0;
    double ce = 0.0;
    double reg = 0.0;
    Gradients grads;
    std::size_t skipped_side_pairs = 0;
};

namespace detail {

constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

inline bool interleaves(Strategy s) {
    return s == Strategy::InterleavedOverconditioned || s == Strategy::Direct;
}

// Per-group rescale factors making the interleaved regularizer match the
// full overconditioned sum in expectation: 1 / P(M = m), which is exactly
// |G| under the uniform draw.
inline std::vector<double> interleave_rescale_factors(const StreamSpec& spec, std::size_t num_groups) {
    if (spec.group_weights.empty())
        return std::vector<double>(num_groups, static_cast<double>(num_groups));
    auto probs = group_probabilities(spec, num_groups);
    for (auto& p : probs) p = 1.0 / p;
    return probs;
}

}  // namespace detail

inline BatchLossResult batch_loss(const MlpParams& params, const Dataset& ds, const Batch& batch,
                                  const TrainConfig& cfg) {
    const bool direct = cfg.stream.strategy == Strategy::Direct;
    const std::size_t heads = params.num_heads;
    BatchLossResult out;
    out.grads = zero_gradients(params);

    // Cross-entropy over the main batch, summed over heads, averaged over
    // examples.
    const double inv_n = batch.main.empty() ? 0.0 : 1.0 / static_cast<double>(batch.main.size());
    std::vector<double> dl_dprobs(heads);
    ForwardCache cache;
    double ce = 0.0;
    for (auto idx : batch.main) {
        const Example& ex = ds.examples[idx];
        forward_into(params, ex.features, cache);
        for (std::size_t k = 0; k < heads; ++k) {
            const double y = head_target(ex, k, direct);
            const double p = detail::clamp_prob(cache.probs[k]);
            ce -= (y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_n;
            dl_dprobs[k] = (p - y) / (p * (1.0 - p)) * inv_n;
        }
        backward_into(params, ex.features, cache, dl_dprobs, out.grads);
    }
    out.ce = ce;

    // MMD side terms. Entirely skipped at lambda = 0 so that remediated
    // strategies reproduce the None trajectory bit for bit.
    if (cfg.lambda > 0.0 && !batch.sides.empty()) {
        const bool rescaled = cfg.interleave_rescale && detail::interleaves(cfg.stream.strategy);
        const std::vector<double> factors =
            rescaled ? detail::interleave_rescale_factors(cfg.stream, ds.num_groups)
                     : std::vector<double>();
        std::vector<ForwardCache> nm_caches, m_caches;
        std::vector<std::vector<double>> nm_dl, m_dl;
        SampleSet a, b;
        MmdValueGrad vg;
        for (const auto& sb : batch.sides) {
            if (sb.nonmember.empty() || sb.member.empty()) {
                out.skipped_side_pairs += sb.task >= 0 ? 1 : heads;
                continue;
            }
            const double lam = rescaled ? cfg.lambda * factors[sb.group] : cfg.lambda;
            if (nm_caches.size() < sb.nonmember.size()) nm_caches.resize(sb.nonmember.size());
            if (m_caches.size() < sb.member.size()) m_caches.resize(sb.member.size());
            for (std::size_t i = 0; i < sb.nonmember.size(); ++i)
                forward_into(params, ds.examples[sb.nonmember[i]].features, nm_caches[i]);
            for (std::size_t j = 0; j < sb.member.size(); ++j)
                forward_into(params, ds.examples[sb.member[j]].features, m_caches[j]);
            nm_dl.assign(sb.nonmember.size(), std::vector<double>(heads, 0.0));
            m_dl.assign(sb.member.size(), std::vector<double>(heads, 0.0));

            const std::size_t head_begin = sb.task >= 0 ? static_cast<std::size_t>(sb.task) : 0;
            const std::size_t head_end = sb.task >= 0 ? head_begin + 1 : heads;
            for (std::size_t k = head_begin; k < head_end; ++k) {
                a.clear();
                b.clear();
                for (std::size_t i = 0; i < sb.nonmember.size(); ++i) a.push_back(nm_caches[i].probs[k]);
                for (std::size_t j = 0; j < sb.member.size(); ++j) b.push_back(m_caches[j].probs[k]);
                mmd_sq_value_grad(a, b, cfg.kernel, vg);
                out.reg += lam * vg.value;
                for (std::size_t i = 0; i < a.size(); ++i) nm_dl[i][k] = lam * vg.wrt_a[i];
                for (std::size_t j = 0; j < b.size(); ++j) m_dl[j][k] = lam * vg.wrt_b[j];
            }
            for (std::size_t i = 0; i < sb.nonmember.size(); ++i)
                backward_into(params, ds.examples[sb.nonmember[i]].features, nm_caches[i], nm_dl[i],
                              out.grads);
            for (std::size_t j = 0; j < sb.member.size(); ++j)
                backward_into(params, ds.examples[sb.member[j]].features, m_caches[j], m_dl[j],
                              out.grads);
        }
    }

    out.loss = out.ce + out.reg;
    return out;
}

inline TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
    if (ds.size() == 0) throw ConfigError("train: empty dataset");
    if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (cfg.lambda < 0.0) throw ConfigError("train: lambda must be non-negative");
    if (cfg.epochs == 0) throw ConfigError("train: epochs must be positive");

    StreamSet streams = build_streams(ds, cfg.stream, derive_seed(cfg.seed, "streams"));
    Rng init_rng(derive_seed(cfg.seed, "init"));
    Rng batch_rng(derive_seed(cfg.seed, "batch"));

    TrainResult result;
    result.params = init_mlp(cfg.dim, cfg.hidden, num_heads_for(cfg, ds), init_rng);

    const std::size_t steps_per_epoch =
        (ds.size() + cfg.stream.main_batch - 1) / cfg.stream.main_batch;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    constexpr std::size_t kWarmupSteps = 10;

    using Clock = std::chrono::steady_clock;
    const auto t_start = Clock::now();
    auto t_warm = t_start;

    std::size_t step = 0;
    double last_ce = 0.0, last_reg = 0.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochLoss acc;
        for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
            Batch batch = streams.next_batch(batch_rng);
            BatchLossResult bl = batch_loss(result.params, ds, batch, cfg);
            if (!std::isfinite(bl.loss))
                throw TrainingError("train: non-finite loss at step " + std::to_string(step) +
                                    " (last ce=" + std::to_string(last_ce) +
                                    ", reg=" + std::to_string(last_reg) + ")");
            last_ce = bl.ce;
            last_reg = bl.reg;
            sgd_step(result.params, bl.grads, cfg.lr);
            acc.ce += bl.ce;
            acc.reg += bl.reg;
            result.skipped_side_pairs += bl.skipped_side_pairs;
            if (step + 1 == kWarmupSteps) t_warm = Clock::now();
        }
        acc.ce /= static_cast<double>(steps_per_epoch);
        acc.reg /= static_cast<double>(steps_per_epoch);
        result.per_epoch_loss.push_back(acc);
    }
    const auto t_end = Clock::now();

    // Steps/sec over the steady-state window, discarding warmup steps.
    const bool warmed = total_steps > kWarmupSteps;
    const double elapsed =
        std::chrono::duration<double>(t_end - (warmed ? t_warm : t_start)).count();
    const double timed_steps = static_cast<double>(warmed ? total_steps - kWarmupSteps : total_steps);
    result.steps_per_sec = timed_steps / std::max(elapsed, 1e-12);
    result.total_steps = total_steps;
    return result;
}

struct RegularizerExpectation {
    double interleaved_mean = 0.0;
    double overconditioned_mean = 0.0;
    double interleaved_stderr = 0.0;
    std::vector<double> interleaved_per_batch;
    std::vector<double> overconditioned_per_batch;
};

namespace detail {

// Regularizer value of one batch at frozen parameters (no gradients).
// `factors` holds per-group rescale multipliers; empty means none.
inline double regularizer_value(const MlpParams& params, const Dataset& ds, const Batch& batch,
                                const TrainConfig& cfg, std::span<const double> factors) {
    double total = 0.0;
    SampleSet a, b;
    for (const auto& sb : batch.sides) {
        if (sb.nonmember.empty() || sb.member.empty()) continue;
        const double lam = factors.empty() ? cfg.lambda : cfg.lambda * factors[sb.group];
        const std::size_t head_begin = sb.task >= 0 ? static_cast<std::size_t>(sb.task) : 0;
        const std::size_t head_end = sb.task >= 0 ? head_begin + 1 : params.num_heads;
        std::vector<ForwardCache> nm, m;
        for (auto idx : sb.nonmember) nm.push_back(forward(params, ds.examples[idx].features));
        for (auto idx : sb.member) m.push_back(forward(params, ds.examples[idx].features));
        for (std::size_t k = head_begin; k < head_end; ++k) {
            a.clear();
            b.clear();
            for (const auto& c : nm) a.push_back(c.probs[k]);
            for (const auto& c : m) b.push_back(c.probs[k]);
            total += lam * mmd_sq(a, b, cfg.kernel);
        }
    }
    return total;
}

}  // namespace detail

// Compares the interleaved regularizer (rescaled by |G|) with the full
// overconditioned regularizer over the same pools at frozen parameters.
inline RegularizerExpectation expected_regularizer_check(const Dataset& ds, const TrainConfig& cfg,
                                                         std::size_t n_batches) {
    if (cfg.stream.strategy != Strategy::InterleavedOverconditioned)
        throw ConfigError("expected_regularizer_check: strategy must be interleaved");

    Rng init_rng(derive_seed(cfg.seed, "init"));
    const MlpParams params = init_mlp(cfg.dim, cfg.hidden, ds.num_tasks, init_rng);

    StreamSpec inter_spec = cfg.stream;
    StreamSpec over_spec = cfg.stream;
    over_spec.strategy = Strategy::Overconditioned;
    // Identical stream seeds: the overconditioned pools and the interleaved
    // pools are the same objects drawn in the same order.
    StreamSet inter = build_streams(ds, inter_spec, derive_seed(cfg.seed, "streams"));
    StreamSet over = build_streams(ds, over_spec, derive_seed(cfg.seed, "streams"));
    Rng inter_rng(derive_seed(cfg.seed, "batch"));
    Rng over_rng(derive_seed(cfg.seed, "batch"));

    // Rescale is forced on for the interleaved series; that is the claim
    // under test.
    const std::vector<double> factors =
        detail::interleave_rescale_factors(cfg.stream, ds.num_groups);

    RegularizerExpectation out;
    out.interleaved_per_batch.reserve(n_batches);
    out.overconditioned_per_batch.reserve(n_batches);
    for (std::size_t i = 0; i < n_batches; ++i) {
        Batch bi = inter.next_batch(inter_rng);
        out.interleaved_per_batch.push_back(detail::regularizer_value(params, ds, bi, cfg, factors));
        Batch bo = over.next_batch(over_rng);
        out.overconditioned_per_batch.push_back(detail::regularizer_value(params, ds, bo, cfg, {}));
    }

    double sum = 0.0;
    for (double v : out.interleaved_per_batch) sum += v;
    out.interleaved_mean = sum / static_cast<double>(n_batches);
    sum = 0.0;
    for (double v : out.overconditioned_per_batch) sum += v;
    out.overconditioned_mean = sum / static_cast<double>(n_batches);

    double ss = 0.0;
    for (double v : out.interleaved_per_batch) {
        const double d = v - out.interleaved_mean;
        ss += d * d;
    }
    if (n_batches > 1)
        out.interleaved_stderr =
            std::sqrt(ss / static_cast<double>(n_batches - 1) / static_cast<double>(n_batches));
    return out;
}

}  // namespace mindiff
