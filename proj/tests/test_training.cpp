#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mindiff/metrics.hpp"
#include "mindiff/streams.hpp"
#include "mindiff/synth.hpp"
#include "mindiff/training.hpp"
#include "test_oracles.hpp"

using namespace mindiff;

namespace {

// Desk-size random dataset guaranteed to fill every conditioned pool.
Dataset desk_dataset(Rng& rng, std::size_t tasks, std::size_t groups, std::size_t n, std::size_t dim) {
    Dataset ds;
    ds.num_tasks = tasks;
    ds.num_groups = groups;
    for (std::size_t t = 0; t < tasks; ++t) ds.task_names.push_back("t" + std::to_string(t));
    for (std::size_t m = 0; m < groups; ++m) ds.group_names.push_back("g" + std::to_string(m));
    for (std::size_t i = 0; i < n; ++i) {
        Example ex;
        ex.features.dim = dim;
        for (std::size_t j = 0; j < dim; ++j)
            if (rng.bernoulli(0.4)) ex.features.entries.push_back({j, 1.0 + rng.uniform_below(2)});
        ex.labels.resize(tasks);
        // Mostly all-negative so overconditioned pools are never empty.
        for (auto& y : ex.labels) y = rng.bernoulli(0.25) ? 1 : 0;
        ex.groups.resize(groups);
        for (auto& g : ex.groups) g = rng.bernoulli(0.5) ? Membership::Member : Membership::NonMember;
        ds.examples.push_back(std::move(ex));
    }
    // Force at least one example in every pool.
    for (std::size_t m = 0; m < groups; ++m)
        for (int side = 0; side < 2; ++side) {
            Example ex;
            ex.features.dim = dim;
            ex.features.entries.push_back({m % dim, 1.0});
            ex.labels.assign(tasks, 0);
            ex.groups.assign(groups, Membership::Unknown);
            ex.groups[m] = side ? Membership::Member : Membership::NonMember;
            ds.examples.push_back(std::move(ex));
        }
    return ds;
}

TrainConfig desk_config(Strategy s, double lambda, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.stream.strategy = s;
    cfg.stream.main_batch = 4;
    cfg.stream.side_batch = 3;
    cfg.lambda = lambda;
    cfg.hidden = 4;
    cfg.dim = 8;
    cfg.seed = seed;
    cfg.epochs = 2;
    return cfg;
}

constexpr Strategy kAllStrategies[] = {Strategy::None, Strategy::Direct, Strategy::Baseline,
                                       Strategy::Overconditioned,
                                       Strategy::InterleavedOverconditioned};

}  // namespace

TEST_CASE("train: total steps = ceil(n / main_batch) * epochs") {
    SynthConfig synth;
    synth.n = 1000;
    synth.dim = 32;
    synth.num_tasks = 2;
    synth.num_groups = 1;
    const Dataset ds = synthesize(synth, 3);
    TrainConfig cfg;
    cfg.stream.strategy = Strategy::None;
    cfg.stream.main_batch = 128;
    cfg.epochs = 2;
    cfg.hidden = 4;
    cfg.dim = 32;
    const TrainResult res = train(ds, cfg);
    CHECK(res.total_steps == 16);
    CHECK(res.steps_per_sec > 0.0);
    CHECK(res.per_epoch_loss.size() == 2);
}

TEST_CASE("train: identical seeds give bitwise-identical parameters") {
    Rng rng(555);
    const Dataset ds = desk_dataset(rng, 2, 2, 60, 8);
    const TrainConfig cfg = desk_config(Strategy::InterleavedOverconditioned, 0.7, 13);
    const TrainResult a = train(ds, cfg);
    const TrainResult b = train(ds, cfg);
    CHECK(a.params.w1 == b.params.w1);
    CHECK(a.params.b1 == b.params.b1);
    CHECK(a.params.w2 == b.params.w2);
    CHECK(a.params.b2 == b.params.b2);
    CHECK(a.total_steps == b.total_steps);
}

TEST_CASE("train: lambda = 0 reproduces the None trajectory for every component strategy") {
    Rng rng(556);
    const Dataset ds = desk_dataset(rng, 2, 2, 60, 8);
    const TrainResult none = train(ds, desk_config(Strategy::None, 0.0, 21));
    for (Strategy s : {Strategy::Baseline, Strategy::Overconditioned,
                       Strategy::InterleavedOverconditioned}) {
        const TrainResult res = train(ds, desk_config(s, 0.0, 21));
        CHECK(res.params.w1 == none.params.w1);
        CHECK(res.params.b1 == none.params.b1);
        CHECK(res.params.w2 == none.params.w2);
        CHECK(res.params.b2 == none.params.b2);
    }
}

TEST_CASE("batch_loss: lambda = 0 is pure cross-entropy") {
    Rng rng(557);
    const Dataset ds = desk_dataset(rng, 2, 1, 40, 8);
    TrainConfig cfg = desk_config(Strategy::Baseline, 0.0, 5);
    StreamSet streams = build_streams(ds, cfg.stream, 3);
    Rng brng(1);
    const Batch batch = streams.next_batch(brng);

    Rng irng(9);
    const MlpParams params = init_mlp(cfg.dim, cfg.hidden, 2, irng);
    const BatchLossResult res = batch_loss(params, ds, batch, cfg);
    CHECK(res.reg == 0.0);
    CHECK(res.loss == res.ce);

    // Gradients equal those of the same main batch under strategy None.
    TrainConfig none_cfg = cfg;
    none_cfg.stream.strategy = Strategy::None;
    Batch main_only;
    main_only.main = batch.main;
    const BatchLossResult none_res = batch_loss(params, ds, main_only, none_cfg);
    CHECK(res.grads.w1 == none_res.grads.w1);
    CHECK(res.grads.b1 == none_res.grads.b1);
    CHECK(res.grads.w2 == none_res.grads.w2);
    CHECK(res.grads.b2 == none_res.grads.b2);
}

TEST_CASE("batch_loss: identical side sets contribute zero regularizer") {
    Rng rng(558);
    const Dataset ds = desk_dataset(rng, 2, 1, 40, 8);
    TrainConfig cfg = desk_config(Strategy::Overconditioned, 2.0, 5);

    Batch batch;
    for (std::uint32_t i = 0; i < 4; ++i) batch.main.push_back(i);
    SideBatch sb;
    sb.task = -1;
    sb.group = 0;
    sb.nonmember = {1, 2, 3};
    sb.member = {1, 2, 3};  // same examples on both sides
    batch.sides.push_back(sb);

    Rng irng(10);
    const MlpParams params = init_mlp(cfg.dim, cfg.hidden, 2, irng);
    const BatchLossResult res = batch_loss(params, ds, batch, cfg);
    CHECK(std::abs(res.reg) <= 1e-12);
}

TEST_CASE("batch_loss: empty side set is skipped and counted, not fatal") {
    Rng rng(559);
    const Dataset ds = desk_dataset(rng, 2, 1, 40, 8);
    TrainConfig cfg = desk_config(Strategy::Overconditioned, 1.0, 5);

    Batch batch;
    batch.main = {0, 1, 2, 3};
    SideBatch sb;
    sb.task = -1;
    sb.group = 0;
    sb.nonmember = {};
    sb.member = {1, 2};
    batch.sides.push_back(sb);

    Rng irng(11);
    const MlpParams params = init_mlp(cfg.dim, cfg.hidden, 2, irng);
    const BatchLossResult res = batch_loss(params, ds, batch, cfg);
    CHECK(res.reg == 0.0);
    CHECK(res.skipped_side_pairs == 2);  // one per head on the shared pair
}

TEST_CASE("batch_loss: tiny instance equals hand-assembled CE plus oracle MMD terms") {
    Rng rng(560);
    const Dataset ds = desk_dataset(rng, 2, 1, 30, 6);
    TrainConfig cfg;
    cfg.stream.strategy = Strategy::Overconditioned;
    cfg.stream.main_batch = 3;
    cfg.stream.side_batch = 2;
    cfg.lambda = 1.7;
    cfg.hidden = 3;
    cfg.dim = 6;
    cfg.kernel.bandwidth = 0.8;

    StreamSet streams = build_streams(ds, cfg.stream, 4);
    Rng brng(2);
    const Batch batch = streams.next_batch(brng);
    Rng irng(12);
    const MlpParams params = init_mlp(cfg.dim, cfg.hidden, 2, irng);

    const BatchLossResult res = batch_loss(params, ds, batch, cfg);

    double expect_ce = 0.0;
    for (auto idx : batch.main) {
        const auto cache = forward(params, ds.examples[idx].features);
        for (std::size_t k = 0; k < 2; ++k) {
            const double y = ds.examples[idx].labels[k];
            const double p = cache.probs[k];
            expect_ce -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    }
    expect_ce /= static_cast<double>(batch.main.size());

    double expect_reg = 0.0;
    for (const auto& sb : batch.sides) {
        for (std::size_t k = 0; k < 2; ++k) {
            std::vector<double> a, b;
            for (auto idx : sb.nonmember) a.push_back(forward(params, ds.examples[idx].features).probs[k]);
            for (auto idx : sb.member) b.push_back(forward(params, ds.examples[idx].features).probs[k]);
            expect_reg += oracles::naive_mmd_sq(a, b, cfg.kernel.bandwidth);
        }
    }
    expect_reg *= cfg.lambda;

    CHECK(res.ce == Catch::Approx(expect_ce).epsilon(0).margin(1e-12));
    CHECK(res.reg == Catch::Approx(expect_reg).epsilon(0).margin(1e-12));
    CHECK(res.loss == Catch::Approx(expect_ce + expect_reg).epsilon(0).margin(1e-12));
}

TEST_CASE("batch_loss gradients match finite differences for every strategy") {
    Rng seed_rng(4242);
    for (Strategy s : kAllStrategies) {
        for (double lambda : {0.0, 1.0}) {
            Rng rng(seed_rng.next_u64());
            const Dataset ds = desk_dataset(rng, 3, 2, 50, 8);
            TrainConfig cfg = desk_config(s, lambda, 0);
            cfg.kernel.bandwidth = 0.9;

            StreamSet streams = build_streams(ds, cfg.stream, rng.next_u64());
            Rng brng(rng.next_u64());
            const Batch batch = streams.next_batch(brng);
            Rng irng(rng.next_u64());
            const std::size_t heads = s == Strategy::Direct ? 1 : 3;
            const MlpParams params = init_mlp(cfg.dim, cfg.hidden, heads, irng);

            const BatchLossResult res = batch_loss(params, ds, batch, cfg);
            const auto analytic = oracles::gradient_entries(res.grads);
            const auto numeric = oracles::finite_difference(
                params, [&](const MlpParams& q) { return batch_loss(q, ds, batch, cfg).loss; });
            const auto check = oracles::compare_gradients(analytic, numeric);
            INFO("strategy " << strategy_name(s) << " lambda " << lambda << " worst "
                             << check.worst_index << " rel " << check.max_rel_err);
            CHECK(check.ok(1e-4));
        }
    }
}

TEST_CASE("train: lambda = 0 on separable synthetic data reaches high training accuracy") {
    SynthConfig synth;
    synth.num_tasks = 2;
    synth.num_groups = 1;
    synth.n = 3000;
    synth.dim = 256;
    synth.signal_tokens = 6;
    const Dataset ds = synthesize(synth, 21);

    TrainConfig cfg;
    cfg.stream.strategy = Strategy::None;
    cfg.epochs = 8;
    cfg.hidden = 16;
    cfg.dim = 256;
    cfg.seed = 2;
    const TrainResult res = train(ds, cfg);

    ThresholdSet half;
    half.per_task.assign(2, 0.5);
    const EvalReport report = evaluate(res.params, ds, half);
    CHECK(report.accuracy > 0.95);
}

TEST_CASE("train: aborts with step diagnostics when the loss blows up") {
    Rng rng(561);
    const Dataset ds = desk_dataset(rng, 2, 1, 40, 8);
    TrainConfig cfg = desk_config(Strategy::None, 0.0, 5);
    cfg.lr = 1e280;  // guarantees overflow within a few steps
    cfg.epochs = 3;
    CHECK_THROWS_AS(train(ds, cfg), TrainingError);
}

TEST_CASE("train: rejects bad configuration") {
    Rng rng(562);
    const Dataset ds = desk_dataset(rng, 2, 1, 20, 8);
    TrainConfig cfg = desk_config(Strategy::None, 0.0, 5);
    cfg.lr = 0.0;
    CHECK_THROWS_AS(train(ds, cfg), ConfigError);
    cfg.lr = 0.1;
    cfg.lambda = -0.5;
    CHECK_THROWS_AS(train(ds, cfg), ConfigError);
}

TEST_CASE("expected_regularizer_check: single group matches batch for batch") {
    Rng rng(563);
    const Dataset ds = desk_dataset(rng, 2, 1, 80, 8);
    TrainConfig cfg = desk_config(Strategy::InterleavedOverconditioned, 1.3, 17);
    const auto res = expected_regularizer_check(ds, cfg, 50);
    REQUIRE(res.interleaved_per_batch.size() == 50);
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(res.interleaved_per_batch[i] ==
              Catch::Approx(res.overconditioned_per_batch[i]).epsilon(0).margin(1e-12));
}

TEST_CASE("expected_regularizer_check: doubling lambda doubles both means") {
    Rng rng(564);
    const Dataset ds = desk_dataset(rng, 2, 2, 80, 8);
    TrainConfig cfg = desk_config(Strategy::InterleavedOverconditioned, 0.9, 18);
    const auto res1 = expected_regularizer_check(ds, cfg, 40);
    cfg.lambda = 1.8;
    const auto res2 = expected_regularizer_check(ds, cfg, 40);
    CHECK(res2.interleaved_mean == Catch::Approx(2.0 * res1.interleaved_mean).epsilon(1e-12));
    CHECK(res2.overconditioned_mean == Catch::Approx(2.0 * res1.overconditioned_mean).epsilon(1e-12));
}

TEST_CASE("expected_regularizer_check: interleaved matches overconditioned in expectation") {
    Rng rng(565);
    const Dataset ds = desk_dataset(rng, 2, 3, 150, 8);
    TrainConfig cfg = desk_config(Strategy::InterleavedOverconditioned, 1.0, 19);
    const auto res = expected_regularizer_check(ds, cfg, 4000);
    REQUIRE(res.interleaved_stderr > 0.0);
    CHECK(std::abs(res.interleaved_mean - res.overconditioned_mean) <= 3.0 * res.interleaved_stderr);
}

TEST_CASE("expected_regularizer_check: unbiased under a non-uniform group distribution") {
    Rng rng(567);
    const Dataset ds = desk_dataset(rng, 2, 3, 150, 8);
    TrainConfig cfg = desk_config(Strategy::InterleavedOverconditioned, 1.0, 23);
    cfg.stream.group_weights = {5.0, 3.0, 2.0};
    const auto res = expected_regularizer_check(ds, cfg, 6000);
    CHECK(std::abs(res.interleaved_mean - res.overconditioned_mean) <= 3.0 * res.interleaved_stderr);
}

TEST_CASE("expected_regularizer_check: requires the interleaved strategy") {
    Rng rng(566);
    const Dataset ds = desk_dataset(rng, 2, 1, 40, 8);
    TrainConfig cfg = desk_config(Strategy::Baseline, 1.0, 20);
    CHECK_THROWS_AS(expected_regularizer_check(ds, cfg, 10), ConfigError);
}
