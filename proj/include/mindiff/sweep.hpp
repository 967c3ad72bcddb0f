// Experiment harness: lambda sweeps with multi-run confidence intervals,
// the throughput scaling benchmark, and report emission.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mindiff/csv.hpp"
#include "mindiff/dataset.hpp"
#include "mindiff/errors.hpp"
#include "mindiff/metrics.hpp"
#include "mindiff/rng.hpp"
#include "mindiff/streams.hpp"
#include "mindiff/synth.hpp"
#include "mindiff/training.hpp"

namespace mindiff {

struct DataConfig {
    enum class Source { Synthetic, Csv };
    Source source = Source::Synthetic;
    std::string csv_path;
    CsvSchema schema;
    SynthConfig synth;
};

struct SweepConfig {
    DataConfig data;
    std::vector<Strategy> strategies{Strategy::None};
    std::vector<double> lambdas{0.0, 0.1, 0.3, 1.0, 3.0, 10.0};
    std::size_t runs_per_point = 5;
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;
    std::uint64_t base_seed = 0;
    TrainConfig train;  // template; strategy/lambda/seed filled per cell
    double target_fpr = 0.05;
};

struct RunRow {
    Strategy strategy = Strategy::None;
    double lambda = 0.0;
    std::size_t run_index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string fail_reason;
    double steps_per_sec = 0.0;
    EvalReport eval;
};

struct SweepReport {
    std::vector<std::string> group_names;
    std::vector<std::string> task_names;
    std::vector<RunRow> rows;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += "\"\"";
        else q.push_back(c);
    }
    q.push_back('"');
    return q;
}

}  // namespace detail

// Documented, reproducible per-run seed: base seed plus a stable hash of the
// cell coordinates.
inline std::uint64_t run_seed(std::uint64_t base_seed, Strategy strategy, double lambda,
                              std::size_t run_index) {
    std::string key = strategy_name(strategy);
    key += '|';
    key += detail::format_double(lambda);
    key += '|';
    key += std::to_string(run_index);
    return base_seed + fnv1a64(key);
}

inline Dataset make_dataset(const DataConfig& data, std::uint64_t base_seed) {
    if (data.source == DataConfig::Source::Csv) return load_csv(data.csv_path, data.schema);
    return synthesize(data.synth, derive_seed(base_seed, "data"));
}

struct SplitDataset {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Deterministic split by seeded shuffle; the split is a property of the
// sweep, not of the individual run.
inline SplitDataset split_dataset(const Dataset& ds, double train_frac, double val_frac,
                                  double test_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0))
        throw ConfigError("split: all fractions must be positive");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("split: fractions must sum to 1");

    const std::size_t n = ds.size();
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ConfigError("split: dataset too small for the requested fractions");

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset part;
        part.num_tasks = ds.num_tasks;
        part.num_groups = ds.num_groups;
        part.task_names = ds.task_names;
        part.group_names = ds.group_names;
        part.examples.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) part.examples.push_back(ds.examples[order[i]]);
        return part;
    };
    SplitDataset out;
    out.train = take(0, n_train);
    out.validation = take(n_train, n_train + n_val);
    out.test = take(n_train + n_val, n);
    return out;
}

// Trains, calibrates on validation, evaluates on test for every
// (strategy, lambda, run) cell. Failures are recorded per row and the sweep
// continues.
inline SweepReport run_sweep(const SweepConfig& cfg) {
    if (cfg.runs_per_point == 0) throw ConfigError("sweep: runs_per_point must be positive");
    if (cfg.strategies.empty()) throw ConfigError("sweep: no strategies given");
    if (cfg.lambdas.empty()) throw ConfigError("sweep: no lambdas given");
    for (double l : cfg.lambdas)
        if (l < 0.0) throw ConfigError("sweep: lambdas must be non-negative");

    const Dataset full = make_dataset(cfg.data, cfg.base_seed);
    const SplitDataset split =
        split_dataset(full, cfg.train_frac, cfg.val_frac, cfg.test_frac, cfg.base_seed);

    SweepReport report;
    report.group_names = full.group_names;
    report.task_names = full.task_names;

    for (Strategy strategy : cfg.strategies)
        for (double lambda : cfg.lambdas)
            for (std::size_t run = 0; run < cfg.runs_per_point; ++run) {
                RunRow row;
                row.strategy = strategy;
                row.lambda = lambda;
                row.run_index = run;
                row.seed = run_seed(cfg.base_seed, strategy, lambda, run);
                try {
                    TrainConfig tc = cfg.train;
                    tc.stream.strategy = strategy;
                    tc.lambda = lambda;
                    tc.seed = row.seed;
                    const TrainResult trained = train(split.train, tc);
                    const ThresholdSet thresholds =
                        calibrate_thresholds(trained.params, split.validation, cfg.target_fpr);
                    row.eval = evaluate(trained.params, split.test, thresholds);
                    row.steps_per_sec = trained.steps_per_sec;
                    row.ok = true;
                } catch (const std::exception& e) {
                    row.ok = false;
                    row.fail_reason = e.what();
                }
                report.rows.push_back(std::move(row));
            }
    return report;
}

// ---- flattening & aggregation ----

inline std::vector<std::string> metric_names(const SweepReport& report) {
    std::vector<std::string> names{"steps_per_sec", "accuracy", "system_roc_auc"};
    for (const auto& g : report.group_names) {
        names.push_back("fpr_member_" + g);
        names.push_back("fpr_nonmember_" + g);
        names.push_back("d_eo_" + g);
        names.push_back("r_eo_" + g);
    }
    for (const auto& t : report.task_names) names.push_back("aucpr_" + t);
    names.push_back("aucpr_overall");
    return names;
}

inline std::vector<std::optional<double>> metric_values(const SweepReport& report, const RunRow& row) {
    std::vector<std::optional<double>> vals;
    if (!row.ok) {
        vals.assign(metric_names(report).size(), std::nullopt);
        return vals;
    }
    vals.push_back(row.steps_per_sec);
    vals.push_back(row.eval.accuracy);
    vals.push_back(row.eval.system_roc_auc);
    for (std::size_t m = 0; m < report.group_names.size(); ++m) {
        const GroupFairness& gf = row.eval.groups[m];
        vals.push_back(gf.fpr_member);
        vals.push_back(gf.fpr_nonmember);
        vals.push_back(gf.d_eo);
        vals.push_back(gf.r_eo);
    }
    // Component strategies fill per-task AUCPR; the single-head direct model
    // fills only the overall column.
    const bool direct = row.strategy == Strategy::Direct;
    for (std::size_t t = 0; t < report.task_names.size(); ++t) {
        std::optional<double> v;
        if (!direct && t < row.eval.task_aucpr.size()) v = row.eval.task_aucpr[t];
        vals.push_back(v);
    }
    std::optional<double> overall_aucpr;
    if (direct && !row.eval.task_aucpr.empty()) overall_aucpr = row.eval.task_aucpr[0];
    vals.push_back(overall_aucpr);
    return vals;
}

struct AggregateCell {
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> ci_half;  // 95% Student-t half-width, needs n >= 2
};

struct AggregateRow {
    Strategy strategy = Strategy::None;
    double lambda = 0.0;
    std::size_t runs_ok = 0;
    std::size_t runs_failed = 0;
    std::vector<AggregateCell> cells;
};

inline double t_quantile_975(std::size_t df) {
    boost::math::students_t_distribution<double> dist(static_cast<double>(df));
    return boost::math::quantile(dist, 0.975);
}

inline std::vector<AggregateRow> aggregate(const SweepReport& report) {
    const std::size_t n_metrics = metric_names(report).size();
    std::map<std::pair<int, double>, AggregateRow> cells;
    std::map<std::pair<int, double>, std::vector<std::vector<double>>> samples;

    for (const RunRow& row : report.rows) {
        const auto key = std::make_pair(static_cast<int>(row.strategy), row.lambda);
        auto& agg = cells[key];
        agg.strategy = row.strategy;
        agg.lambda = row.lambda;
        auto& s = samples[key];
        if (s.empty()) s.resize(n_metrics);
        if (!row.ok) {
            ++agg.runs_failed;
            continue;
        }
        ++agg.runs_ok;
        const auto vals = metric_values(report, row);
        for (std::size_t i = 0; i < n_metrics; ++i)
            if (vals[i]) s[i].push_back(*vals[i]);
    }

    std::vector<AggregateRow> out;
    for (auto& [key, agg] : cells) {
        agg.cells.resize(n_metrics);
        const auto& s = samples[key];
        for (std::size_t i = 0; i < n_metrics; ++i) {
            AggregateCell& c = agg.cells[i];
            c.n = s[i].size();
            if (c.n == 0) continue;
            double sum = 0.0;
            for (double v : s[i]) sum += v;
            const double mean = sum / static_cast<double>(c.n);
            c.mean = mean;
            if (c.n >= 2) {
                double ss = 0.0;
                for (double v : s[i]) ss += (v - mean) * (v - mean);
                const double sd = std::sqrt(ss / static_cast<double>(c.n - 1));
                c.ci_half = t_quantile_975(c.n - 1) * sd / std::sqrt(static_cast<double>(c.n));
            }
        }
        out.push_back(std::move(agg));
    }
    return out;
}

// ---- report emission ----

namespace detail {

// Writes files to temp paths and renames on commit; uncommitted temps are
// removed so a failed emit leaves nothing behind.
class AtomicFileSet {
public:
    std::ofstream& create(const std::string& final_path) {
        const std::string tmp = final_path + ".tmp";
        auto& entry = files_.emplace_back(Entry{tmp, final_path, std::ofstream(tmp, std::ios::binary)});
        if (!entry.stream) throw ConfigError("emit_report: cannot open " + tmp + " for writing");
        return entry.stream;
    }

    void commit() {
        for (auto& e : files_) {
            e.stream.flush();
            if (!e.stream) throw ConfigError("emit_report: write failed for " + e.tmp);
            e.stream.close();
        }
        for (auto& e : files_) {
            std::error_code ec;
            std::filesystem::rename(e.tmp, e.final_path, ec);
            if (ec) throw ConfigError("emit_report: cannot rename " + e.tmp + ": " + ec.message());
            e.committed = true;
        }
    }

    ~AtomicFileSet() {
        for (auto& e : files_) {
            if (!e.committed) {
                e.stream.close();
                std::error_code ec;
                std::filesystem::remove(e.tmp, ec);
            }
        }
    }

private:
    struct Entry {
        std::string tmp;
        std::string final_path;
        std::ofstream stream;
        bool committed = false;
    };
    std::vector<Entry> files_;
};

inline std::string opt_to_csv(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

}  // namespace detail

// Writes <prefix>_runs.csv, <prefix>_aggregates.csv and <prefix>_pareto.txt.
// All three appear atomically or not at all.
inline void emit_report(const SweepReport& report, const std::string& out_prefix) {
    detail::AtomicFileSet files;
    const auto names = metric_names(report);
    const auto aggregates = aggregate(report);

    auto& runs = files.create(out_prefix + "_runs.csv");
    runs << "strategy,lambda,run_index,seed,status,fail_reason";
    for (const auto& n : names) runs << ',' << n;
    runs << '\n';
    for (const RunRow& row : report.rows) {
        runs << strategy_name(row.strategy) << ',' << detail::format_double(row.lambda) << ','
             << row.run_index << ',' << row.seed << ',' << (row.ok ? "ok" : "failed") << ','
             << detail::csv_quote(row.fail_reason);
        for (const auto& v : metric_values(report, row)) runs << ',' << detail::opt_to_csv(v);
        runs << '\n';
    }

    auto& aggs = files.create(out_prefix + "_aggregates.csv");
    aggs << "strategy,lambda,runs_ok,runs_failed";
    for (const auto& n : names) aggs << ',' << n << "_mean," << n << "_ci95," << n << "_n";
    aggs << '\n';
    for (const AggregateRow& row : aggregates) {
        aggs << strategy_name(row.strategy) << ',' << detail::format_double(row.lambda) << ','
             << row.runs_ok << ',' << row.runs_failed;
        for (const AggregateCell& c : row.cells)
            aggs << ',' << detail::opt_to_csv(c.mean) << ',' << detail::opt_to_csv(c.ci_half) << ','
                 << c.n;
        aggs << '\n';
    }

    // Pareto summary: per (group, strategy), fairness gap vs system AUC as
    // lambda grows. Plain text, plottable externally.
    auto& pareto = files.create(out_prefix + "_pareto.txt");
    const std::size_t auc_idx = 2;
    for (std::size_t m = 0; m < report.group_names.size(); ++m) {
        const std::size_t deo_idx = 3 + m * 4 + 2;
        pareto << "# group " << report.group_names[m] << "\n";
        for (Strategy s : {Strategy::None, Strategy::Direct, Strategy::Baseline,
                           Strategy::Overconditioned, Strategy::InterleavedOverconditioned}) {
            std::vector<const AggregateRow*> rows;
            for (const auto& row : aggregates)
                if (row.strategy == s) rows.push_back(&row);
            if (rows.empty()) continue;
            std::sort(rows.begin(), rows.end(),
                      [](const AggregateRow* a, const AggregateRow* b) { return a->lambda < b->lambda; });
            pareto << "strategy " << strategy_name(s) << "\n";
            for (const AggregateRow* row : rows) {
                pareto << "  lambda=" << detail::format_double(row->lambda);
                pareto << " mean_d_eo=" << detail::opt_to_csv(row->cells[deo_idx].mean);
                pareto << " mean_system_auc=" << detail::opt_to_csv(row->cells[auc_idx].mean) << "\n";
            }
        }
        pareto << "\n";
    }

    files.commit();
}

// ---- throughput scaling benchmark ----

struct BenchConfig {
    std::vector<std::size_t> task_counts{2, 3, 4};
    std::vector<std::size_t> group_counts{2, 3, 4};
    std::vector<Strategy> strategies{Strategy::None, Strategy::Baseline, Strategy::Overconditioned,
                                     Strategy::InterleavedOverconditioned};
    std::size_t n = 4096;
    std::size_t steps = 150;      // per timed run
    std::size_t timed_runs = 5;
    TrainConfig train;            // template; lambda should be > 0
    std::uint64_t seed = 0;
};

struct BenchRow {
    Strategy strategy = Strategy::None;
    std::size_t tasks = 0;
    std::size_t groups = 0;
    std::size_t side_examples = 0;
    double median_steps_per_sec = 0.0;
    double min_steps_per_sec = 0.0;
    double max_steps_per_sec = 0.0;
};

inline std::vector<BenchRow> run_scaling_bench(const BenchConfig& cfg) {
    if (cfg.timed_runs == 0) throw ConfigError("bench: timed_runs must be positive");
    std::vector<BenchRow> rows;
    for (std::size_t T : cfg.task_counts)
        for (std::size_t G : cfg.group_counts) {
            SynthConfig synth;
            synth.num_tasks = T;
            synth.num_groups = G;
            synth.n = cfg.n;
            synth.dim = cfg.train.dim;
            const Dataset ds = synthesize(synth, derive_seed(cfg.seed, "bench.data", T * 100 + G));

            for (Strategy s : cfg.strategies) {
                TrainConfig tc = cfg.train;
                tc.stream.strategy = s;
                const std::size_t steps_per_epoch =
                    (ds.size() + tc.stream.main_batch - 1) / tc.stream.main_batch;
                tc.epochs = std::max<std::size_t>(1, (cfg.steps + steps_per_epoch - 1) / steps_per_epoch);

                std::vector<double> speeds;
                for (std::size_t r = 0; r < cfg.timed_runs; ++r) {
                    tc.seed = derive_seed(cfg.seed, "bench.run", (T * 100 + G) * 16 + r);
                    speeds.push_back(train(ds, tc).steps_per_sec);
                }
                std::sort(speeds.begin(), speeds.end());
                BenchRow row;
                row.strategy = s;
                row.tasks = T;
                row.groups = G;
                row.side_examples = side_examples_per_batch(tc.stream, T, G);
                row.median_steps_per_sec = speeds[speeds.size() / 2];
                row.min_steps_per_sec = speeds.front();
                row.max_steps_per_sec = speeds.back();
                rows.push_back(row);
            }
        }
    return rows;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    detail::AtomicFileSet files;
    auto& out = files.create(path);
    out << "strategy,tasks,groups,side_examples_per_batch,median_steps_per_sec,min_steps_per_sec,"
           "max_steps_per_sec\n";
    for (const auto& r : rows)
        out << strategy_name(r.strategy) << ',' << r.tasks << ',' << r.groups << ','
            << r.side_examples << ',' << detail::format_double(r.median_steps_per_sec) << ','
            << detail::format_double(r.min_steps_per_sec) << ','
            << detail::format_double(r.max_steps_per_sec) << '\n';
    files.commit();
}

}  // namespace mindiff
