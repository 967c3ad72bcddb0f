// Experiment harness CLI.
//
//   mindiff sweep  --config cfg.ini [--seed N] [--out PREFIX]
//   mindiff bench  --config cfg.ini [--seed N] [--out PATH]
//   mindiff verify [--tables N] [--tmax T] [--eps E] [--seed N]
//   mindiff synth  --config cfg.ini --out data.csv [--seed N]
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 verification
// assertion failure.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mindiff/mindiff.hpp"

using namespace mindiff;

namespace {

const std::map<std::string, std::vector<std::string>> kKnownKeys{
    {"data", {"source", "csv", "text_column", "label_columns", "group_columns"}},
    {"synth",
     {"tasks", "groups", "n", "prevalence", "positive_rate", "bias", "noise_tokens", "signal_tokens",
      "group_tokens", "leak_tokens", "noise_vocab", "signal_vocab", "group_vocab"}},
    {"train",
     {"epochs", "lr", "hidden", "dim", "main_batch", "side_batch", "bandwidth",
      "interleave_rescale", "group_weights"}},
    {"sweep",
     {"strategies", "lambdas", "runs_per_point", "train_frac", "val_frac", "test_frac", "target_fpr",
      "seed", "out"}},
    {"bench", {"tasks", "groups", "strategies", "n", "steps", "timed_runs", "lambda", "seed", "out"}},
    {"verify", {"tables", "tmax", "eps", "seed"}}};

std::vector<Strategy> parse_strategies(const std::vector<std::string>& names) {
    std::vector<Strategy> out;
    for (const auto& name : names) {
        const auto s = parse_strategy(name);
        if (!s)
            throw ConfigError("unknown strategy '" + name +
                              "' (expected none|direct|baseline|overconditioned|interleaved)");
        out.push_back(*s);
    }
    return out;
}

std::vector<std::size_t> parse_size_list(const IniConfig& ini, const std::string& section,
                                         const std::string& key,
                                         const std::vector<std::size_t>& fallback) {
    const auto values = ini.get_double_list(section, key);
    if (values.empty()) return fallback;
    std::vector<std::size_t> out;
    for (double v : values) {
        if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigError("config: [" + section + "] " + key + " entries must be positive integers");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

SynthConfig read_synth(const IniConfig& ini, std::size_t dim) {
    SynthConfig synth;
    synth.num_tasks = ini.get_size("synth", "tasks", synth.num_tasks);
    synth.num_groups = ini.get_size("synth", "groups", synth.num_groups);
    synth.n = ini.get_size("synth", "n", synth.n);
    synth.dim = dim;

    auto spread = [&](const std::string& key, std::size_t want) {
        auto values = ini.get_double_list("synth", key);
        if (values.size() == 1) values.assign(want, values[0]);
        return values;
    };
    synth.group_prevalence = spread("prevalence", synth.num_groups);
    synth.task_positive_rate = spread("positive_rate", synth.num_tasks);

    // bias entries are task:group:strength triplets
    const auto bias_items = ini.get_string_list("synth", "bias");
    if (!bias_items.empty()) {
        synth.bias.assign(synth.num_tasks * synth.num_groups, 0.0);
        for (const auto& item : bias_items) {
            const auto c1 = item.find(':');
            const auto c2 = item.find(':', c1 == std::string::npos ? item.size() : c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw ConfigError("config: [synth] bias entries must be task:group:strength");
            try {
                const std::size_t t = std::stoul(item.substr(0, c1));
                const std::size_t m = std::stoul(item.substr(c1 + 1, c2 - c1 - 1));
                const double v = std::stod(item.substr(c2 + 1));
                if (t >= synth.num_tasks || m >= synth.num_groups)
                    throw ConfigError("config: [synth] bias index out of range in '" + item + "'");
                synth.bias[t * synth.num_groups + m] = v;
            } catch (const ConfigError&) {
                throw;
            } catch (const std::exception&) {
                throw ConfigError("config: [synth] cannot parse bias entry '" + item + "'");
            }
        }
    }

    synth.noise_tokens = ini.get_size("synth", "noise_tokens", synth.noise_tokens);
    synth.signal_tokens = ini.get_size("synth", "signal_tokens", synth.signal_tokens);
    synth.group_tokens = ini.get_size("synth", "group_tokens", synth.group_tokens);
    synth.leak_tokens = ini.get_size("synth", "leak_tokens", synth.leak_tokens);
    synth.noise_vocab = ini.get_size("synth", "noise_vocab", synth.noise_vocab);
    synth.signal_vocab = ini.get_size("synth", "signal_vocab", synth.signal_vocab);
    synth.group_vocab = ini.get_size("synth", "group_vocab", synth.group_vocab);
    return synth;
}

TrainConfig read_train(const IniConfig& ini) {
    TrainConfig train;
    train.epochs = ini.get_size("train", "epochs", train.epochs);
    train.lr = ini.get_double("train", "lr", train.lr);
    train.hidden = ini.get_size("train", "hidden", train.hidden);
    train.dim = ini.get_size("train", "dim", train.dim);
    train.stream.main_batch = ini.get_size("train", "main_batch", train.stream.main_batch);
    train.stream.side_batch = ini.get_size("train", "side_batch", train.stream.side_batch);
    train.kernel.bandwidth = ini.get_double("train", "bandwidth", train.kernel.bandwidth);
    train.interleave_rescale = ini.get_bool("train", "interleave_rescale", train.interleave_rescale);
    train.stream.group_weights = ini.get_double_list("train", "group_weights");
    if (train.stream.main_batch == 0 || train.stream.side_batch == 0)
        throw ConfigError("config: [train] batch sizes must be >= 1");
    if (!(train.kernel.bandwidth > 0.0)) throw ConfigError("config: [train] bandwidth must be > 0");
    return train;
}

DataConfig read_data(const IniConfig& ini, std::size_t dim) {
    DataConfig data;
    const std::string source = ini.get_string("data", "source", "synthetic");
    if (source == "synthetic") {
        data.source = DataConfig::Source::Synthetic;
    } else if (source == "csv") {
        data.source = DataConfig::Source::Csv;
        data.csv_path = ini.require_string("data", "csv");
        data.schema.text_column = ini.require_string("data", "text_column");
        data.schema.label_columns = ini.get_string_list("data", "label_columns");
        data.schema.group_columns = ini.get_string_list("data", "group_columns");
        data.schema.dim = dim;
        if (data.schema.label_columns.empty())
            throw ConfigError("config: [data] label_columns must name at least one column");
        if (data.schema.group_columns.empty())
            throw ConfigError("config: [data] group_columns must name at least one column");
    } else {
        throw ConfigError("config: [data] source must be 'synthetic' or 'csv'");
    }
    data.synth = read_synth(ini, dim);
    return data;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out) {
    const IniConfig ini = IniConfig::parse_file(config_path);
    ini.check_known_keys(kKnownKeys);

    SweepConfig cfg;
    cfg.train = read_train(ini);
    cfg.data = read_data(ini, cfg.train.dim);
    if (ini.has("sweep", "strategies"))
        cfg.strategies = parse_strategies(ini.get_string_list("sweep", "strategies"));
    if (ini.has("sweep", "lambdas")) cfg.lambdas = ini.get_double_list("sweep", "lambdas");
    cfg.runs_per_point = ini.get_size("sweep", "runs_per_point", cfg.runs_per_point);
    cfg.train_frac = ini.get_double("sweep", "train_frac", cfg.train_frac);
    cfg.val_frac = ini.get_double("sweep", "val_frac", cfg.val_frac);
    cfg.test_frac = ini.get_double("sweep", "test_frac", cfg.test_frac);
    cfg.target_fpr = ini.get_double("sweep", "target_fpr", cfg.target_fpr);
    cfg.base_seed = seed ? *seed : ini.get_u64("sweep", "seed", 0);
    const std::string out_prefix = out ? *out : ini.get_string("sweep", "out", "sweep");

    const SweepReport report = run_sweep(cfg);
    emit_report(report, out_prefix);

    std::size_t failed = 0;
    for (const auto& row : report.rows) failed += row.ok ? 0 : 1;
    std::cout << "sweep: " << report.rows.size() << " runs (" << failed << " failed) -> "
              << out_prefix << "_runs.csv, _aggregates.csv, _pareto.txt\n";
    for (const auto& row : report.rows)
        if (!row.ok)
            std::cout << "  failed: " << strategy_name(row.strategy) << " lambda=" << row.lambda
                      << " run=" << row.run_index << ": " << row.fail_reason << "\n";
    return failed == 0 ? 0 : 2;
}

int cmd_bench(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out) {
    const IniConfig ini = IniConfig::parse_file(config_path);
    ini.check_known_keys(kKnownKeys);

    BenchConfig cfg;
    cfg.train = read_train(ini);
    cfg.task_counts = parse_size_list(ini, "bench", "tasks", cfg.task_counts);
    cfg.group_counts = parse_size_list(ini, "bench", "groups", cfg.group_counts);
    if (ini.has("bench", "strategies"))
        cfg.strategies = parse_strategies(ini.get_string_list("bench", "strategies"));
    cfg.n = ini.get_size("bench", "n", cfg.n);
    cfg.steps = ini.get_size("bench", "steps", cfg.steps);
    cfg.timed_runs = ini.get_size("bench", "timed_runs", cfg.timed_runs);
    cfg.train.lambda = ini.get_double("bench", "lambda", 1.0);
    cfg.seed = seed ? *seed : ini.get_u64("bench", "seed", 0);
    const std::string out_path = out ? *out : ini.get_string("bench", "out", "bench.csv");

    const auto rows = run_scaling_bench(cfg);
    write_bench_csv(rows, out_path);
    std::cout << "strategy,tasks,groups,side_examples_per_batch,median_steps_per_sec\n";
    for (const auto& r : rows)
        std::cout << strategy_name(r.strategy) << ',' << r.tasks << ',' << r.groups << ','
                  << r.side_examples << ',' << r.median_steps_per_sec << "\n";
    std::cout << "bench: wrote " << rows.size() << " rows to " << out_path << "\n";
    return 0;
}

int cmd_verify(std::size_t tables, std::size_t tmax, double eps, std::uint64_t seed) {
    const Lemma1Report report = lemma1_property_sweep(tables, tmax, eps, seed);
    std::cout << report.summary();
    return report.passed() ? 0 : 3;
}

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out) {
    const IniConfig ini = IniConfig::parse_file(config_path);
    ini.check_known_keys(kKnownKeys);
    const std::size_t dim = ini.get_size("train", "dim", 1000);
    const SynthConfig synth = read_synth(ini, dim);
    const std::uint64_t use_seed = seed ? *seed : ini.get_u64("sweep", "seed", 0);
    const Dataset ds = synthesize(synth, use_seed);
    write_csv(ds, out);
    std::cout << "synth: wrote " << ds.size() << " examples (" << ds.num_tasks << " tasks, "
              << ds.num_groups << " groups) to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training engine and experiment harness for multi-group multi-label remediation"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::uint64_t seed_value = 0;
    bool seed_set = false, out_set = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* copt = sub->add_option("--config", config_path, "INI config file");
        if (config_required) copt->required();
        sub->add_option("--seed", seed_value, "override the base seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out_path, "override the output path/prefix")
            ->each([&](const std::string&) { out_set = true; });
    };

    auto* sweep = app.add_subcommand("sweep", "lambda sweep with per-run and aggregate reports");
    add_common(sweep, true);
    auto* bench = app.add_subcommand("bench", "throughput scaling benchmark over (T, G) grids");
    add_common(bench, true);
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset to CSV");
    add_common(synth, true);

    auto* verify = app.add_subcommand("verify", "fairness-implication property sweep");
    std::size_t tables = 1000, tmax = 4;
    double eps = 1e-6;
    std::uint64_t vseed = 0;
    verify->add_option("--tables", tables, "number of random tables");
    verify->add_option("--tmax", tmax, "maximum task count");
    verify->add_option("--eps", eps, "per-task equal-opportunity tolerance");
    verify->add_option("--seed", vseed, "sweep seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const auto seed_opt = seed_set ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    const auto out_opt = out_set ? std::optional<std::string>(out_path) : std::nullopt;

    try {
        if (sweep->parsed()) return cmd_sweep(config_path, seed_opt, out_opt);
        if (bench->parsed()) return cmd_bench(config_path, seed_opt, out_opt);
        if (verify->parsed()) return cmd_verify(tables, tmax, eps, vseed);
        if (synth->parsed()) {
            if (!out_set) throw ConfigError("synth: --out is required");
            return cmd_synth(config_path, seed_opt, out_path);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
