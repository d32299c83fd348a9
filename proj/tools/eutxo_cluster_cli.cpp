// eutxo-cluster: entity clustering for EUTXO-chain payment addresses.
//
// Subcommand pipeline, one stage per invocation:
//   simulate -> transactions JSONL + ground-truth CSV
//   cluster  -> assignments CSV + summary JSON
//   stats    -> summary JSON + size histogram CSV from an assignments CSV
//   fit      -> discrete power-law fit JSON
//   series   -> daily new/active CSV
//   evaluate -> precision/recall JSON against ground truth
//
// Exit codes: 0 success, 1 input error, 2 internal failure. Exactly one
// summary line goes to stderr; data goes to files or stdout.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eutxo_cluster/analytics.hpp"
#include "eutxo_cluster/clustering.hpp"
#include "eutxo_cluster/errors.hpp"
#include "eutxo_cluster/ingestion.hpp"
#include "eutxo_cluster/simulator.hpp"
#include "eutxo_cluster/union_find.hpp"

namespace {

using namespace eutxo_cluster;

unsigned thread_cap() {
    const char* env = std::getenv("EUTXO_CLUSTER_THREADS");
    unsigned n = 0;
    if (env && *env) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0')
            throw UsageError("EUTXO_CLUSTER_THREADS must be a non-negative integer");
        n = static_cast<unsigned>(v);
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

HeuristicSet parse_heuristics(const std::string& list) {
    HeuristicSet set{false, false};
    std::stringstream ss(list);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token == "h1")
            set.h1 = true;
        else if (token == "h2")
            set.h2 = true;
        else
            throw UsageError("unknown heuristic '" + token + "' (expected h1 and/or h2)");
    }
    if (!set.h1 && !set.h2) throw UsageError("at least one heuristic is required");
    return set;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open input file '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot open output file '" + path + "'");
    return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoFailure("write failure on '" + path + "'");
}

void emit_json(const nlohmann::json& j, const std::optional<std::string>& path) {
    if (path) {
        auto out = open_output(*path);
        out << j.dump(2) << '\n';
        finish_output(out, *path);
    } else {
        std::cout << j.dump(2) << '\n';
    }
}

std::string heuristics_name(HeuristicSet set) {
    if (set.h1 && set.h2) return "h1+h2";
    return set.h1 ? "h1" : "h2";
}

// --- cluster ---

struct ClusterArgs {
    std::string input;
    std::string heuristics = "h1,h2";
    std::optional<std::string> out_clusters;
    std::optional<std::string> out_summary;
    std::optional<std::string> out_histogram;
    bool strict = false;
    std::uint64_t large_threshold = 1000;
    std::uint64_t super_threshold = 200000;
};

int run_cluster(const ClusterArgs& args) {
    const HeuristicSet set = parse_heuristics(args.heuristics);
    const SummaryThresholds thresholds{args.large_threshold, args.super_threshold};
    thresholds.validate();

    const auto start = std::chrono::steady_clock::now();
    auto in = open_input(args.input);
    InternTable table;
    TransactionReader reader(in, table, args.strict);
    ClusterResult result =
        cluster_stream([&]() { return reader.next(); }, table, set);
    const IngestStats stats = reader.stats();

    if (args.out_clusters) {
        auto out = open_output(*args.out_clusters);
        write_assignments_csv(out, table, result.forest);
        finish_output(out, *args.out_clusters);
    }

    const ClusterSummary summary = summarize(result.forest, thresholds);
    emit_json(summary_to_json(summary), args.out_summary);

    if (args.out_histogram) {
        auto out = open_output(*args.out_histogram);
        write_histogram_csv(out, size_histogram(result.forest, thread_cap()));
        finish_output(out, *args.out_histogram);
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char medium[32] = "n/a";
    if (summary.medium_avg_size)
        std::snprintf(medium, sizeof medium, "%.2f", *summary.medium_avg_size);
    std::fprintf(stderr,
                 "cluster: %llu txs (%llu skipped, %llu out-of-order slots), %llu addresses, "
                 "%llu clusters (%s), medium avg %s in %.1f s\n",
                 static_cast<unsigned long long>(stats.tx_count),
                 static_cast<unsigned long long>(stats.skipped_lines),
                 static_cast<unsigned long long>(stats.out_of_order_slots),
                 static_cast<unsigned long long>(stats.distinct_payment_addresses),
                 static_cast<unsigned long long>(summary.total_clusters),
                 heuristics_name(set).c_str(), medium, elapsed);
    return 0;
}

// --- stats ---

SizeHistogram histogram_from_assignments(const std::string& path) {
    auto in = open_input(path);
    const AssignmentTable assignments = load_assignments_csv(in);
    std::unordered_map<std::uint64_t, std::uint64_t> sizes;
    sizes.reserve(assignments.cluster_of.size());
    for (std::uint64_t cluster : assignments.cluster_of) ++sizes[cluster];
    SizeHistogram hist;
    for (const auto& [cluster, size] : sizes) ++hist[size];
    return hist;
}

struct StatsArgs {
    std::string clusters;
    std::optional<std::string> out_summary;
    std::optional<std::string> out_histogram;
    std::uint64_t large_threshold = 1000;
    std::uint64_t super_threshold = 200000;
};

int run_stats(const StatsArgs& args) {
    const SummaryThresholds thresholds{args.large_threshold, args.super_threshold};
    thresholds.validate();
    const SizeHistogram hist = histogram_from_assignments(args.clusters);
    const ClusterSummary summary = summarize_sizes(hist, thresholds);
    emit_json(summary_to_json(summary), args.out_summary);
    if (args.out_histogram) {
        auto out = open_output(*args.out_histogram);
        write_histogram_csv(out, hist);
        finish_output(out, *args.out_histogram);
    }
    std::uint64_t addresses = 0;
    for (const auto& [size, count] : hist) addresses += size * count;
    char medium[32] = "n/a";
    if (summary.medium_avg_size)
        std::snprintf(medium, sizeof medium, "%.2f", *summary.medium_avg_size);
    std::fprintf(stderr, "stats: %llu addresses, %llu clusters, medium avg %s\n",
                 static_cast<unsigned long long>(addresses),
                 static_cast<unsigned long long>(summary.total_clusters), medium);
    return 0;
}

// --- fit ---

struct FitArgs {
    std::optional<std::string> histogram;
    std::optional<std::string> clusters;
    std::optional<std::string> out;
    std::uint64_t min_tail = 10;
    double xmin_quantile = 0.95;
};

int run_fit(const FitArgs& args) {
    if (args.histogram.has_value() == args.clusters.has_value())
        throw UsageError("provide exactly one of --histogram or --clusters");
    SizeHistogram hist;
    if (args.histogram) {
        auto in = open_input(*args.histogram);
        hist = load_histogram_csv(in);
    } else {
        hist = histogram_from_assignments(*args.clusters);
    }
    const PowerLawFit fit = fit_power_law(hist, FitOptions{args.min_tail, args.xmin_quantile});
    emit_json(fit_to_json(fit), args.out);
    std::fprintf(stderr, "fit: alpha=%.6f sigma=%.6f xmin=%llu ks=%.6f n_tail=%llu\n", fit.alpha,
                 fit.sigma, static_cast<unsigned long long>(fit.xmin), fit.ks_distance,
                 static_cast<unsigned long long>(fit.n_tail));
    return 0;
}

// --- series ---

struct SeriesArgs {
    std::string input;
    std::string clusters;
    std::optional<std::string> out;
    std::int64_t origin_offset = 0;
    bool strict = false;
};

int run_series(const SeriesArgs& args) {
    auto clusters_in = open_input(args.clusters);
    const AssignmentTable assignments = load_assignments_csv(clusters_in);

    auto in = open_input(args.input);
    InternTable scratch;
    TransactionReader reader(in, scratch, args.strict);
    DailySeriesBuilder builder(args.origin_offset);

    auto observe = [&](std::uint64_t slot, const AddressInfo& info, bool is_input) {
        const auto hit = assignments.lookup(scratch.address_string(info.id));
        if (!hit)
            throw MissingAddress("address '" + std::string(scratch.address_string(info.id)) +
                                 "' missing from assignments CSV");
        if (hit->second > 0xffffffffull)
            throw SchemaViolation("cluster id " + std::to_string(hit->second) +
                                  " does not look like a root ordinal");
        builder.observe(slot, hit->first, static_cast<std::uint32_t>(hit->second), is_input);
    };
    std::uint64_t txs = 0;
    while (auto tx = reader.next()) {
        ++txs;
        for (const AddressInfo& i : tx->inputs) observe(tx->slot, i, true);
        for (const TxOutput& o : tx->outputs) observe(tx->slot, o.addr, false);
    }

    const DailySeries series = builder.finish();
    if (args.out) {
        auto out = open_output(*args.out);
        write_series_csv(out, series);
        finish_output(out, *args.out);
    } else {
        write_series_csv(std::cout, series);
    }
    std::fprintf(stderr, "series: %llu txs over %zu days\n", static_cast<unsigned long long>(txs),
                 series.size());
    return 0;
}

// --- simulate ---

struct SimulateArgs {
    std::optional<std::string> config;
    std::string out_txs;
    std::optional<std::string> out_truth;
    SimParams params;
    CLI::App* cmd = nullptr;
};

int run_simulate(SimulateArgs& args) {
    SimParams params;
    if (args.config) {
        auto in = open_input(*args.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InvalidParams(std::string("bad simulation config: ") + e.what());
        }
        params = sim_params_from_json(j);
    }

    // flags override the config file
    auto take = [&](const char* flag, auto& field, const auto& value) {
        if (args.cmd->count(flag) > 0) field = value;
    };
    take("--entities", params.n_entities, args.params.n_entities);
    take("--transactions", params.n_transactions, args.params.n_transactions);
    take("--seed", params.rng_seed, args.params.rng_seed);
    take("--stake-key-probability", params.stake_key_probability, args.params.stake_key_probability);
    take("--byron-fraction", params.byron_fraction, args.params.byron_fraction);
    take("--script-fraction", params.script_fraction, args.params.script_fraction);
    take("--multi-party-rate", params.multi_party_tx_rate, args.params.multi_party_tx_rate);
    take("--franken-rate", params.franken_rate, args.params.franken_rate);
    take("--wallet-mean", params.addresses_per_entity.mean, args.params.addresses_per_entity.mean);
    if (args.cmd->count("--wallet-fixed") > 0) {
        params.addresses_per_entity.kind = WalletSizeDist::Kind::Fixed;
        params.addresses_per_entity.value = args.params.addresses_per_entity.value;
    }
    take("--max-inputs", params.max_inputs, args.params.max_inputs);
    take("--max-payment-outputs", params.max_payment_outputs, args.params.max_payment_outputs);
    take("--slot-spacing", params.slot_spacing, args.params.slot_spacing);
    params.validate();

    auto out = open_output(args.out_txs);
    std::string buffer;
    buffer.reserve(1 << 20);
    std::uint64_t txs = 0;
    const GroundTruth truth = generate_chain(params, [&](const RawTransaction& tx) {
        ++txs;
        buffer += tx.to_jsonl();
        buffer += '\n';
        if (buffer.size() > (1 << 20) - (1 << 12)) {
            out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
            buffer.clear();
        }
    });
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    finish_output(out, args.out_txs);

    if (args.out_truth) {
        auto truth_out = open_output(*args.out_truth);
        write_truth_csv(truth_out, truth);
        finish_output(truth_out, *args.out_truth);
    }
    std::fprintf(stderr, "simulate: %llu txs, %zu addresses, %llu entities, seed %llu\n",
                 static_cast<unsigned long long>(txs), truth.entries.size(),
                 static_cast<unsigned long long>(params.n_entities),
                 static_cast<unsigned long long>(params.rng_seed));
    return 0;
}

// --- evaluate ---

struct EvaluateArgs {
    std::string clusters;
    std::string truth;
    std::optional<std::string> out;
};

int run_evaluate(const EvaluateArgs& args) {
    auto clusters_in = open_input(args.clusters);
    const AssignmentTable assignments = load_assignments_csv(clusters_in);
    auto truth_in = open_input(args.truth);
    const GroundTruth truth = load_truth_csv(truth_in);
    const EvalReport report = evaluate_assignments(assignments, truth);
    emit_json(eval_to_json(report), args.out);
    std::fprintf(stderr, "evaluate: precision=%.6f recall=%.6f f1=%.6f merged=%llu span=%llu\n",
                 report.pairwise_precision, report.pairwise_recall, report.f1,
                 static_cast<unsigned long long>(report.merged_entity_clusters),
                 static_cast<unsigned long long>(report.largest_cluster_entity_span));
    return 0;
}

int dispatch(std::vector<std::string> args) {
    CLI::App app{"entity clustering for EUTXO-chain payment addresses"};
    app.require_subcommand(1);

    ClusterArgs cluster_args;
    CLI::App* cluster_cmd = app.add_subcommand("cluster", "ingest transactions and cluster addresses");
    cluster_cmd->add_option("--input", cluster_args.input, "transactions JSONL")->required();
    cluster_cmd->add_option("--heuristics", cluster_args.heuristics, "comma list of h1,h2");
    cluster_cmd->add_option("--out-clusters", cluster_args.out_clusters, "assignments CSV path");
    cluster_cmd->add_option("--out-summary", cluster_args.out_summary, "summary JSON path (default stdout)");
    cluster_cmd->add_option("--out-histogram", cluster_args.out_histogram, "size histogram CSV path");
    cluster_cmd->add_flag("--strict", cluster_args.strict, "abort on the first malformed line");
    cluster_cmd->add_option("--large-threshold", cluster_args.large_threshold, "large cluster bound");
    cluster_cmd->add_option("--super-threshold", cluster_args.super_threshold, "supercluster bound");

    StatsArgs stats_args;
    CLI::App* stats_cmd = app.add_subcommand("stats", "summary and histogram from an assignments CSV");
    stats_cmd->add_option("--clusters", stats_args.clusters, "assignments CSV")->required();
    stats_cmd->add_option("--out-summary", stats_args.out_summary, "summary JSON path (default stdout)");
    stats_cmd->add_option("--out-histogram", stats_args.out_histogram, "size histogram CSV path");
    stats_cmd->add_option("--large-threshold", stats_args.large_threshold, "large cluster bound");
    stats_cmd->add_option("--super-threshold", stats_args.super_threshold, "supercluster bound");

    FitArgs fit_args;
    CLI::App* fit_cmd = app.add_subcommand("fit", "discrete power-law fit of cluster sizes");
    fit_cmd->add_option("--histogram", fit_args.histogram, "size histogram CSV");
    fit_cmd->add_option("--clusters", fit_args.clusters, "assignments CSV");
    fit_cmd->add_option("--out", fit_args.out, "fit JSON path (default stdout)");
    fit_cmd->add_option("--min-tail", fit_args.min_tail, "minimum tail observations per candidate");
    fit_cmd->add_option("--xmin-quantile", fit_args.xmin_quantile, "xmin candidate quantile cap");

    SeriesArgs series_args;
    CLI::App* series_cmd = app.add_subcommand("series", "daily new/active addresses and entities");
    series_cmd->add_option("--input", series_args.input, "transactions JSONL")->required();
    series_cmd->add_option("--clusters", series_args.clusters, "assignments CSV")->required();
    series_cmd->add_option("--out", series_args.out, "series CSV path (default stdout)");
    series_cmd->add_option("--origin-offset", series_args.origin_offset,
                           "seconds added to slots before day bucketing");
    series_cmd->add_flag("--strict", series_args.strict, "abort on the first malformed line");

    SimulateArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a synthetic chain with ground truth");
    sim_cmd->add_option("--config", sim_args.config, "simulation parameters JSON");
    sim_cmd->add_option("--out-txs", sim_args.out_txs, "transactions JSONL path")->required();
    sim_cmd->add_option("--out-truth", sim_args.out_truth, "ground truth CSV path");
    sim_cmd->add_option("--entities", sim_args.params.n_entities, "number of entities");
    sim_cmd->add_option("--transactions", sim_args.params.n_transactions, "number of transactions");
    sim_cmd->add_option("--seed", sim_args.params.rng_seed, "rng seed");
    sim_cmd->add_option("--stake-key-probability", sim_args.params.stake_key_probability,
                        "chance an entity shares one stake key");
    sim_cmd->add_option("--byron-fraction", sim_args.params.byron_fraction, "byron address share");
    sim_cmd->add_option("--script-fraction", sim_args.params.script_fraction, "script address share");
    sim_cmd->add_option("--multi-party-rate", sim_args.params.multi_party_tx_rate,
                        "fraction of transactions mixing two entities");
    sim_cmd->add_option("--franken-rate", sim_args.params.franken_rate,
                        "fraction of delegations pointing at another entity");
    sim_cmd->add_option("--wallet-mean", sim_args.params.addresses_per_entity.mean,
                        "geometric wallet size mean");
    sim_cmd->add_option("--wallet-fixed", sim_args.params.addresses_per_entity.value,
                        "fixed wallet size (overrides geometric)");
    sim_cmd->add_option("--max-inputs", sim_args.params.max_inputs, "max inputs per transaction");
    sim_cmd->add_option("--max-payment-outputs", sim_args.params.max_payment_outputs,
                        "max non-change outputs per transaction");
    sim_cmd->add_option("--slot-spacing", sim_args.params.slot_spacing,
                        "seconds between transactions");
    sim_args.cmd = sim_cmd;

    EvaluateArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score assignments against ground truth");
    eval_cmd->add_option("--clusters", eval_args.clusters, "assignments CSV")->required();
    eval_cmd->add_option("--truth", eval_args.truth, "ground truth CSV")->required();
    eval_cmd->add_option("--out", eval_args.out, "report JSON path (default stdout)");

    std::reverse(args.begin(), args.end()); // CLI11's vector parse expects reversed args
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (cluster_cmd->parsed()) return run_cluster(cluster_args);
    if (stats_cmd->parsed()) return run_stats(stats_args);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (series_cmd->parsed()) return run_series(series_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    throw UsageError("no subcommand given");
}

int run(std::vector<std::string> args) {
    try {
        return dispatch(std::move(args));
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    return run(std::vector<std::string>(argv + 1, argv + argc));
}
