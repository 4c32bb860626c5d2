// Command-line front end: synth -> build-graph -> train -> evaluate pipelines
// over the interaction-log TSV, binary graph, checkpoint and embedding files.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mgfn/graph_build.hpp"
#include "mgfn/multigraph.hpp"
#include "mgfn/records.hpp"
#include "mgfn/retrieval.hpp"
#include "mgfn/synthgen.hpp"
#include "mgfn/training.hpp"

namespace {

using namespace mgfn;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// effective config echoed into every artifact header
std::string config_echo(const CLI::App& app, const std::string& command) {
    std::ostringstream os;
    os << "command=" << command << "\n";
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
        std::string name = opt->get_single_name();
        if (name.empty()) continue;
        std::string value = opt->count() ? opt->results()[0] : opt->get_default_str();
        if (opt->count() && opt->results().size() > 1) {
            value.clear();
            for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        }
        os << name << "=" << value << "\n";
    }
    return os.str();
}

std::string hash_comment(const std::string& echo) {
    std::istringstream in(echo);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) out << "# " << line << "\n";
    return out.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

struct SynthArgs {
    std::uint32_t items = 2000;
    std::uint32_t topics = 6;
    std::uint32_t users = 500;
    std::uint32_t days = 8;
    std::uint32_t sessions = 2;
    double exclusive_fraction = 0.3;
    std::uint64_t seed = 42;
    std::string out;
    std::string catalog_out;
};

int run_synth(const SynthArgs& a, const std::string& echo) {
    auto catalog = generate_catalog(a.items, a.topics, a.seed);
    auto profiles = default_profiles(a.topics, a.exclusive_fraction, a.sessions);
    auto records = generate_interactions(catalog, profiles, a.users, a.days, a.seed);

    auto log_out = open_out(a.out);
    log_out << hash_comment(echo);
    write_log(log_out, records);
    auto cat_out = open_out(a.catalog_out);
    cat_out << hash_comment(echo);
    write_catalog(cat_out, catalog);

    std::cout << "items=" << catalog.size() << "\n"
              << "records=" << records.size() << "\n"
              << "users=" << a.users << "\n"
              << "days=" << a.days << "\n"
              << "scenarios=" << profiles.size() << "\n"
              << "suggested_cutoff_ts=" << static_cast<std::int64_t>(a.days - 1) * kSecondsPerDay
              << "\n";
    return kExitOk;
}

struct BuildGraphArgs {
    std::string log;
    std::string catalog;
    std::string out;
    std::string report;
    std::int64_t cutoff_ts = -1;
    std::uint32_t buckets = 5000;
    std::string source = "B";
    std::string target = "A";
};

int run_build_graph(const BuildGraphArgs& a, const std::string& echo) {
    auto catalog = parse_catalog_file(a.catalog);
    auto records = parse_log_file(a.log);
    if (a.cutoff_ts >= 0) {
        auto [train, val] = split_train_validation(records, a.cutoff_ts);
        records = std::move(train);
    }
    auto cleaned = clean_records(records, catalog);
    auto pairs = extract_transition_pairs(cleaned);
    auto g = build_csmg(pairs, cleaned, catalog, a.buckets);
    save_graph(a.out, g, echo);

    std::ostringstream summary;
    summary << "nodes=" << g.num_nodes() << "\n"
            << "edges=" << g.num_edges() << "\n";
    for (std::size_t s = 0; s < g.num_scenarios(); ++s)
        summary << "edges(" << g.scenario_ids[s] << ")=" << g.out_adj[s].num_edges() << "\n";
    std::cout << summary.str();

    if (!a.report.empty()) {
        auto out = open_out(a.report);
        out << hash_comment(echo) << summary.str();
        if (g.num_scenarios() >= 2 && g.find_scenario(a.source) >= 0 &&
            g.find_scenario(a.target) >= 0) {
            write_edge_report(out, classify_edges(g, a.source, a.target));
        } else {
            out << "edge classification skipped: needs both scenarios in the graph\n";
        }
    }
    return kExitOk;
}

struct TrainArgs {
    std::string graph;
    std::string variant = "mgfn";
    std::uint32_t steps = 12000;
    std::uint32_t batch_size = 4000;
    std::uint32_t negatives = 5;
    double lr = 0.002;
    double dropout = 0.0;
    std::uint32_t fanout = 10;
    std::string neg_strategy = "cross_scenario";
    std::string weight_mode = "normalized";
    std::uint64_t seed = 42;
    bool deterministic = false;
    std::uint32_t inference_fanout = 0;  // 0 = exact neighborhoods
    std::uint32_t inference_batch = 1024;
    std::string checkpoint;
    std::string embeddings;
    std::string loss_csv;
};

NegativeSampling parse_strategy(const std::string& s) {
    if (s == "cross_scenario") return {NegativeStrategy::kCrossScenario, ""};
    if (s == "random") return {NegativeStrategy::kRandom, ""};
    if (s.starts_with("degree:") && s.size() > 7)
        return {NegativeStrategy::kDegreeSingleScenario, s.substr(7)};
    throw CLI::ValidationError("--neg-strategy",
                               "expected cross_scenario, random or degree:<scenario>");
}

int run_train(const TrainArgs& a, const std::string& echo) {
    if (a.deterministic) Eigen::setNbThreads(1);  // one writer, fixed reduction order
    auto g = load_graph(a.graph);

    ModelConfig mc;
    CrossScenarioMultiGraph working;
    if (a.variant == "mgfn") {
        mc.conv = ConvKind::kSage;
        mc.fusion = FusionKind::kConcat;
        working = std::move(g);
    } else if (a.variant == "mgfn-mean") {
        mc.conv = ConvKind::kSage;
        mc.fusion = FusionKind::kMean;
        working = std::move(g);
    } else if (a.variant == "mgfn-weighted") {
        mc.conv = ConvKind::kSage;
        mc.fusion = FusionKind::kWeighted;
        working = std::move(g);
    } else if (a.variant == "mgfn-gat") {
        mc.conv = ConvKind::kGat;
        mc.fusion = FusionKind::kConcat;
        working = std::move(g);
    } else if (a.variant.starts_with("single-scenario:") && a.variant.size() > 16) {
        mc.conv = ConvKind::kSage;
        mc.fusion = FusionKind::kMean;
        working = restrict_to_scenario(g, a.variant.substr(16));
    } else if (a.variant == "dataconcat") {
        mc.conv = ConvKind::kSage;
        mc.fusion = FusionKind::kMean;
        working = collapse_scenarios(g);
    } else {
        throw CLI::ValidationError("--variant", "unknown variant " + a.variant);
    }
    if (a.weight_mode == "normalized")
        mc.weight_mode = WeightMode::kNormalized;
    else if (a.weight_mode == "raw")
        mc.weight_mode = WeightMode::kRaw;
    else
        throw CLI::ValidationError("--weight-mode", "expected normalized or raw");

    TrainConfig tc;
    tc.batch_size = a.batch_size;
    tc.negatives = a.negatives;
    tc.lr = a.lr;
    tc.stop_steps = a.steps;
    tc.dropout = a.dropout;
    tc.negative = parse_strategy(a.neg_strategy);
    tc.seed = a.seed;
    tc.fanouts = {a.fanout, a.fanout};
    tc.inference_fanout = a.inference_fanout == 0 ? kFullFanout : a.inference_fanout;
    tc.inference_batch = a.inference_batch;

    auto res = train(working, mc, tc);

    auto emb_out = open_out(a.embeddings);
    emb_out << hash_comment(echo);
    write_embeddings_tsv(emb_out, res.embeddings);
    if (!a.checkpoint.empty()) save_checkpoint(a.checkpoint, res.params, res.opt, echo);
    if (!a.loss_csv.empty()) {
        auto out = open_out(a.loss_csv);
        out << hash_comment(echo) << "step,loss,smoothed100\n";
        char buf[64];
        for (std::size_t step = 100; step <= res.losses.size(); step += 100) {
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", step, res.losses[step - 1],
                          smoothed_loss(res.losses, step));
            out << buf;
        }
        if (res.losses.size() % 100 != 0 && !res.losses.empty()) {
            std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", res.losses.size(),
                          res.losses.back(), smoothed_loss(res.losses, res.losses.size()));
            out << buf;
        }
    }
    std::cout << "steps=" << res.losses.size() << "\n"
              << "nodes=" << res.embeddings.size() << "\n";
    if (!res.losses.empty())
        std::cout << "final_smoothed_loss=" << smoothed_loss(res.losses, res.losses.size())
                  << "\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string embeddings;
    std::string log;
    std::string catalog;
    std::string report;
    std::string graph;
    std::string pca;
    std::int64_t cutoff_ts = 0;
    std::string target = "A";
    std::string source = "B";
    std::uint32_t queue_len = 20;
    std::uint32_t per_query_k = 15;
    std::uint32_t final_k = 100;
    std::string agg = "max";
    std::uint32_t pca_tags = 3;
    std::uint32_t pca_sample = 500;
    std::uint64_t seed = 42;
};

int run_evaluate(const EvaluateArgs& a, const std::string& echo) {
    auto table = read_embeddings_file(a.embeddings);
    auto catalog = parse_catalog_file(a.catalog);
    auto records = parse_log_file(a.log);
    auto cleaned = clean_records(records, catalog);
    auto [train_records, validation_records] = split_train_validation(cleaned, a.cutoff_ts);

    EvaluationOptions opt;
    opt.target_scenario = a.target;
    opt.source_scenario = a.source;
    opt.retrieval.queue_len = a.queue_len;
    opt.retrieval.per_query_k = a.per_query_k;
    opt.retrieval.final_k = a.final_k;
    opt.seed = a.seed;
    if (a.agg == "max")
        opt.retrieval.aggregation = ScoreAggregation::kMax;
    else if (a.agg == "sum")
        opt.retrieval.aggregation = ScoreAggregation::kSum;
    else
        throw CLI::ValidationError("--agg", "expected max or sum");

    CrossScenarioMultiGraph g;
    if (!a.graph.empty()) {
        g = load_graph(a.graph);
        opt.graph = &g;
    }

    auto report = evaluate_embeddings(table, train_records, validation_records, opt);
    auto out = open_out(a.report);
    out << hash_comment(echo);
    write_eval_report(out, report);
    write_eval_report(std::cout, report);

    if (!a.pca.empty()) {
        std::map<std::string, std::string> tags;
        for (const auto& m : catalog) tags[m.item_id] = m.tag;
        std::map<std::string, std::string> sources;
        std::map<std::string, std::pair<bool, bool>> seen;  // (in target, in source)
        for (const auto& r : train_records) {
            if (r.scenario_id == a.target) seen[r.item_id].first = true;
            if (r.scenario_id == a.source) seen[r.item_id].second = true;
        }
        for (const auto& [item, flags] : seen)
            sources[item] = flags.first && flags.second ? "both"
                            : flags.first              ? a.target
                                                       : a.source;
        auto points = pca_project(table, tags, sources, a.pca_tags, a.pca_sample, a.seed);
        auto pca_out = open_out(a.pca);
        pca_out << hash_comment(echo);
        write_pca_csv(pca_out, points);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-scenario multi-graph toolkit"};
    app.require_subcommand(1);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic catalog and watch log");
    synth->set_config("--config");
    synth->add_option("--items", sa.items, "catalog size")
        ->default_val(2000)
        ->check(CLI::PositiveNumber);
    synth->add_option("--topics", sa.topics, "topic count")
        ->default_val(6)
        ->check(CLI::PositiveNumber);
    synth->add_option("--users", sa.users, "user count")
        ->default_val(500)
        ->check(CLI::PositiveNumber);
    synth->add_option("--days", sa.days, "days to simulate")
        ->default_val(8)
        ->check(CLI::PositiveNumber);
    synth->add_option("--sessions-per-day", sa.sessions,
                      "sessions per user per day per scenario")
        ->default_val(2)
        ->check(CLI::PositiveNumber);
    synth->add_option("--exclusive-fraction", sa.exclusive_fraction,
                      "fraction of the catalog exclusive to each scenario")
        ->default_val(0.3)
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", sa.seed, "rng seed")->default_val(42);
    synth->add_option("--out", sa.out, "interaction log TSV path")->required();
    synth->add_option("--catalog-out", sa.catalog_out, "catalog TSV path")->required();

    BuildGraphArgs ba;
    CLI::App* build = app.add_subcommand("build-graph", "build the multi-graph from a watch log");
    build->set_config("--config");
    build->add_option("--log", ba.log, "interaction log TSV")->required();
    build->add_option("--catalog", ba.catalog, "catalog TSV")->required();
    build->add_option("--out", ba.out, "graph file path")->required();
    build->add_option("--report", ba.report, "edge-composition report path");
    build->add_option("--cutoff-ts", ba.cutoff_ts,
                      "keep records strictly before this timestamp (-1 = all)")
        ->default_val(-1);
    build->add_option("--buckets", ba.buckets, "feature hash buckets")
        ->default_val(5000)
        ->check(CLI::PositiveNumber);
    build->add_option("--source", ba.source, "source scenario for the report")->default_val("B");
    build->add_option("--target", ba.target, "target scenario for the report")->default_val("A");

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train", "train item embeddings on a graph");
    tr->set_config("--config");
    tr->add_option("--graph", ta.graph, "graph file")->required();
    tr->add_option("--variant", ta.variant,
                   "mgfn | mgfn-mean | mgfn-weighted | mgfn-gat | single-scenario:<s> | dataconcat")
        ->default_val("mgfn");
    tr->add_option("--steps", ta.steps, "training steps")->default_val(12000);
    tr->add_option("--batch-size", ta.batch_size, "positive pairs per step")
        ->default_val(4000)
        ->check(CLI::PositiveNumber);
    tr->add_option("--negatives", ta.negatives, "negatives per positive")
        ->default_val(5)
        ->check(CLI::PositiveNumber);
    tr->add_option("--lr", ta.lr, "adam learning rate")
        ->default_val(0.002)
        ->check(CLI::PositiveNumber);
    tr->add_option("--dropout", ta.dropout, "dropout on fused layers")
        ->default_val(0.0)
        ->check(CLI::Range(0.0, 0.999));
    tr->add_option("--fanout", ta.fanout, "sampled in-neighbors per hop per scenario")
        ->default_val(10)
        ->check(CLI::PositiveNumber);
    tr->add_option("--neg-strategy", ta.neg_strategy,
                   "cross_scenario | random | degree:<scenario>")
        ->default_val("cross_scenario");
    tr->add_option("--weight-mode", ta.weight_mode, "normalized | raw edge weights")
        ->default_val("normalized");
    tr->add_option("--seed", ta.seed, "rng seed")->default_val(42);
    tr->add_flag("--deterministic", ta.deterministic,
                 "strictly sequential execution (rerun is byte-identical)");
    tr->add_option("--inference-fanout", ta.inference_fanout,
                   "fanout for the final full-table forward (0 = exact)")
        ->default_val(0);
    tr->add_option("--inference-batch", ta.inference_batch, "seed batch for inference")
        ->default_val(1024)
        ->check(CLI::PositiveNumber);
    tr->add_option("--checkpoint", ta.checkpoint, "checkpoint output path");
    tr->add_option("--embeddings", ta.embeddings, "embedding TSV output path")->required();
    tr->add_option("--loss-csv", ta.loss_csv, "loss curve CSV path");

    EvaluateArgs ea;
    CLI::App* ev = app.add_subcommand("evaluate", "offline retrieval evaluation");
    ev->set_config("--config");
    ev->add_option("--embeddings", ea.embeddings, "embedding TSV")->required();
    ev->add_option("--log", ea.log, "full interaction log TSV")->required();
    ev->add_option("--catalog", ea.catalog, "catalog TSV")->required();
    ev->add_option("--report", ea.report, "evaluation report path")->required();
    ev->add_option("--graph", ea.graph, "training graph (enables held-out edge AUC)");
    ev->add_option("--cutoff-ts", ea.cutoff_ts, "train/validation split timestamp")->required();
    ev->add_option("--target", ea.target, "scenario being served")->default_val("A");
    ev->add_option("--source", ea.source, "outer scenario (empty disables outer metrics)")
        ->default_val("B");
    ev->add_option("--queue-len", ea.queue_len, "user queue length")
        ->default_val(20)
        ->check(CLI::PositiveNumber);
    ev->add_option("--per-query-k", ea.per_query_k, "matches per queue item")
        ->default_val(15)
        ->check(CLI::PositiveNumber);
    ev->add_option("--final-k", ea.final_k, "retrieved candidates per user")
        ->default_val(100)
        ->check(CLI::PositiveNumber);
    ev->add_option("--agg", ea.agg, "candidate score aggregation: max | sum")->default_val("max");
    ev->add_option("--pca", ea.pca, "embedding projection CSV path");
    ev->add_option("--tags", ea.pca_tags, "projection: top tags")
        ->default_val(3)
        ->check(CLI::PositiveNumber);
    ev->add_option("--sample", ea.pca_sample, "projection: samples per tag")
        ->default_val(500)
        ->check(CLI::PositiveNumber);
    ev->add_option("--seed", ea.seed, "rng seed")->default_val(42);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return run_synth(sa, config_echo(*synth, "synth"));
        if (build->parsed()) return run_build_graph(ba, config_echo(*build, "build-graph"));
        if (tr->parsed()) return run_train(ta, config_echo(*tr, "train"));
        if (ev->parsed()) return run_evaluate(ea, config_echo(*ev, "evaluate"));
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
