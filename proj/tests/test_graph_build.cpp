#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>

#include "helpers.hpp"
#include "mgfn/graph_build.hpp"

using namespace mgfn;
using test::pair;
using test::rec;

TEST_CASE("parse_log maps well-formed lines and skips preamble") {
    std::istringstream in("# run config: seed=1\nu1\tv1\tS\t100\t0.5\n\nu2\tv2\tT\t200\t1\n");
    auto records = parse_log(in);
    REQUIRE(records.size() == 2);
    CHECK(records[0] == rec("u1", "v1", "S", 100, 0.5));
    CHECK(records[1].scenario_id == "T");
}

TEST_CASE("parse_log of empty input yields no records") {
    std::istringstream in("");
    CHECK(parse_log(in).empty());
}

TEST_CASE("parse_log names the line and field of malformed input") {
    std::istringstream four_fields("u1\tv1\tS\t100\n");
    CHECK_THROWS_WITH_AS(parse_log(four_fields),
                         doctest::Contains("line 1"), ParseError);
    std::istringstream bad_ts("u1\tv1\tS\t1x0\t0.5\n");
    CHECK_THROWS_WITH_AS(parse_log(bad_ts), doctest::Contains("timestamp"), ParseError);
    std::istringstream bad_cr("ok\tv\tS\t5\t0.5\nu1\tv1\tS\t100\tNaN-ish\n");
    CHECK_THROWS_WITH_AS(parse_log(bad_cr), doctest::Contains("line 2"), ParseError);
    std::istringstream neg_cr("u1\tv1\tS\t100\t-0.5\n");
    CHECK_THROWS_AS(parse_log(neg_cr), ParseError);
}

TEST_CASE("clean_records enforces the strict 3% completion boundary") {
    auto catalog = test::catalog_of({"v1"});
    std::vector<InteractionRecord> records = {rec("u", "v1", "S", 1, 0.03),
                                              rec("u", "v1", "S", 2, 0.031)};
    auto cleaned = clean_records(records, catalog);
    REQUIRE(cleaned.size() == 1);
    CHECK(cleaned[0].timestamp == 2);
}

TEST_CASE("clean_records dedups and drops unknown items, keeping order") {
    auto catalog = test::catalog_of({"v1", "v2"});
    std::vector<InteractionRecord> records = {
        rec("u", "v1", "S", 1), rec("u", "v1", "S", 1),   // exact duplicate
        rec("u", "vX", "S", 2),                           // not in catalog
        rec("u", "v2", "S", 3), rec("u", "v1", "T", 1),   // other scenario is no duplicate
    };
    auto cleaned = clean_records(records, catalog);
    REQUIRE(cleaned.size() == 3);
    CHECK(cleaned[0].item_id == "v1");
    CHECK(cleaned[1].item_id == "v2");
    CHECK(cleaned[2].scenario_id == "T");

    CHECK(clean_records(cleaned, catalog) == cleaned);  // idempotent
}

TEST_CASE("transition pairs respect the 3600 s window") {
    std::vector<InteractionRecord> records = {rec("u", "v1", "S", 0), rec("u", "v2", "S", 100),
                                              rec("u", "v3", "S", 4000)};
    auto pairs = extract_transition_pairs(records);
    REQUIRE(pairs.size() == 1);  // 4000 - 100 = 3900 >= 3600
    CHECK(pairs[0] == pair("v1", "v2", "S"));

    std::vector<InteractionRecord> exact = {rec("u", "v1", "S", 0), rec("u", "v2", "S", 3600)};
    CHECK(extract_transition_pairs(exact).empty());  // "shorter than", not "at most"
    std::vector<InteractionRecord> inside = {rec("u", "v1", "S", 0), rec("u", "v2", "S", 3599)};
    CHECK(extract_transition_pairs(inside).size() == 1);
}

TEST_CASE("single watches, rewatches and ties") {
    CHECK(extract_transition_pairs({rec("u", "v1", "S", 0)}).empty());

    std::vector<InteractionRecord> cycle = {rec("u", "v1", "S", 0), rec("u", "v2", "S", 1000),
                                            rec("u", "v1", "S", 2000)};
    auto pairs = extract_transition_pairs(cycle);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == pair("v1", "v2", "S"));
    CHECK(pairs[1] == pair("v2", "v1", "S"));

    // immediate rewatch yields no self-transition
    std::vector<InteractionRecord> rewatch = {rec("u", "v1", "S", 0), rec("u", "v1", "S", 10)};
    CHECK(extract_transition_pairs(rewatch).empty());

    // equal timestamps order by item id
    std::vector<InteractionRecord> tie = {rec("u", "vb", "S", 5), rec("u", "va", "S", 5)};
    auto tied = extract_transition_pairs(tie);
    REQUIRE(tied.size() == 1);
    CHECK(tied[0] == pair("va", "vb", "S"));
}

TEST_CASE("pairs are grouped per user and per scenario") {
    std::vector<InteractionRecord> records = {rec("u1", "v1", "S", 0), rec("u2", "v2", "S", 10),
                                              rec("u1", "v3", "T", 20)};
    CHECK(extract_transition_pairs(records).empty());
}

TEST_CASE("edge weights count repeated transitions") {
    auto g = test::graph_from_pairs(
        {pair("v1", "v2", "S"), pair("v1", "v2", "S"), pair("v1", "v2", "S")});
    auto v1 = g.find_node("v1");
    auto v2 = g.find_node("v2");
    REQUIRE(v1);
    REQUIRE(v2);
    CHECK(g.out_adj[0].lookup(*v1, *v2) == 3);
    CHECK(g.num_edges() == 1);
}

TEST_CASE("a scenario watched without transitions keeps an empty adjacency") {
    auto g = test::graph_from_pairs({pair("v1", "v2", "S")}, {rec("u", "v1", "B", 0)});
    REQUIRE(g.num_scenarios() == 2);
    const auto b = static_cast<std::size_t>(g.require_scenario("B"));
    CHECK(g.out_adj[b].num_edges() == 0);
    CHECK(g.out_adj[g.require_scenario("S")].num_edges() == 1);
    // the watched-only item is a degree-0 node
    auto v1 = g.find_node("v1");
    REQUIRE(v1);
    CHECK(g.watched[b][*v1] == 1);
}

TEST_CASE("crafted six-pair log matches the hand-built graph") {
    // hand enumeration:
    //   u1/S: v1@0 -> v2@100 -> v1@200          => (v1->v2), (v2->v1)
    //   u2/S: v2@0 -> v3@50, v1@9000 too late   => (v2->v3)
    //   u3/S: v3@0 -> v1@80                      => (v3->v1)
    //   u4/T: v2@0 -> v1@10, gap, v2 -> v1      => (v2->v1) twice
    std::vector<InteractionRecord> records = {
        rec("u1", "v1", "S", 0),    rec("u1", "v2", "S", 100), rec("u1", "v1", "S", 200),
        rec("u2", "v2", "S", 0),    rec("u2", "v3", "S", 50),  rec("u2", "v1", "S", 9000),
        rec("u3", "v3", "S", 0),    rec("u3", "v1", "S", 80),
        rec("u4", "v2", "T", 0),    rec("u4", "v1", "T", 10),  rec("u4", "v2", "T", 5000),
        rec("u4", "v1", "T", 5100),
    };
    auto pairs = extract_transition_pairs(records);
    REQUIRE(pairs.size() == 6);
    auto g = build_csmg(pairs, records, test::catalog_of({"v1", "v2", "v3"}), 32);

    const auto s = static_cast<std::size_t>(g.require_scenario("S"));
    const auto t = static_cast<std::size_t>(g.require_scenario("T"));
    auto node = [&](const char* id) { return *g.find_node(id); };
    CHECK(g.out_adj[s].lookup(node("v1"), node("v2")) == 1);
    CHECK(g.out_adj[s].lookup(node("v2"), node("v1")) == 1);
    CHECK(g.out_adj[s].lookup(node("v2"), node("v3")) == 1);
    CHECK(g.out_adj[s].lookup(node("v3"), node("v1")) == 1);
    CHECK(g.out_adj[s].lookup(node("v1"), node("v3")) == 0);
    CHECK(g.out_adj[s].num_edges() == 4);
    CHECK(g.out_adj[t].lookup(node("v2"), node("v1")) == 2);
    CHECK(g.out_adj[t].num_edges() == 1);

    // weight conservation per scenario
    std::map<std::string, std::size_t> pair_counts;
    for (const auto& p : pairs) ++pair_counts[p.scenario_id];
    for (auto [scen, expected] : pair_counts) {
        const auto si = static_cast<std::size_t>(g.require_scenario(scen));
        std::uint64_t weight_sum = 0;
        for (auto c : g.out_adj[si].count) weight_sum += c;
        CHECK(weight_sum == expected);
    }
}

TEST_CASE("degree feature column equals recomputed adjacency degrees") {
    auto catalog = generate_catalog(120, 3, 5);
    auto records = generate_interactions(catalog, default_profiles(3, 0.2), 25, 3, 5);
    auto cleaned = clean_records(records, catalog);
    auto pairs = extract_transition_pairs(cleaned);
    auto g = build_csmg(pairs, cleaned, catalog, 500);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        std::uint64_t degree = 0;
        for (std::size_t s = 0; s < g.num_scenarios(); ++s) {
            for (NodeId i = 0; i < g.num_nodes(); ++i) {
                degree += g.out_adj[s].lookup(i, v);  // in-degree in weight units
                degree += g.out_adj[s].lookup(v, i);  // out-degree
            }
        }
        CHECK(g.log_degree[v] == doctest::Approx(std::log1p(double(degree))).epsilon(1e-14));
        CHECK(g.total_degree_w(v) == degree);
    }
}

TEST_CASE("feature hashing is stable and bucketed") {
    CHECK(feature_bucket("abc", 5000) == feature_bucket("abc", 5000));
    CHECK(feature_bucket("abc", 5000) < 5000);
    auto g = test::graph_from_pairs({pair("v1", "v2", "S")});
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        CHECK(g.kw_bucket[v] < g.hash_buckets);
        CHECK(g.tag_bucket[v] < g.hash_buckets);
        CHECK(g.id_bucket[v] < g.hash_buckets);
    }
}

TEST_CASE("all-co-shared graph classifies at 100%") {
    auto g = test::graph_from_pairs({pair("v1", "v2", "S"), pair("v2", "v3", "S"),
                                     pair("v1", "v2", "T"), pair("v2", "v3", "T")});
    auto r = classify_edges(g, "S", "T");
    CHECK(r.co_shared == 2);
    CHECK(r.with_co_shared == 0);
    CHECK(r.exclusive == 0);
    CHECK(r.total_source_edges == 2);
    CHECK(r.pct_co_shared() == doctest::Approx(100.0));
}

TEST_CASE("crafted twelve-node graph classifies as 2/3/4") {
    // source scenario B; target scenario A
    // co-shared edges (also in A): e1, e2
    // source-only edges with a target-watched endpoint: e3, e4, e5
    // source-only edges between items never watched in A: e6..e9
    std::vector<TransitionPair> pairs = {
        pair("n01", "n02", "B"), pair("n03", "n04", "B"),  // will also exist in A
        pair("n05", "n02", "B"), pair("n01", "n06", "B"), pair("n03", "n07", "B"),
        pair("n08", "n09", "B"), pair("n09", "n10", "B"), pair("n10", "n11", "B"),
        pair("n11", "n12", "B"),
        pair("n01", "n02", "A"), pair("n03", "n04", "A"),
    };
    // target-side watches make n01..n04 co-shared items
    std::vector<InteractionRecord> records;
    for (const char* id : {"n01", "n02", "n03", "n04"}) records.push_back(rec("u", id, "A", 0));
    int t = 0;
    for (int i = 1; i <= 12; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "n%02d", i);
        records.push_back(rec("u2", buf, "B", 10000 * (++t)));
    }
    auto g = build_csmg(pairs, records, test::catalog_of([] {
                            std::vector<std::string> ids;
                            for (int i = 1; i <= 12; ++i) {
                                char buf[8];
                                std::snprintf(buf, sizeof(buf), "n%02d", i);
                                ids.emplace_back(buf);
                            }
                            return ids;
                        }()),
                        32);
    REQUIRE(g.num_nodes() == 12);
    auto r = classify_edges(g, "B", "A");
    CHECK(r.co_shared == 2);
    CHECK(r.with_co_shared == 3);
    CHECK(r.exclusive == 4);
    CHECK(r.total_source_edges == 9);
    CHECK(r.total_target_edges == 2);
    CHECK(r.co_shared + r.with_co_shared + r.exclusive == r.total_source_edges);
    CHECK(r.pct_co_shared() + r.pct_with_co_shared() + r.pct_exclusive() ==
          doctest::Approx(100.0).epsilon(1e-9));

    CHECK_THROWS_AS(classify_edges(g, "B", "nope"), std::invalid_argument);
}

TEST_CASE("classification partitions the source edges on a generated graph") {
    auto catalog = generate_catalog(150, 3, 6);
    auto records = generate_interactions(catalog, default_profiles(3, 0.25), 30, 4, 6);
    auto cleaned = clean_records(records, catalog);
    auto g = build_csmg(extract_transition_pairs(cleaned), cleaned, catalog, 256);
    auto r = classify_edges(g, "B", "A");
    CHECK(r.co_shared + r.with_co_shared + r.exclusive == r.total_source_edges);
    CHECK(r.total_source_edges == g.out_adj[g.require_scenario("B")].num_edges());

    std::ostringstream os;
    write_edge_report(os, r);
    CHECK(os.str().find("edge_report.total_source_edges=") != std::string::npos);
}
