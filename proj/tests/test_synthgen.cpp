#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "mgfn/synthgen.hpp"

using namespace mgfn;

namespace {

std::string catalog_bytes(const std::vector<ItemMeta>& c) {
    std::ostringstream os;
    write_catalog(os, c);
    return os.str();
}

std::string log_bytes(const std::vector<InteractionRecord>& r) {
    std::ostringstream os;
    write_log(os, r);
    return os.str();
}

}  // namespace

TEST_CASE("catalog generation is deterministic per seed") {
    auto a = generate_catalog(10, 2, 7);
    auto b = generate_catalog(10, 2, 7);
    CHECK(catalog_bytes(a) == catalog_bytes(b));
    auto c = generate_catalog(10, 2, 8);
    CHECK(catalog_bytes(a) != catalog_bytes(c));
}

TEST_CASE("catalog covers every topic and splits near-uniformly") {
    auto catalog = generate_catalog(1000, 3, 1);
    std::map<std::uint32_t, int> counts;
    for (const auto& m : catalog) ++counts[m.topic];
    REQUIRE(counts.size() == 3);
    for (const auto& [topic, n] : counts) {
        CHECK(n >= 250);
        CHECK(n <= 416);
    }
    std::set<std::string> ids;
    for (const auto& m : catalog) {
        CHECK(m.duration_s >= 1);
        CHECK(ids.insert(m.item_id).second);
    }
}

TEST_CASE("same-topic items share keyword/tag vocabulary") {
    auto catalog = generate_catalog(400, 2, 3);
    std::map<std::uint32_t, std::set<std::string>> kw_by_topic;
    for (const auto& m : catalog) kw_by_topic[m.topic].insert(m.keyword);
    // per-topic vocabularies are bounded and disjoint across topics
    std::set<std::string> all;
    for (auto& [topic, kws] : kw_by_topic) {
        CHECK(kws.size() <= 40);
        for (const auto& k : kws) CHECK(all.insert(k).second);
    }
}

TEST_CASE("catalog argument validation") {
    CHECK_THROWS_AS(generate_catalog(0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_catalog(2, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_catalog(2, 3, 1), std::invalid_argument);
}

TEST_CASE("interaction generation is deterministic per seed") {
    auto catalog = generate_catalog(50, 3, 2);
    auto profiles = default_profiles(3, 0.2);
    auto a = generate_interactions(catalog, profiles, 8, 2, 11);
    auto b = generate_interactions(catalog, profiles, 8, 2, 11);
    CHECK(a == b);
    CHECK(log_bytes(a) == log_bytes(b));
}

TEST_CASE("single-scenario generation stays in that scenario") {
    auto catalog = generate_catalog(20, 2, 3);
    ScenarioProfile only;
    only.scenario_id = "S";
    only.exposure_distribution = {1.0, 1.0};
    auto records = generate_interactions(catalog, {only}, 2, 1, 5);
    REQUIRE(!records.empty());
    for (const auto& r : records) CHECK(r.scenario_id == "S");
}

TEST_CASE("exclusive items appear in only one scenario") {
    auto catalog = generate_catalog(200, 3, 4);
    auto profiles = default_profiles(3, 0.3);
    auto records = generate_interactions(catalog, profiles, 40, 4, 9);
    std::set<std::string> in_a, in_b;
    for (const auto& r : records) (r.scenario_id == "A" ? in_a : in_b).insert(r.item_id);
    std::size_t only_a = 0, only_b = 0;
    for (const auto& id : in_a)
        if (!in_b.contains(id)) ++only_a;
    for (const auto& id : in_b)
        if (!in_a.contains(id)) ++only_b;
    CHECK(only_a >= 1);
    CHECK(only_b >= 1);
}

TEST_CASE("timestamps strictly increase per user and scenario") {
    auto catalog = generate_catalog(60, 2, 3);
    auto records = generate_interactions(catalog, default_profiles(2, 0.1), 10, 3, 4);
    std::map<std::pair<std::string, std::string>, std::int64_t> last;
    std::map<std::pair<std::string, std::string>, std::vector<std::int64_t>> ts;
    for (const auto& r : records) ts[{r.user_id, r.scenario_id}].push_back(r.timestamp);
    for (auto& [key, v] : ts) {
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());  // strict
    }
}

TEST_CASE("sessions yield transition-pair material and a working 3% filter") {
    auto catalog = generate_catalog(300, 4, 6);
    auto records = generate_interactions(catalog, default_profiles(4, 0.2), 60, 5, 3);
    REQUIRE(records.size() > 3000);

    // most adjacent same-(user, scenario) watches fall inside the 3600 s window
    std::map<std::pair<std::string, std::string>, std::vector<std::int64_t>> ts;
    for (const auto& r : records) ts[{r.user_id, r.scenario_id}].push_back(r.timestamp);
    std::size_t close = 0, total = 0;
    for (auto& [key, v] : ts) {
        std::sort(v.begin(), v.end());
        for (std::size_t i = 0; i + 1 < v.size(); ++i) {
            ++total;
            if (v[i + 1] - v[i] < 3600) ++close;
        }
    }
    CHECK(static_cast<double>(close) > 0.5 * static_cast<double>(total));

    // ~5% of completion rates sit at or below the filter threshold
    std::size_t low = 0;
    for (const auto& r : records)
        if (r.completion_rate <= 0.03) ++low;
    double frac = static_cast<double>(low) / static_cast<double>(records.size());
    CHECK(frac > 0.025);
    CHECK(frac < 0.085);
}

TEST_CASE("split at a cutoff partitions records exactly") {
    std::vector<InteractionRecord> records = {test::rec("u", "a", "S", 10),
                                              test::rec("u", "b", "S", 20),
                                              test::rec("u", "c", "S", 30)};
    auto [train, val] = split_train_validation(records, 25);
    REQUIRE(train.size() == 2);
    REQUIRE(val.size() == 1);
    CHECK(train[0].timestamp == 10);
    CHECK(train[1].timestamp == 20);
    CHECK(val[0].timestamp == 30);

    auto [t2, v2] = split_train_validation(records, 5);
    CHECK(t2.empty());
    CHECK(v2.size() == 3);

    for (std::int64_t cutoff : {0, 10, 15, 20, 25, 30, 35}) {
        auto [t, v] = split_train_validation(records, cutoff);
        CHECK(t.size() + v.size() == records.size());
        for (const auto& r : t) CHECK(r.timestamp < cutoff);
        for (const auto& r : v) CHECK(r.timestamp >= cutoff);
    }
}

TEST_CASE("raising the exclusive fraction raises scenario-exclusive item counts") {
    auto catalog = generate_catalog(150, 3, 2);
    auto exclusive_count = [&](double fraction, std::uint64_t seed) {
        auto records = generate_interactions(catalog, default_profiles(3, fraction), 30, 4, seed);
        std::set<std::string> in_a, in_b;
        for (const auto& r : records) (r.scenario_id == "A" ? in_a : in_b).insert(r.item_id);
        std::size_t c = 0;
        for (const auto& id : in_a)
            if (!in_b.contains(id)) ++c;
        for (const auto& id : in_b)
            if (!in_a.contains(id)) ++c;
        return c;
    };
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL})
        CHECK(exclusive_count(0.0, seed) <= exclusive_count(0.3, seed));
}

TEST_CASE("generation rejects bad inputs") {
    auto catalog = generate_catalog(10, 2, 1);
    CHECK_THROWS_AS(generate_interactions({}, default_profiles(2, 0.1), 2, 1, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_interactions(catalog, {}, 2, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_interactions(catalog, default_profiles(2, 0.1), 0, 1, 1),
                    std::invalid_argument);
    ScenarioProfile bad;
    bad.scenario_id = "X";
    bad.exposure_distribution = {0.0, 0.0};
    CHECK_THROWS_AS(generate_interactions(catalog, {bad}, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("catalog TSV round-trips") {
    auto catalog = generate_catalog(25, 3, 4);
    std::ostringstream os;
    write_catalog(os, catalog);
    std::istringstream is(os.str());
    auto back = parse_catalog(is);
    REQUIRE(back.size() == catalog.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].item_id == catalog[i].item_id);
        CHECK(back[i].keyword == catalog[i].keyword);
        CHECK(back[i].tag == catalog[i].tag);
        CHECK(back[i].duration_s == catalog[i].duration_s);
        CHECK(back[i].topic == catalog[i].topic);
    }
}
