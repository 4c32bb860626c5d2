#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mgfn/graph_build.hpp"
#include "mgfn/multigraph.hpp"
#include "mgfn/records.hpp"
#include "mgfn/rng.hpp"
#include "mgfn/synthgen.hpp"

namespace mgfn::test {

inline ItemMeta item(const std::string& id, const std::string& kw = "kw", const std::string& tag = "tag",
                     std::uint32_t duration = 60, std::uint32_t topic = 0) {
    return ItemMeta{id, kw, tag, duration, topic};
}

inline std::vector<ItemMeta> catalog_of(const std::vector<std::string>& ids) {
    std::vector<ItemMeta> c;
    for (const auto& id : ids) c.push_back(item(id));
    return c;
}

inline InteractionRecord rec(const std::string& user, const std::string& item_id,
                             const std::string& scenario, std::int64_t ts, double cr = 0.8) {
    return InteractionRecord{user, item_id, scenario, ts, cr};
}

inline TransitionPair pair(const std::string& src, const std::string& dst,
                           const std::string& scenario) {
    return TransitionPair{src, dst, scenario};
}

// Graph straight from a pair list; the catalog is synthesized from the ids.
inline CrossScenarioMultiGraph graph_from_pairs(const std::vector<TransitionPair>& pairs,
                                                const std::vector<InteractionRecord>& records = {},
                                                std::uint32_t hash_buckets = 64) {
    std::set<std::string> ids;
    for (const auto& p : pairs) {
        ids.insert(p.src);
        ids.insert(p.dst);
    }
    for (const auto& r : records) ids.insert(r.item_id);
    std::vector<ItemMeta> catalog;
    std::uint32_t k = 0;
    for (const auto& id : ids) catalog.push_back(item(id, "kw" + id, "tag" + id, 30 + (k++ % 90)));
    return build_csmg(pairs, records, catalog, hash_buckets);
}

// Random multi-scenario graph for property tests: `n` nodes, every node
// watched everywhere, edges drawn independently per scenario.
inline CrossScenarioMultiGraph random_graph(std::uint32_t n, std::uint32_t n_scenarios,
                                            double edges_per_node, std::uint64_t seed,
                                            std::uint32_t hash_buckets = 64,
                                            std::uint32_t max_count = 4) {
    Rng rng(seed);
    std::vector<std::string> ids;
    for (std::uint32_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%04u", i);
        ids.emplace_back(buf);
    }
    std::vector<TransitionPair> pairs;
    std::vector<InteractionRecord> records;
    for (std::uint32_t s = 0; s < n_scenarios; ++s) {
        std::string scen(1, static_cast<char>('A' + s));
        for (std::uint32_t i = 0; i < n; ++i)
            records.push_back(rec("u0", ids[i], scen, static_cast<std::int64_t>(i) * 10000));
        auto n_edges = static_cast<std::uint64_t>(edges_per_node * n);
        for (std::uint64_t e = 0; e < n_edges; ++e) {
            auto src = static_cast<std::uint32_t>(rng.below(n));
            auto dst = static_cast<std::uint32_t>(rng.below(n));
            if (src == dst) continue;
            auto reps = 1 + rng.below(max_count);
            for (std::uint64_t r = 0; r < reps; ++r) pairs.push_back({ids[src], ids[dst], scen});
        }
    }
    std::vector<ItemMeta> catalog;
    for (std::uint32_t i = 0; i < n; ++i)
        catalog.push_back(item(ids[i], "kw" + ids[i], "tag" + std::to_string(i % 7), 30 + i % 90));
    return build_csmg(pairs, records, catalog, hash_buckets);
}

}  // namespace mgfn::test
