#include "mgfn/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace mgfn {

std::uint32_t feature_bucket(const std::string& s, std::uint32_t buckets) {
    return static_cast<std::uint32_t>(hash_str(s) % buckets);
}

std::vector<InteractionRecord> clean_records(const std::vector<InteractionRecord>& records,
                                             const std::vector<ItemMeta>& catalog) {
    std::unordered_set<std::string> known;
    known.reserve(catalog.size() * 2);
    for (const auto& m : catalog) known.insert(m.item_id);

    std::unordered_set<std::string> seen;
    seen.reserve(records.size() * 2);
    std::vector<InteractionRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.completion_rate <= 0.03) continue;
        if (!known.contains(r.item_id)) continue;
        std::string key = r.user_id + '\t' + r.item_id + '\t' + r.scenario_id + '\t' +
                          std::to_string(r.timestamp);
        if (!seen.insert(std::move(key)).second) continue;
        out.push_back(r);
    }
    return out;
}

std::vector<TransitionPair> extract_transition_pairs(
    const std::vector<InteractionRecord>& records) {
    struct Watch {
        std::int64_t ts;
        const std::string* item;
    };
    // std::map keeps (user, scenario) groups in sorted order so the emitted
    // pair list is independent of input permutation within groups
    std::map<std::pair<std::string, std::string>, std::vector<Watch>> groups;
    for (const auto& r : records)
        groups[{r.user_id, r.scenario_id}].push_back({r.timestamp, &r.item_id});

    std::vector<TransitionPair> pairs;
    for (auto& [key, watches] : groups) {
        std::sort(watches.begin(), watches.end(), [](const Watch& a, const Watch& b) {
            return std::tie(a.ts, *a.item) < std::tie(b.ts, *b.item);
        });
        for (std::size_t k = 0; k + 1 < watches.size(); ++k) {
            if (watches[k + 1].ts - watches[k].ts >= 3600) continue;
            if (*watches[k].item == *watches[k + 1].item) continue;  // immediate rewatch
            pairs.push_back({*watches[k].item, *watches[k + 1].item, key.second});
        }
    }
    return pairs;
}

CrossScenarioMultiGraph build_csmg(const std::vector<TransitionPair>& pairs,
                                   const std::vector<InteractionRecord>& cleaned_records,
                                   const std::vector<ItemMeta>& catalog,
                                   std::uint32_t hash_buckets) {
    if (hash_buckets == 0) throw std::invalid_argument("build_csmg: hash_buckets must be >= 1");

    std::unordered_map<std::string, const ItemMeta*> meta;
    meta.reserve(catalog.size() * 2);
    for (const auto& m : catalog) meta[m.item_id] = &m;

    // node set: every watched item plus every pair endpoint
    std::vector<std::string> ids;
    {
        std::unordered_set<std::string> uniq;
        auto add = [&](const std::string& id) {
            if (!meta.contains(id))
                throw std::invalid_argument("build_csmg: item not in catalog: " + id);
            if (uniq.insert(id).second) ids.push_back(id);
        };
        for (const auto& r : cleaned_records) add(r.item_id);
        for (const auto& p : pairs) {
            add(p.src);
            add(p.dst);
        }
    }
    std::sort(ids.begin(), ids.end());

    std::vector<std::string> scenarios;
    {
        std::unordered_set<std::string> uniq;
        for (const auto& r : cleaned_records)
            if (uniq.insert(r.scenario_id).second) scenarios.push_back(r.scenario_id);
        for (const auto& p : pairs)
            if (uniq.insert(p.scenario_id).second) scenarios.push_back(p.scenario_id);
    }
    std::sort(scenarios.begin(), scenarios.end());

    CrossScenarioMultiGraph g;
    g.item_ids = std::move(ids);
    g.scenario_ids = std::move(scenarios);
    g.hash_buckets = hash_buckets;

    const std::size_t n = g.item_ids.size();
    std::unordered_map<std::string, NodeId> index;
    index.reserve(n * 2);
    for (NodeId v = 0; v < n; ++v) index[g.item_ids[v]] = v;

    g.kw_bucket.resize(n);
    g.tag_bucket.resize(n);
    g.id_bucket.resize(n);
    g.log_duration.resize(n);
    for (NodeId v = 0; v < n; ++v) {
        const ItemMeta& m = *meta[g.item_ids[v]];
        g.kw_bucket[v] = feature_bucket(m.keyword, hash_buckets);
        g.tag_bucket[v] = feature_bucket(m.tag, hash_buckets);
        g.id_bucket[v] = feature_bucket(m.item_id, hash_buckets);
        g.log_duration[v] = std::log1p(static_cast<double>(m.duration_s));
    }

    const std::size_t ns = g.scenario_ids.size();
    std::unordered_map<std::string, std::size_t> scen_index;
    for (std::size_t s = 0; s < ns; ++s) scen_index[g.scenario_ids[s]] = s;

    g.watched.assign(ns, std::vector<std::uint8_t>(n, 0));
    for (const auto& r : cleaned_records)
        g.watched[scen_index[r.scenario_id]][index[r.item_id]] = 1;
    for (const auto& p : pairs) {
        g.watched[scen_index[p.scenario_id]][index[p.src]] = 1;
        g.watched[scen_index[p.scenario_id]][index[p.dst]] = 1;
    }

    // accumulate counts, then emit adjacency sorted by (src, dst)
    std::vector<std::map<std::pair<NodeId, NodeId>, std::uint32_t>> counts(ns);
    for (const auto& p : pairs) {
        NodeId src = index[p.src];
        NodeId dst = index[p.dst];
        if (src == dst) continue;
        ++counts[scen_index[p.scenario_id]][{src, dst}];
    }
    g.out_adj.resize(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        Csr& a = g.out_adj[s];
        a.offsets.assign(n + 1, 0);
        for (const auto& [edge, c] : counts[s]) ++a.offsets[edge.first + 1];
        for (std::size_t row = 0; row < n; ++row) a.offsets[row + 1] += a.offsets[row];
        a.nbr.reserve(counts[s].size());
        a.count.reserve(counts[s].size());
        // map iteration is already in (src, dst) order
        for (const auto& [edge, c] : counts[s]) {
            a.nbr.push_back(edge.second);
            a.count.push_back(c);
        }
    }

    g.finalize();
    return g;
}

EdgeCompositionReport classify_edges(const CrossScenarioMultiGraph& g,
                                     const std::string& source_scenario,
                                     const std::string& target_scenario) {
    const auto src_s = static_cast<std::size_t>(g.require_scenario(source_scenario));
    const auto tgt_s = static_cast<std::size_t>(g.require_scenario(target_scenario));

    EdgeCompositionReport r;
    r.source_scenario = source_scenario;
    r.target_scenario = target_scenario;
    r.total_target_edges = g.out_adj[tgt_s].num_edges();

    const Csr& out = g.out_adj[src_s];
    const auto& watched_tgt = g.watched[tgt_s];
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        for (NodeId j : out.row_nbr(i)) {
            ++r.total_source_edges;
            if (g.has_out_edge(tgt_s, i, j))
                ++r.co_shared;
            else if (watched_tgt[i] || watched_tgt[j])
                ++r.with_co_shared;
            else
                ++r.exclusive;
        }
    }
    return r;
}

double EdgeCompositionReport::pct_co_shared() const {
    return total_source_edges ? 100.0 * static_cast<double>(co_shared) /
                                    static_cast<double>(total_source_edges)
                              : 0.0;
}
double EdgeCompositionReport::pct_with_co_shared() const {
    return total_source_edges ? 100.0 * static_cast<double>(with_co_shared) /
                                    static_cast<double>(total_source_edges)
                              : 0.0;
}
double EdgeCompositionReport::pct_exclusive() const {
    return total_source_edges ? 100.0 * static_cast<double>(exclusive) /
                                    static_cast<double>(total_source_edges)
                              : 0.0;
}

void write_edge_report(std::ostream& out, const EdgeCompositionReport& r) {
    char buf[160];
    out << "Edge composition, source=" << r.source_scenario << " target=" << r.target_scenario
        << "\n";
    std::snprintf(buf, sizeof(buf), "  co-shared edges of two scenarios      %12llu  (%.2f%%)\n",
                  static_cast<unsigned long long>(r.co_shared), r.pct_co_shared());
    out << buf;
    std::snprintf(buf, sizeof(buf), "  source-only, >=1 co-shared endpoint   %12llu  (%.2f%%)\n",
                  static_cast<unsigned long long>(r.with_co_shared), r.pct_with_co_shared());
    out << buf;
    std::snprintf(buf, sizeof(buf), "  source-only, source-exclusive items   %12llu  (%.2f%%)\n",
                  static_cast<unsigned long long>(r.exclusive), r.pct_exclusive());
    out << buf;
    std::snprintf(buf, sizeof(buf), "  edges in source scenario              %12llu  (100%%)\n",
                  static_cast<unsigned long long>(r.total_source_edges));
    out << buf;
    std::snprintf(buf, sizeof(buf), "  edges in target scenario              %12llu\n",
                  static_cast<unsigned long long>(r.total_target_edges));
    out << buf;
    out << "edge_report.source=" << r.source_scenario << "\n"
        << "edge_report.target=" << r.target_scenario << "\n"
        << "edge_report.co_shared=" << r.co_shared << "\n"
        << "edge_report.with_co_shared=" << r.with_co_shared << "\n"
        << "edge_report.exclusive=" << r.exclusive << "\n"
        << "edge_report.total_source_edges=" << r.total_source_edges << "\n"
        << "edge_report.total_target_edges=" << r.total_target_edges << "\n";
}

}  // namespace mgfn
