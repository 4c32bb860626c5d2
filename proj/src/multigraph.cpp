#include "mgfn/multigraph.hpp"

#include "mgfn/bytes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace mgfn {

std::uint32_t Csr::lookup(NodeId i, NodeId j) const {
    auto nbrs = row_nbr(i);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), j);
    if (it == nbrs.end() || *it != j) return 0;
    return count[offsets[i] + (it - nbrs.begin())];
}

std::uint64_t CrossScenarioMultiGraph::num_edges() const {
    std::uint64_t m = 0;
    for (const auto& a : out_adj) m += a.num_edges();
    return m;
}

std::optional<NodeId> CrossScenarioMultiGraph::find_node(const std::string& item_id) const {
    auto it = std::lower_bound(item_ids.begin(), item_ids.end(), item_id);
    if (it == item_ids.end() || *it != item_id) return std::nullopt;
    return static_cast<NodeId>(it - item_ids.begin());
}

int CrossScenarioMultiGraph::find_scenario(const std::string& scenario_id) const {
    for (std::size_t s = 0; s < scenario_ids.size(); ++s)
        if (scenario_ids[s] == scenario_id) return static_cast<int>(s);
    return -1;
}

int CrossScenarioMultiGraph::require_scenario(const std::string& scenario_id) const {
    int s = find_scenario(scenario_id);
    if (s < 0) throw std::invalid_argument("unknown scenario id: " + scenario_id);
    return s;
}

std::uint64_t CrossScenarioMultiGraph::total_degree_w(NodeId v) const {
    std::uint64_t d = 0;
    for (std::size_t s = 0; s < num_scenarios(); ++s)
        d += in_degree_w[s][v] + out_degree_w[s][v];
    return d;
}

void CrossScenarioMultiGraph::finalize() {
    const std::size_t n = num_nodes();
    const std::size_t ns = num_scenarios();
    in_adj.assign(ns, {});
    in_degree_w.assign(ns, std::vector<std::uint64_t>(n, 0));
    out_degree_w.assign(ns, std::vector<std::uint64_t>(n, 0));
    in_norm_denom.assign(ns, std::vector<double>(n, 0.0));

    for (std::size_t s = 0; s < ns; ++s) {
        const Csr& out = out_adj[s];
        Csr& in = in_adj[s];
        std::vector<std::uint64_t> in_count(n, 0);
        for (NodeId i = 0; i < n; ++i) {
            auto nbrs = out.row_nbr(i);
            auto cnts = out.row_count(i);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                ++in_count[nbrs[k]];
                out_degree_w[s][i] += cnts[k];
                in_degree_w[s][nbrs[k]] += cnts[k];
            }
        }
        in.offsets.assign(n + 1, 0);
        for (NodeId i = 0; i < n; ++i) in.offsets[i + 1] = in.offsets[i] + in_count[i];
        in.nbr.resize(out.nbr.size());
        in.count.resize(out.count.size());
        std::vector<std::uint64_t> cursor(in.offsets.begin(), in.offsets.end() - 1);
        // out rows are scanned in (src, dst) order, so each in-row fills in
        // ascending src order without an extra sort
        for (NodeId i = 0; i < n; ++i) {
            auto nbrs = out.row_nbr(i);
            auto cnts = out.row_count(i);
            for (std::size_t k = 0; k < nbrs.size(); ++k) {
                std::uint64_t pos = cursor[nbrs[k]]++;
                in.nbr[pos] = i;
                in.count[pos] = cnts[k];
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            double denom = 0.0;
            for (std::uint32_t c : in.row_count(i)) denom += std::log1p(static_cast<double>(c));
            in_norm_denom[s][i] = denom;
        }
    }

    log_degree.resize(n);
    for (NodeId v = 0; v < n; ++v)
        log_degree[v] = std::log1p(static_cast<double>(total_degree_w(v)));
}

ScenarioSubgraph scenario_subgraph(const CrossScenarioMultiGraph& g,
                                   const std::string& scenario_id) {
    return ScenarioSubgraph(g, static_cast<std::size_t>(g.require_scenario(scenario_id)));
}

double normalize_weight(std::uint32_t count, std::span<const std::uint32_t> in_neighborhood) {
    double denom = 0.0;
    for (std::uint32_t c : in_neighborhood) denom += std::log1p(static_cast<double>(c));
    return std::log1p(static_cast<double>(count)) / denom;
}

double edge_weight(const CrossScenarioMultiGraph& g, std::size_t s, NodeId dst,
                   std::uint32_t count, WeightMode mode) {
    if (mode == WeightMode::kRaw) return static_cast<double>(count);
    return std::log1p(static_cast<double>(count)) / g.in_norm_denom[s][dst];
}

std::vector<SampledNeighbor> sample_in_neighbors(const CrossScenarioMultiGraph& g, std::size_t s,
                                                 NodeId node, std::uint32_t fanout, Rng& rng,
                                                 WeightMode mode) {
    if (fanout == 0) throw std::invalid_argument("sample_in_neighbors: fanout must be >= 1");
    auto nbrs = g.in_adj[s].row_nbr(node);
    auto cnts = g.in_adj[s].row_count(node);
    std::vector<SampledNeighbor> out;
    if (nbrs.size() <= fanout) {
        out.reserve(nbrs.size());
        for (std::size_t k = 0; k < nbrs.size(); ++k)
            out.push_back({nbrs[k], edge_weight(g, s, node, cnts[k], mode)});
        return out;
    }
    // sequential weighted draws without replacement, prob proportional to
    // log1p(count) renormalized after each pick
    std::vector<std::uint32_t> remaining(nbrs.size());
    std::vector<double> w(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
        remaining[k] = static_cast<std::uint32_t>(k);
        w[k] = std::log1p(static_cast<double>(cnts[k]));
    }
    double total = 0.0;
    for (double x : w) total += x;
    out.reserve(fanout);
    for (std::uint32_t pick = 0; pick < fanout; ++pick) {
        double r = rng.uniform() * total;
        std::size_t chosen = remaining.size() - 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            acc += w[remaining[k]];
            if (r < acc) {
                chosen = k;
                break;
            }
        }
        std::uint32_t idx = remaining[chosen];
        out.push_back({nbrs[idx], edge_weight(g, s, node, cnts[idx], mode)});
        total -= w[idx];
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    // slot order within a row is ascending by source for reproducible blocks
    std::sort(out.begin(), out.end(),
              [](const SampledNeighbor& a, const SampledNeighbor& b) { return a.node < b.node; });
    return out;
}

SampledBlock build_block(const CrossScenarioMultiGraph& g, std::span<const NodeId> seeds,
                         std::span<const std::uint32_t> fanouts, Rng& rng, WeightMode mode) {
    const std::uint32_t L = static_cast<std::uint32_t>(fanouts.size());
    const std::size_t ns = g.num_scenarios();

    SampledBlock block;
    block.num_layers = L;
    block.frontier.resize(L + 1);
    block.edges.assign(L, std::vector<BlockEdges>(ns));

    std::unordered_map<NodeId, std::uint32_t> slot_of;
    // frontiers are nested (frontier[l-1] contains frontier[l]), so one
    // monotone membership flag per slot covers every phase
    std::vector<std::uint8_t> in_frontier;
    auto slot_for = [&](NodeId v) {
        auto [it, inserted] = slot_of.emplace(v, static_cast<std::uint32_t>(block.node_ids.size()));
        if (inserted) {
            block.node_ids.push_back(v);
            in_frontier.push_back(0);
        }
        return it->second;
    };

    for (NodeId v : seeds) {
        std::uint32_t slot = slot_for(v);
        if (!in_frontier[slot]) {
            in_frontier[slot] = 1;
            block.frontier[L].push_back(slot);
        }
    }

    for (std::uint32_t l = L; l >= 1; --l) {
        const auto& dst_frontier = block.frontier[l];
        auto& next = block.frontier[l - 1];
        next = dst_frontier;  // self path: layer l reads its own layer-(l-1) value
        std::vector<std::vector<std::vector<SampledNeighbor>>> sampled(
            ns, std::vector<std::vector<SampledNeighbor>>(dst_frontier.size()));
        for (std::size_t di = 0; di < dst_frontier.size(); ++di) {
            NodeId dst = block.node_ids[dst_frontier[di]];
            for (std::size_t s = 0; s < ns; ++s)
                sampled[s][di] = sample_in_neighbors(g, s, dst, fanouts[l - 1], rng, mode);
        }
        for (std::size_t s = 0; s < ns; ++s) {
            BlockEdges& e = block.edges[l - 1][s];
            e.dst_offsets.assign(dst_frontier.size() + 1, 0);
            for (std::size_t di = 0; di < dst_frontier.size(); ++di) {
                for (const SampledNeighbor& nb : sampled[s][di]) {
                    std::uint32_t src_slot = slot_for(nb.node);
                    if (!in_frontier[src_slot]) {
                        in_frontier[src_slot] = 1;
                        next.push_back(src_slot);
                    }
                    e.src_slot.push_back(src_slot);
                    e.weight.push_back(nb.weight);
                }
                e.dst_offsets[di + 1] = e.src_slot.size();
            }
        }
    }
    return block;
}

// ---------------------------------------------------------------------------
// binary image

namespace {

constexpr char kMagic[4] = {'C', 'S', 'M', 'G'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize(const CrossScenarioMultiGraph& g, const std::string& header) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.str(header);
    const std::uint32_t n = static_cast<std::uint32_t>(g.num_nodes());
    const std::uint32_t ns = static_cast<std::uint32_t>(g.num_scenarios());
    w.u32(n);
    w.u32(ns);
    w.u32(g.hash_buckets);
    for (const auto& id : g.item_ids) w.str(id);
    for (NodeId i = 0; i < n; ++i) w.u32(g.kw_bucket[i]);
    for (NodeId i = 0; i < n; ++i) w.u32(g.tag_bucket[i]);
    for (NodeId i = 0; i < n; ++i) w.u32(g.id_bucket[i]);
    for (NodeId i = 0; i < n; ++i) w.f64(g.log_duration[i]);
    for (std::uint32_t s = 0; s < ns; ++s) {
        w.str(g.scenario_ids[s]);
        w.raw(g.watched[s].data(), n);
        const Csr& a = g.out_adj[s];
        w.u64(a.num_edges());
        for (std::uint64_t off : a.offsets) w.u64(off);
        for (NodeId v : a.nbr) w.u32(v);
        for (std::uint32_t c : a.count) w.u32(c);
    }
    return w.bytes;
}

CrossScenarioMultiGraph deserialize(std::span<const std::uint8_t> bytes, std::string* header_out) {
    ByteReader r{bytes, 0, "graph image"};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw SerializeError("not a graph file (bad magic)");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw SerializeError("unsupported graph file version " + std::to_string(version));
    std::string header = r.str();
    if (header_out) *header_out = header;

    CrossScenarioMultiGraph g;
    const std::uint32_t n = r.u32();
    const std::uint32_t ns = r.u32();
    g.hash_buckets = r.u32();
    g.item_ids.resize(n);
    for (auto& id : g.item_ids) id = r.str();
    g.kw_bucket.resize(n);
    g.tag_bucket.resize(n);
    g.id_bucket.resize(n);
    g.log_duration.resize(n);
    for (auto& v : g.kw_bucket) v = r.u32();
    for (auto& v : g.tag_bucket) v = r.u32();
    for (auto& v : g.id_bucket) v = r.u32();
    for (auto& v : g.log_duration) v = r.f64();
    g.scenario_ids.resize(ns);
    g.watched.resize(ns);
    g.out_adj.resize(ns);
    for (std::uint32_t s = 0; s < ns; ++s) {
        g.scenario_ids[s] = r.str();
        g.watched[s].resize(n);
        r.raw(g.watched[s].data(), n);
        Csr& a = g.out_adj[s];
        std::uint64_t m = r.u64();
        a.offsets.resize(static_cast<std::size_t>(n) + 1);
        for (auto& off : a.offsets) off = r.u64();
        if (a.offsets[0] != 0 || a.offsets[n] != m) throw SerializeError("inconsistent CSR offsets");
        a.nbr.resize(m);
        a.count.resize(m);
        for (auto& v : a.nbr) {
            v = r.u32();
            if (v >= n) throw SerializeError("node index out of range");
        }
        for (auto& c : a.count) {
            c = r.u32();
            if (c == 0) throw SerializeError("edge count must be >= 1");
        }
    }
    r.expect_end();
    g.finalize();
    return g;
}

void save_graph(const std::string& path, const CrossScenarioMultiGraph& g,
                const std::string& header) {
    write_file_bytes(path, serialize(g, header));
}

CrossScenarioMultiGraph load_graph(const std::string& path, std::string* header_out) {
    return deserialize(read_file_bytes(path), header_out);
}

CrossScenarioMultiGraph restrict_to_scenario(const CrossScenarioMultiGraph& g,
                                             const std::string& scenario_id) {
    const auto s = static_cast<std::size_t>(g.require_scenario(scenario_id));
    const std::size_t n = g.num_nodes();

    std::vector<NodeId> keep;
    std::vector<std::uint32_t> new_index(n, UINT32_MAX);
    for (NodeId v = 0; v < n; ++v)
        if (g.watched[s][v]) {
            new_index[v] = static_cast<std::uint32_t>(keep.size());
            keep.push_back(v);
        }

    CrossScenarioMultiGraph out;
    out.scenario_ids = {scenario_id};
    out.hash_buckets = g.hash_buckets;
    out.item_ids.reserve(keep.size());
    for (NodeId v : keep) {
        out.item_ids.push_back(g.item_ids[v]);
        out.kw_bucket.push_back(g.kw_bucket[v]);
        out.tag_bucket.push_back(g.tag_bucket[v]);
        out.id_bucket.push_back(g.id_bucket[v]);
        out.log_duration.push_back(g.log_duration[v]);
    }
    out.watched = {std::vector<std::uint8_t>(keep.size(), 1)};
    Csr a;
    a.offsets.assign(keep.size() + 1, 0);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        NodeId v = keep[k];
        auto nbrs = g.out_adj[s].row_nbr(v);
        auto cnts = g.out_adj[s].row_count(v);
        for (std::size_t e = 0; e < nbrs.size(); ++e) {
            a.nbr.push_back(new_index[nbrs[e]]);  // endpoints of s-edges are watched in s
            a.count.push_back(cnts[e]);
        }
        a.offsets[k + 1] = a.nbr.size();
    }
    out.out_adj = {std::move(a)};
    out.finalize();
    return out;
}

CrossScenarioMultiGraph collapse_scenarios(const CrossScenarioMultiGraph& g,
                                           const std::string& merged_id) {
    const std::size_t n = g.num_nodes();
    CrossScenarioMultiGraph out;
    out.item_ids = g.item_ids;
    out.scenario_ids = {merged_id};
    out.hash_buckets = g.hash_buckets;
    out.kw_bucket = g.kw_bucket;
    out.tag_bucket = g.tag_bucket;
    out.id_bucket = g.id_bucket;
    out.log_duration = g.log_duration;
    std::vector<std::uint8_t> watched(n, 0);
    for (NodeId v = 0; v < n; ++v)
        for (std::size_t s = 0; s < g.num_scenarios(); ++s)
            if (g.watched[s][v]) watched[v] = 1;
    out.watched = {std::move(watched)};

    Csr a;
    a.offsets.assign(n + 1, 0);
    std::vector<std::pair<NodeId, std::uint64_t>> row;
    for (NodeId v = 0; v < n; ++v) {
        row.clear();
        for (std::size_t s = 0; s < g.num_scenarios(); ++s) {
            auto nbrs = g.out_adj[s].row_nbr(v);
            auto cnts = g.out_adj[s].row_count(v);
            for (std::size_t e = 0; e < nbrs.size(); ++e) row.emplace_back(nbrs[e], cnts[e]);
        }
        std::sort(row.begin(), row.end());
        for (std::size_t e = 0; e < row.size(); ++e) {
            if (e > 0 && row[e].first == a.nbr.back()) {
                a.count.back() += static_cast<std::uint32_t>(row[e].second);
            } else {
                a.nbr.push_back(row[e].first);
                a.count.push_back(static_cast<std::uint32_t>(row[e].second));
            }
        }
        a.offsets[v + 1] = a.nbr.size();
    }
    out.out_adj = {std::move(a)};
    out.finalize();
    return out;
}

}  // namespace mgfn
