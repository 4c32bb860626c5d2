#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgfn/rng.hpp"

namespace mgfn {

using NodeId = std::uint32_t;

struct SerializeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Compressed sparse row adjacency for one scenario. Rows and neighbor lists
// are sorted ascending, so edge lookups binary-search within a row.
struct Csr {
    std::vector<std::uint64_t> offsets;  // size num_nodes + 1
    std::vector<NodeId> nbr;
    std::vector<std::uint32_t> count;  // transition counts, all >= 1

    std::size_t row_size(NodeId i) const { return offsets[i + 1] - offsets[i]; }
    std::span<const NodeId> row_nbr(NodeId i) const {
        return {nbr.data() + offsets[i], row_size(i)};
    }
    std::span<const std::uint32_t> row_count(NodeId i) const {
        return {count.data() + offsets[i], row_size(i)};
    }
    std::uint64_t num_edges() const { return nbr.size(); }
    // count of edge i->j when rows are src (out-adjacency); 0 if absent
    std::uint32_t lookup(NodeId i, NodeId j) const;
};

// Directed multi-graph over items: one weighted adjacency per scenario plus
// raw node features. Immutable after finalize(); safe for concurrent reads.
struct CrossScenarioMultiGraph {
    std::vector<std::string> item_ids;      // node -> item id, lexicographically sorted
    std::vector<std::string> scenario_ids;  // lexicographically sorted, fixed fusion order
    std::uint32_t hash_buckets = 5000;

    // raw features: (keyword bucket, tag bucket, id bucket, log1p duration,
    // log1p total degree); the degree column is derived in finalize()
    std::vector<std::uint32_t> kw_bucket, tag_bucket, id_bucket;
    std::vector<double> log_duration;
    std::vector<double> log_degree;

    std::vector<Csr> out_adj;                         // per scenario, rows = src
    std::vector<std::vector<std::uint8_t>> watched;   // per scenario, node watched in window

    // derived by finalize()
    std::vector<Csr> in_adj;                             // rows = dst, sorted by src
    std::vector<std::vector<std::uint64_t>> in_degree_w;   // edge-weight units
    std::vector<std::vector<std::uint64_t>> out_degree_w;
    std::vector<std::vector<double>> in_norm_denom;  // sum of log1p(count) over full in-row

    std::size_t num_nodes() const { return item_ids.size(); }
    std::size_t num_scenarios() const { return scenario_ids.size(); }
    std::uint64_t num_edges() const;

    std::optional<NodeId> find_node(const std::string& item_id) const;
    int find_scenario(const std::string& scenario_id) const;  // -1 if unknown
    int require_scenario(const std::string& scenario_id) const;

    bool has_out_edge(std::size_t s, NodeId src, NodeId dst) const {
        return out_adj[s].lookup(src, dst) != 0;
    }
    // edge-weight degree summed over scenarios (Eq.-17 units)
    std::uint64_t total_degree_w(NodeId v) const;

    // Builds in-adjacency, degree tables, normalization denominators and the
    // log-degree feature column from out_adj. Must be called after mutation.
    void finalize();
};

// Read-only view of one scenario's in-adjacency (no copies).
class ScenarioSubgraph {
public:
    ScenarioSubgraph(const CrossScenarioMultiGraph& g, std::size_t s) : g_(g), s_(s) {}

    std::span<const NodeId> in_neighbors(NodeId i) const { return g_.in_adj[s_].row_nbr(i); }
    std::span<const std::uint32_t> in_counts(NodeId i) const {
        return g_.in_adj[s_].row_count(i);
    }
    std::uint32_t edge_count(NodeId src, NodeId dst) const {
        return g_.out_adj[s_].lookup(src, dst);
    }
    std::size_t scenario_index() const { return s_; }

private:
    const CrossScenarioMultiGraph& g_;
    std::size_t s_;
};

ScenarioSubgraph scenario_subgraph(const CrossScenarioMultiGraph& g,
                                   const std::string& scenario_id);

enum class WeightMode { kNormalized, kRaw };

// Normalized edge weight log1p(c) / sum_j log1p(c_j) over the FULL
// in-neighborhood of the destination (not the sampled subset).
double normalize_weight(std::uint32_t count, std::span<const std::uint32_t> in_neighborhood);

// Weight of edge (j -> i, s) whose count is `count`, under `mode`.
double edge_weight(const CrossScenarioMultiGraph& g, std::size_t s, NodeId dst,
                   std::uint32_t count, WeightMode mode);

struct SampledNeighbor {
    NodeId node;
    double weight;
};

// All in-neighbors when the row fits the fanout; otherwise `fanout` drawn
// without replacement with probability proportional to log1p(count).
// Weights are always computed over the full neighborhood.
std::vector<SampledNeighbor> sample_in_neighbors(const CrossScenarioMultiGraph& g, std::size_t s,
                                                 NodeId node, std::uint32_t fanout, Rng& rng,
                                                 WeightMode mode = WeightMode::kNormalized);

// Edges of one (layer, scenario), grouped per destination: segment k holds
// the sampled in-edges of the k-th node of that layer's destination frontier.
struct BlockEdges {
    std::vector<std::uint64_t> dst_offsets;  // size = frontier size + 1
    std::vector<std::uint32_t> src_slot;
    std::vector<double> weight;
};

// Layered 2-hop (in general L-hop) sampled neighborhood for one minibatch.
// Slot space is shared across layers; frontier[l] lists the slots whose
// layer-l latent values are defined, frontier[num_layers] being the seeds.
struct SampledBlock {
    std::uint32_t num_layers = 0;
    std::vector<NodeId> node_ids;                      // slot -> graph node
    std::vector<std::vector<std::uint32_t>> frontier;  // [0..num_layers]
    // edges[l][s]: edges feeding layer l+1 dst frontier[l+1], srcs hold
    // layer-l values
    std::vector<std::vector<BlockEdges>> edges;

    const std::vector<std::uint32_t>& seed_slots() const { return frontier[num_layers]; }
    std::size_t num_slots() const { return node_ids.size(); }
};

// Expansion from seeds inward; deterministic under a fixed rng. Duplicate
// seeds are collapsed to one slot. fanouts.size() defines the layer count;
// fanouts[l] applies to the edges feeding layer l+1.
SampledBlock build_block(const CrossScenarioMultiGraph& g, std::span<const NodeId> seeds,
                         std::span<const std::uint32_t> fanouts, Rng& rng,
                         WeightMode mode = WeightMode::kNormalized);

constexpr std::uint32_t kFullFanout = UINT32_MAX;  // no sampling, exact neighborhoods

// Versioned little-endian binary image; round-trips exactly. The header
// string travels with the graph (the CLI echoes its effective config there).
std::vector<std::uint8_t> serialize(const CrossScenarioMultiGraph& g,
                                    const std::string& header = "{}");
CrossScenarioMultiGraph deserialize(std::span<const std::uint8_t> bytes,
                                    std::string* header_out = nullptr);
void save_graph(const std::string& path, const CrossScenarioMultiGraph& g,
                const std::string& header = "{}");
CrossScenarioMultiGraph load_graph(const std::string& path, std::string* header_out = nullptr);

// Single-scenario graph containing only the nodes watched in `scenario_id`
// and that scenario's edges; degree features are recomputed.
CrossScenarioMultiGraph restrict_to_scenario(const CrossScenarioMultiGraph& g,
                                             const std::string& scenario_id);

// All scenarios merged into one by summing edge counts (data concatenation).
CrossScenarioMultiGraph collapse_scenarios(const CrossScenarioMultiGraph& g,
                                           const std::string& merged_id = "all");

}  // namespace mgfn
