#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mgfn/multigraph.hpp"
#include "mgfn/records.hpp"
#include "mgfn/synthgen.hpp"

namespace mgfn {

struct TransitionPair {
    std::string src;
    std::string dst;
    std::string scenario_id;

    bool operator==(const TransitionPair&) const = default;
};

// Removes exact duplicates on (user, item, scenario, timestamp), records of
// items missing from the catalog, and records with completion_rate <= 0.03.
// Surviving records keep their input order.
std::vector<InteractionRecord> clean_records(const std::vector<InteractionRecord>& records,
                                             const std::vector<ItemMeta>& catalog);

// Per (user, scenario), watches sorted ascending by (timestamp, item_id);
// each adjacent pair closer than 3600 s becomes one transition. Immediate
// rewatches (src == dst) yield no pair.
std::vector<TransitionPair> extract_transition_pairs(const std::vector<InteractionRecord>& records);

// Assembles the multi-graph: nodes are all items seen in the cleaned records
// or in a pair; edge weights count transitions; features hash keyword/tag/id
// with 64-bit FNV-1a into `hash_buckets` buckets.
CrossScenarioMultiGraph build_csmg(const std::vector<TransitionPair>& pairs,
                                   const std::vector<InteractionRecord>& cleaned_records,
                                   const std::vector<ItemMeta>& catalog,
                                   std::uint32_t hash_buckets = 5000);

struct EdgeCompositionReport {
    std::string source_scenario;
    std::string target_scenario;
    std::uint64_t co_shared = 0;            // edge also present in target
    std::uint64_t with_co_shared = 0;       // source-only, >= 1 endpoint watched in target
    std::uint64_t exclusive = 0;            // source-only between source-exclusive items
    std::uint64_t total_source_edges = 0;   // distinct source edges
    std::uint64_t total_target_edges = 0;

    double pct_co_shared() const;
    double pct_with_co_shared() const;
    double pct_exclusive() const;
};

// Classifies every distinct source-scenario edge against the target scenario.
EdgeCompositionReport classify_edges(const CrossScenarioMultiGraph& g,
                                     const std::string& source_scenario,
                                     const std::string& target_scenario);

// Human-readable table followed by machine-readable key=value lines.
void write_edge_report(std::ostream& out, const EdgeCompositionReport& r);

std::uint32_t feature_bucket(const std::string& s, std::uint32_t buckets);

}  // namespace mgfn
