#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mgfn/records.hpp"

namespace mgfn {

struct ItemMeta {
    std::string item_id;
    std::string keyword;
    std::string tag;
    std::uint32_t duration_s = 1;  // >= 1
    std::uint32_t topic = 0;       // generator-internal cluster label
};

struct ScenarioProfile {
    std::string scenario_id;
    std::vector<double> exposure_distribution;  // per-topic weights, >= 0, at least one > 0
    double exclusive_item_fraction = 0.0;       // in [0, 1]
    std::uint32_t sessions_per_user_per_day = 2;
};

// Deterministic synthetic catalog: topics near-uniform, keywords/tags drawn
// from per-topic vocabularies so same-topic items share vocabulary.
std::vector<ItemMeta> generate_catalog(std::uint32_t n_items, std::uint32_t n_topics,
                                       std::uint64_t seed);

// Multi-scenario interaction log. Each user keeps a persistent Dirichlet(0.3)
// topic-preference vector; sessions pick a topic by preference x scenario
// exposure, items by within-topic popularity; each scenario withholds its
// exclusive items from the others. Timestamps are strictly increasing per
// (user, scenario). Records are returned sorted by
// (timestamp, user_id, scenario_id, item_id).
std::vector<InteractionRecord> generate_interactions(const std::vector<ItemMeta>& catalog,
                                                     const std::vector<ScenarioProfile>& profiles,
                                                     std::uint32_t n_users, std::uint32_t n_days,
                                                     std::uint64_t seed);

// train = timestamp < cutoff_ts, validation = timestamp >= cutoff_ts.
std::pair<std::vector<InteractionRecord>, std::vector<InteractionRecord>> split_train_validation(
    const std::vector<InteractionRecord>& records, std::int64_t cutoff_ts);

// Default two-scenario setup used by the CLI: mirrored geometric exposure
// tilts over topics, shared session rate.
std::vector<ScenarioProfile> default_profiles(std::uint32_t n_topics, double exclusive_fraction,
                                              std::uint32_t sessions_per_user_per_day = 2);

// Catalog TSV: item_id, keyword, tag, duration_s, topic (no column header).
void write_catalog(std::ostream& out, const std::vector<ItemMeta>& catalog);
std::vector<ItemMeta> parse_catalog(std::istream& in);
std::vector<ItemMeta> parse_catalog_file(const std::string& path);

constexpr std::int64_t kSecondsPerDay = 86400;

}  // namespace mgfn
