#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "mgfn/embedding_table.hpp"
#include "mgfn/multigraph.hpp"
#include "mgfn/records.hpp"
#include "mgfn/rng.hpp"

namespace mgfn {

// Exact top-k inner-product search over the whole table. Ties break by
// item id ascending.
class ExactIndex {
public:
    explicit ExactIndex(const EmbeddingTable& table);

    struct Hit {
        std::size_t row;
        double score;
    };
    // `exclude_row` drops one row (the query item itself); pass npos to keep all.
    std::vector<Hit> top_k(const Eigen::RowVectorXd& query, std::size_t k,
                           std::size_t exclude_row = npos) const;

    const EmbeddingTable& table() const { return *table_; }
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    const EmbeddingTable* table_;
};

struct UserQueue {
    std::string user_id;
    std::vector<std::string> items;                 // <= queue capacity, most recent last
    std::unordered_set<std::string> history;        // collision filter, superset of items
};

enum class ScoreAggregation { kMax, kSum };

struct RetrievalConfig {
    std::uint32_t per_query_k = 15;
    std::uint32_t final_k = 100;
    std::uint32_t queue_len = 20;
    ScoreAggregation aggregation = ScoreAggregation::kMax;
};

// The retrieval strategy: per queue item fetch the per_query_k most similar
// items (query excluded), pool the candidates, drop watch-history collisions,
// score survivors across all queue items, return the final_k best. Ties break
// by item id ascending.
std::vector<std::string> retrieve(const UserQueue& queue, const ExactIndex& index,
                                  const RetrievalConfig& cfg);

// Queues of the `queue_len` most recently watched distinct items per user in
// `scenario_id` (most recent kept on rewatch); history = the user's full
// watch set in that scenario.
std::vector<UserQueue> build_user_queues(const std::vector<InteractionRecord>& train_records,
                                         const std::string& scenario_id, std::uint32_t queue_len);

struct EvalReport {
    double precision_at_k = 0.0;
    double recall_at_k = 0.0;
    std::size_t user_count = 0;
    std::uint32_t k = 100;
    std::vector<std::pair<std::string, std::uint32_t>> per_user_hits;

    std::uint64_t outer_watch_count = 0;        // validation watches of retrieved exclusives
    std::uint64_t outer_unique_items = 0;       // distinct exclusives retrieved and watched
    std::uint64_t outer_retrieval_presence = 0; // exclusive occurrences across retrieval lists
    double edge_auc = -1.0;                     // < 0 when not computed
};

// precision@k / recall@k over users that appear in both maps (the caller
// excludes ineligible users beforehand). Errors when no user qualifies.
EvalReport precision_recall_at_k(
    const std::map<std::string, std::vector<std::string>>& retrievals_per_user,
    const std::map<std::string, std::set<std::string>>& validation_per_user, std::uint32_t k);

struct OuterScenarioMetrics {
    std::uint64_t watch_count = 0;
    std::uint64_t unique_items = 0;
    std::uint64_t retrieval_presence = 0;
};

// Offline proxy of the outer-scenario preference metrics: an exclusive item
// counts as watched when it was retrieved for a user and shows up in that
// user's validation watches.
OuterScenarioMetrics outer_scenario_metrics(
    const std::map<std::string, std::vector<std::string>>& retrievals_per_user,
    const std::unordered_set<std::string>& source_exclusive_items,
    const std::map<std::string, std::vector<std::string>>& validation_watches_per_user);

// Items watched in `source` and never in `target` within the given window.
std::unordered_set<std::string> source_exclusive_items(
    const std::vector<InteractionRecord>& train_records, const std::string& source,
    const std::string& target);

// Ranking quality on held-out transitions: P(score(pos) > score(neg)) with one
// sampled non-edge negative per positive.
double edge_auc(const CrossScenarioMultiGraph& g, const EmbeddingTable& table,
                const std::vector<InteractionRecord>& validation_records, std::uint64_t seed);

struct PcaPoint {
    std::string item_id;
    std::string tag;
    std::string source;
    double x = 0.0;
    double y = 0.0;
};

// Projects selected embeddings onto their top-2 principal components.
// Items are restricted to the `top_t` most frequent tags with up to
// `sample_n` deterministic samples per tag.
std::vector<PcaPoint> pca_project(const EmbeddingTable& table,
                                  const std::map<std::string, std::string>& item_tags,
                                  const std::map<std::string, std::string>& item_sources,
                                  std::uint32_t top_t, std::uint32_t sample_n, std::uint64_t seed);

void write_pca_csv(std::ostream& out, const std::vector<PcaPoint>& points);

// Everything the offline protocol produces for one embedding table.
struct EvaluationOptions {
    RetrievalConfig retrieval;
    std::string target_scenario;
    std::string source_scenario;  // may be empty: outer metrics reported as 0
    const CrossScenarioMultiGraph* graph = nullptr;  // enables edge AUC when set
    std::uint64_t seed = 42;
};

EvalReport evaluate_embeddings(const EmbeddingTable& table,
                               const std::vector<InteractionRecord>& train_records,
                               const std::vector<InteractionRecord>& validation_records,
                               const EvaluationOptions& options);

void write_eval_report(std::ostream& out, const EvalReport& r);

}  // namespace mgfn
