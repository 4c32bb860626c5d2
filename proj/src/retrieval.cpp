#include "mgfn/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mgfn/graph_build.hpp"

namespace mgfn {

ExactIndex::ExactIndex(const EmbeddingTable& table) : table_(&table) {
    if (table.size() == 0) throw std::invalid_argument("ExactIndex: empty embedding table");
    table.validate();
}

std::vector<ExactIndex::Hit> ExactIndex::top_k(const Eigen::RowVectorXd& query, std::size_t k,
                                               std::size_t exclude_row) const {
    const auto& t = *table_;
    Eigen::VectorXd scores = t.vectors * query.transpose();
    std::vector<Hit> hits;
    hits.reserve(t.size());
    for (std::size_t row = 0; row < t.size(); ++row) {
        if (row == exclude_row) continue;
        hits.push_back({row, scores(static_cast<Eigen::Index>(row))});
    }
    auto better = [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return t.ids[a.row] < t.ids[b.row];
    };
    if (k < hits.size()) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                          better);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
    return hits;
}

std::vector<std::string> retrieve(const UserQueue& queue, const ExactIndex& index,
                                  const RetrievalConfig& cfg) {
    if (queue.items.empty()) throw std::invalid_argument("retrieve: empty user queue");
    const EmbeddingTable& t = index.table();

    std::vector<std::size_t> query_rows;
    for (const auto& id : queue.items) {
        int row = t.row_of(id);
        if (row >= 0) query_rows.push_back(static_cast<std::size_t>(row));
    }

    // pool per-query top-k candidates, dedup, then drop history collisions
    std::vector<std::size_t> candidates;
    std::unordered_set<std::size_t> seen;
    for (std::size_t q : query_rows) {
        auto hits = index.top_k(t.vectors.row(static_cast<Eigen::Index>(q)), cfg.per_query_k, q);
        for (const auto& h : hits)
            if (seen.insert(h.row).second && !queue.history.contains(t.ids[h.row]))
                candidates.push_back(h.row);
    }

    struct Scored {
        std::size_t row;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (std::size_t c : candidates) {
        double best = -std::numeric_limits<double>::infinity();
        double sum = 0.0;
        for (std::size_t q : query_rows) {
            double s = t.vectors.row(static_cast<Eigen::Index>(c))
                           .dot(t.vectors.row(static_cast<Eigen::Index>(q)));
            best = std::max(best, s);
            sum += s;
        }
        scored.push_back({c, cfg.aggregation == ScoreAggregation::kMax ? best : sum});
    }
    std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return t.ids[a.row] < t.ids[b.row];
    });
    if (scored.size() > cfg.final_k) scored.resize(cfg.final_k);

    std::vector<std::string> out;
    out.reserve(scored.size());
    for (const auto& s : scored) out.push_back(t.ids[s.row]);
    return out;
}

std::vector<UserQueue> build_user_queues(const std::vector<InteractionRecord>& train_records,
                                         const std::string& scenario_id, std::uint32_t queue_len) {
    struct Watch {
        std::int64_t ts;
        const std::string* item;
    };
    std::map<std::string, std::vector<Watch>> per_user;
    for (const auto& r : train_records)
        if (r.scenario_id == scenario_id) per_user[r.user_id].push_back({r.timestamp, &r.item_id});

    std::vector<UserQueue> queues;
    queues.reserve(per_user.size());
    for (auto& [user, watches] : per_user) {
        std::sort(watches.begin(), watches.end(), [](const Watch& a, const Watch& b) {
            return std::tie(a.ts, *a.item) < std::tie(b.ts, *b.item);
        });
        UserQueue q;
        q.user_id = user;
        for (const auto& w : watches) q.history.insert(*w.item);
        // walk backwards keeping the most recent occurrence of each item
        std::unordered_set<std::string> in_queue;
        for (auto it = watches.rbegin(); it != watches.rend() && q.items.size() < queue_len; ++it)
            if (in_queue.insert(*it->item).second) q.items.push_back(*it->item);
        std::reverse(q.items.begin(), q.items.end());  // most recent last
        queues.push_back(std::move(q));
    }
    return queues;
}

EvalReport precision_recall_at_k(
    const std::map<std::string, std::vector<std::string>>& retrievals_per_user,
    const std::map<std::string, std::set<std::string>>& validation_per_user, std::uint32_t k) {
    EvalReport report;
    report.k = k;
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    for (const auto& [user, retrieved] : retrievals_per_user) {
        auto it = validation_per_user.find(user);
        if (it == validation_per_user.end() || it->second.empty()) continue;
        std::uint32_t hits = 0;
        std::size_t considered = std::min<std::size_t>(retrieved.size(), k);
        for (std::size_t i = 0; i < considered; ++i)
            if (it->second.contains(retrieved[i])) ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(k);
        recall_sum += static_cast<double>(hits) / static_cast<double>(it->second.size());
        report.per_user_hits.emplace_back(user, hits);
        ++report.user_count;
    }
    if (report.user_count == 0)
        throw std::runtime_error("evaluation: no user watched in both training and validation");
    report.precision_at_k = precision_sum / static_cast<double>(report.user_count);
    report.recall_at_k = recall_sum / static_cast<double>(report.user_count);
    return report;
}

OuterScenarioMetrics outer_scenario_metrics(
    const std::map<std::string, std::vector<std::string>>& retrievals_per_user,
    const std::unordered_set<std::string>& source_exclusive_items,
    const std::map<std::string, std::vector<std::string>>& validation_watches_per_user) {
    OuterScenarioMetrics m;
    std::set<std::string> unique_watched;
    for (const auto& [user, retrieved] : retrievals_per_user) {
        auto val_it = validation_watches_per_user.find(user);
        for (const auto& item : retrieved) {
            if (!source_exclusive_items.contains(item)) continue;
            ++m.retrieval_presence;
            if (val_it == validation_watches_per_user.end()) continue;
            auto watches = static_cast<std::uint64_t>(
                std::count(val_it->second.begin(), val_it->second.end(), item));
            if (watches > 0) {
                m.watch_count += watches;
                unique_watched.insert(item);
            }
        }
    }
    m.unique_items = unique_watched.size();
    return m;
}

std::unordered_set<std::string> source_exclusive_items(
    const std::vector<InteractionRecord>& train_records, const std::string& source,
    const std::string& target) {
    std::unordered_set<std::string> in_source, in_target;
    for (const auto& r : train_records) {
        if (r.scenario_id == source) in_source.insert(r.item_id);
        if (r.scenario_id == target) in_target.insert(r.item_id);
    }
    std::unordered_set<std::string> exclusive;
    for (const auto& id : in_source)
        if (!in_target.contains(id)) exclusive.insert(id);
    return exclusive;
}

double edge_auc(const CrossScenarioMultiGraph& g, const EmbeddingTable& table,
                const std::vector<InteractionRecord>& validation_records, std::uint64_t seed) {
    auto pairs = extract_transition_pairs(validation_records);
    Rng rng(mix_seed(seed, hash_str("edge_auc")));
    double score = 0.0;
    std::size_t counted = 0;
    for (const auto& p : pairs) {
        int head_row = table.row_of(p.src);
        int tail_row = table.row_of(p.dst);
        if (head_row < 0 || tail_row < 0) continue;
        auto head_node = g.find_node(p.src);
        int neg_row = -1;
        for (int attempt = 0; attempt < 100 && neg_row < 0; ++attempt) {
            auto cand = static_cast<std::size_t>(rng.below(table.size()));
            const std::string& cand_id = table.ids[cand];
            if (cand_id == p.src || cand_id == p.dst) continue;
            if (head_node) {
                auto cand_node = g.find_node(cand_id);
                if (cand_node) {
                    bool is_edge = false;
                    for (std::size_t s = 0; s < g.num_scenarios() && !is_edge; ++s)
                        is_edge = g.has_out_edge(s, *head_node, *cand_node);
                    if (is_edge) continue;
                }
            }
            neg_row = static_cast<int>(cand);
        }
        if (neg_row < 0) continue;
        const auto h = static_cast<Eigen::Index>(head_row);
        const double pos = table.vectors.row(h).dot(table.vectors.row(tail_row));
        const double neg = table.vectors.row(h).dot(table.vectors.row(neg_row));
        score += pos > neg ? 1.0 : (pos == neg ? 0.5 : 0.0);
        ++counted;
    }
    if (counted == 0) throw std::runtime_error("edge AUC: no held-out pairs cover the table");
    return score / static_cast<double>(counted);
}

std::vector<PcaPoint> pca_project(const EmbeddingTable& table,
                                  const std::map<std::string, std::string>& item_tags,
                                  const std::map<std::string, std::string>& item_sources,
                                  std::uint32_t top_t, std::uint32_t sample_n,
                                  std::uint64_t seed) {
    if (table.size() < 2) throw std::invalid_argument("pca: need at least 2 items");
    if (top_t == 0 || sample_n == 0)
        throw std::invalid_argument("pca: top_t and sample_n must be >= 1");

    // tag frequencies over the items present in the table
    std::map<std::string, std::vector<std::size_t>> by_tag;
    for (std::size_t row = 0; row < table.size(); ++row) {
        auto it = item_tags.find(table.ids[row]);
        if (it != item_tags.end()) by_tag[it->second].push_back(row);
    }
    if (by_tag.empty()) throw std::invalid_argument("pca: no item has a tag label");
    std::vector<std::pair<std::string, std::size_t>> tag_counts;
    for (const auto& [tag, rows] : by_tag) tag_counts.emplace_back(tag, rows.size());
    std::sort(tag_counts.begin(), tag_counts.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (tag_counts.size() > top_t) tag_counts.resize(top_t);

    struct Selected {
        std::size_t row;
        const std::string* tag;
    };
    std::vector<Selected> selected;
    for (std::size_t rank = 0; rank < tag_counts.size(); ++rank) {
        const std::string& tag = tag_counts[rank].first;
        std::vector<std::size_t> rows = by_tag[tag];  // already in item-id order
        if (rows.size() > sample_n) {
            Rng rng(mix_seed(seed, hash_str("pca"), rank));
            rng.shuffle(rows);
            rows.resize(sample_n);
            std::sort(rows.begin(), rows.end());
        }
        for (std::size_t row : rows) selected.push_back({row, &tag_counts[rank].first});
    }
    if (selected.size() < 2) throw std::invalid_argument("pca: fewer than 2 selected items");

    const Eigen::Index m = static_cast<Eigen::Index>(selected.size());
    const Eigen::Index d = table.vectors.cols();
    Eigen::MatrixXd x(m, d);
    for (Eigen::Index i = 0; i < m; ++i)
        x.row(i) = table.vectors.row(static_cast<Eigen::Index>(selected[i].row));
    Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(m - 1);
    if (cov.trace() <= 0.0) throw std::runtime_error("pca: degenerate (rank-0) embedding table");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");
    auto fix_sign = [](Eigen::VectorXd v) {
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        return v;
    };
    Eigen::VectorXd pc1 = fix_sign(eig.eigenvectors().col(d - 1));  // ascending eigenvalues
    Eigen::VectorXd pc2 = fix_sign(eig.eigenvectors().col(d - 2));

    std::vector<PcaPoint> points;
    points.reserve(selected.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& sel = selected[static_cast<std::size_t>(i)];
        PcaPoint p;
        p.item_id = table.ids[sel.row];
        p.tag = *sel.tag;
        auto src = item_sources.find(p.item_id);
        p.source = src == item_sources.end() ? "unknown" : src->second;
        p.x = x.row(i).dot(pc1);
        p.y = x.row(i).dot(pc2);
        points.push_back(std::move(p));
    }
    return points;
}

void write_pca_csv(std::ostream& out, const std::vector<PcaPoint>& points) {
    out << "item_id,tag,source,x,y\n";
    char buf[64];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), ",%.9g,%.9g", p.x, p.y);
        out << p.item_id << ',' << p.tag << ',' << p.source << buf << '\n';
    }
}

EvalReport evaluate_embeddings(const EmbeddingTable& table,
                               const std::vector<InteractionRecord>& train_records,
                               const std::vector<InteractionRecord>& validation_records,
                               const EvaluationOptions& options) {
    if (options.target_scenario.empty())
        throw std::invalid_argument("evaluation: target scenario must be set");

    auto queues =
        build_user_queues(train_records, options.target_scenario, options.retrieval.queue_len);

    std::map<std::string, std::set<std::string>> val_sets;
    std::map<std::string, std::vector<std::string>> val_watches;
    for (const auto& r : validation_records) {
        if (r.scenario_id != options.target_scenario) continue;
        val_sets[r.user_id].insert(r.item_id);
        val_watches[r.user_id].push_back(r.item_id);
    }

    ExactIndex index(table);
    std::map<std::string, std::vector<std::string>> retrievals;
    for (const auto& q : queues) {
        if (!val_sets.contains(q.user_id)) continue;  // eligibility: watches on both sides
        retrievals[q.user_id] = retrieve(q, index, options.retrieval);
    }

    EvalReport report = precision_recall_at_k(retrievals, val_sets, options.retrieval.final_k);

    if (!options.source_scenario.empty()) {
        auto exclusive = source_exclusive_items(train_records, options.source_scenario,
                                                options.target_scenario);
        auto outer = outer_scenario_metrics(retrievals, exclusive, val_watches);
        report.outer_watch_count = outer.watch_count;
        report.outer_unique_items = outer.unique_items;
        report.outer_retrieval_presence = outer.retrieval_presence;
    }
    if (options.graph)
        report.edge_auc = edge_auc(*options.graph, table, validation_records, options.seed);
    return report;
}

void write_eval_report(std::ostream& out, const EvalReport& r) {
    char buf[128];
    out << "Offline retrieval evaluation\n";
    std::snprintf(buf, sizeof(buf), "  users evaluated        %zu\n", r.user_count);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  precision@%-3u          %.6g\n", r.k, r.precision_at_k);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  recall@%-3u             %.6g\n", r.k, r.recall_at_k);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  outer-scenario watches %llu\n",
                  static_cast<unsigned long long>(r.outer_watch_count));
    out << buf;
    std::snprintf(buf, sizeof(buf), "  outer-scenario items   %llu\n",
                  static_cast<unsigned long long>(r.outer_unique_items));
    out << buf;
    std::snprintf(buf, sizeof(buf), "  outer items retrieved  %llu\n",
                  static_cast<unsigned long long>(r.outer_retrieval_presence));
    out << buf;
    if (r.edge_auc >= 0.0) {
        std::snprintf(buf, sizeof(buf), "  held-out edge AUC      %.6g\n", r.edge_auc);
        out << buf;
    }
    out << "eval.users=" << r.user_count << "\n";
    std::snprintf(buf, sizeof(buf), "eval.precision_at_%u=%.9g\n", r.k, r.precision_at_k);
    out << buf;
    std::snprintf(buf, sizeof(buf), "eval.recall_at_%u=%.9g\n", r.k, r.recall_at_k);
    out << buf;
    out << "eval.outer_watch_count=" << r.outer_watch_count << "\n"
        << "eval.outer_unique_items=" << r.outer_unique_items << "\n"
        << "eval.outer_retrieval_presence=" << r.outer_retrieval_presence << "\n";
    if (r.edge_auc >= 0.0) {
        std::snprintf(buf, sizeof(buf), "eval.edge_auc=%.9g\n", r.edge_auc);
        out << buf;
    }
}

}  // namespace mgfn
