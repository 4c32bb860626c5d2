#include "mgfn/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mgfn/bytes.hpp"

namespace mgfn {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// categorical draws over an unnormalized cumulative table
struct CumTable {
    std::vector<double> cum;

    static CumTable from_weights(const std::vector<double>& w) {
        CumTable t;
        t.cum.resize(w.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            t.cum[i] = acc;
        }
        return t;
    }
    std::size_t draw(Rng& rng) const {
        double r = rng.uniform() * cum.back();
        auto it = std::upper_bound(cum.begin(), cum.end(), r);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
    }
};

struct EdgeSampler {
    std::vector<std::pair<NodeId, NodeId>> edges;  // pooled over scenarios
    CumTable table;

    explicit EdgeSampler(const CrossScenarioMultiGraph& g) {
        std::vector<double> w;
        for (std::size_t s = 0; s < g.num_scenarios(); ++s) {
            const Csr& a = g.out_adj[s];
            for (NodeId i = 0; i < g.num_nodes(); ++i) {
                auto nbrs = a.row_nbr(i);
                auto cnts = a.row_count(i);
                for (std::size_t k = 0; k < nbrs.size(); ++k) {
                    edges.emplace_back(i, nbrs[k]);
                    w.push_back(static_cast<double>(cnts[k]));
                }
            }
        }
        if (edges.empty()) throw SamplingError("positive sampling: graph has no edges");
        table = CumTable::from_weights(w);
    }
    std::pair<NodeId, NodeId> sample(Rng& rng) const { return edges[table.draw(rng)]; }
};

std::vector<double> strategy_weights(const CrossScenarioMultiGraph& g,
                                     const NegativeSampling& sampling) {
    const std::size_t n = g.num_nodes();
    std::vector<double> w(n, 0.0);
    switch (sampling.strategy) {
        case NegativeStrategy::kCrossScenario:
            return degree_target_distribution(g);
        case NegativeStrategy::kDegreeSingleScenario: {
            const auto s = static_cast<std::size_t>(g.require_scenario(sampling.scenario_id));
            double total = 0.0;
            for (NodeId v = 0; v < n; ++v) {
                const double deg =
                    static_cast<double>(g.in_degree_w[s][v] + g.out_degree_w[s][v]);
                w[v] = std::pow(deg, 0.75);
                total += w[v];
            }
            if (total <= 0.0)
                throw SamplingError("negative sampling: scenario " + sampling.scenario_id +
                                    " has all-zero degrees");
            for (auto& x : w) x /= total;
            return w;
        }
        case NegativeStrategy::kRandom:
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
            return w;
    }
    throw std::logic_error("unknown negative sampling strategy");
}

std::vector<std::pair<std::string, Mat*>> tensor_refs(ModelParams& p) {
    std::vector<std::pair<std::string, Mat*>> refs;
    p.for_each_tensor([&](const std::string& name, Mat& t) { refs.emplace_back(name, &t); });
    return refs;
}

std::vector<std::pair<std::string, const Mat*>> tensor_refs(const ModelParams& p) {
    std::vector<std::pair<std::string, const Mat*>> refs;
    p.for_each_tensor(
        [&](const std::string& name, const Mat& t) { refs.emplace_back(name, &t); });
    return refs;
}

}  // namespace

std::vector<double> degree_target_distribution(const CrossScenarioMultiGraph& g) {
    const std::size_t n = g.num_nodes();
    if (n == 0) throw SamplingError("degree target distribution: empty graph");
    std::vector<double> p(n, 0.0);
    double total = 0.0;
    for (NodeId v = 0; v < n; ++v) {
        p[v] = std::pow(static_cast<double>(g.total_degree_w(v)), 0.75);
        total += p[v];
    }
    if (total <= 0.0)
        throw SamplingError("degree target distribution: all node degrees are zero");
    for (auto& x : p) x /= total;
    return p;
}

std::vector<std::pair<NodeId, NodeId>> sample_positive_pairs(const CrossScenarioMultiGraph& g,
                                                             std::uint32_t n, Rng& rng) {
    EdgeSampler sampler(g);
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(sampler.sample(rng));
    return out;
}

namespace {

std::vector<NodeId> draw_negatives(const CrossScenarioMultiGraph& g,
                                   std::span<const NodeId> heads, std::uint32_t k,
                                   const CumTable& table, Rng& rng) {
    std::vector<NodeId> out;
    out.reserve(heads.size() * k);
    const std::size_t ns = g.num_scenarios();
    for (NodeId head : heads) {
        for (std::uint32_t j = 0; j < k; ++j) {
            bool accepted = false;
            for (int attempt = 0; attempt < 100; ++attempt) {
                auto cand = static_cast<NodeId>(table.draw(rng));
                if (cand == head) continue;
                bool is_edge = false;
                for (std::size_t s = 0; s < ns && !is_edge; ++s)
                    is_edge = g.has_out_edge(s, head, cand);
                if (is_edge) continue;
                out.push_back(cand);
                accepted = true;
                break;
            }
            if (!accepted)
                throw SamplingError(
                    "negative sampling: rejection budget exhausted for head item " +
                    g.item_ids[head]);
        }
    }
    return out;
}

}  // namespace

std::vector<NodeId> sample_negatives(const CrossScenarioMultiGraph& g,
                                     std::span<const NodeId> heads, std::uint32_t k,
                                     const NegativeSampling& sampling, Rng& rng) {
    CumTable table = CumTable::from_weights(strategy_weights(g, sampling));
    return draw_negatives(g, heads, k, table, rng);
}

double bpr_loss(const Mat& h_heads, const Mat& h_tails, const Mat& h_negs,
                std::uint32_t negatives_per_head) {
    const auto b = h_heads.rows();
    if (h_tails.rows() != b || h_negs.rows() != b * negatives_per_head)
        throw std::invalid_argument("bpr_loss: inconsistent triplet shapes");
    double loss = 0.0;
    for (Eigen::Index h = 0; h < b; ++h) {
        const double pos = h_heads.row(h).dot(h_tails.row(h));
        double head_loss = 0.0;
        for (std::uint32_t j = 0; j < negatives_per_head; ++j) {
            const double neg = h_heads.row(h).dot(h_negs.row(h * negatives_per_head + j));
            head_loss += softplus(neg - pos);
        }
        loss += head_loss / negatives_per_head;
    }
    return loss / static_cast<double>(b);
}

BprGradResult bpr_loss_and_grad(const Mat& seed_emb, std::span<const std::uint32_t> head_rows,
                                std::span<const std::uint32_t> tail_rows,
                                std::span<const std::uint32_t> neg_rows,
                                std::uint32_t negatives_per_head) {
    const std::size_t b = head_rows.size();
    const std::uint32_t k = negatives_per_head;
    if (tail_rows.size() != b || neg_rows.size() != b * k)
        throw std::invalid_argument("bpr_loss_and_grad: inconsistent triplet shapes");

    BprGradResult res;
    res.seed_grad = Mat::Zero(seed_emb.rows(), seed_emb.cols());
    const double scale = 1.0 / (static_cast<double>(b) * static_cast<double>(k));
    for (std::size_t h = 0; h < b; ++h) {
        const auto hv = static_cast<Eigen::Index>(head_rows[h]);
        const auto tv = static_cast<Eigen::Index>(tail_rows[h]);
        const double pos = seed_emb.row(hv).dot(seed_emb.row(tv));
        double coef_sum = 0.0;
        for (std::uint32_t j = 0; j < k; ++j) {
            const auto nv = static_cast<Eigen::Index>(neg_rows[h * k + j]);
            const double margin = seed_emb.row(hv).dot(seed_emb.row(nv)) - pos;
            res.loss += softplus(margin) * scale;
            const double coef = sigmoid(margin) * scale;
            coef_sum += coef;
            res.seed_grad.row(hv) += coef * seed_emb.row(nv);
            res.seed_grad.row(nv) += coef * seed_emb.row(hv);
        }
        res.seed_grad.row(hv) -= coef_sum * seed_emb.row(tv);
        res.seed_grad.row(tv) -= coef_sum * seed_emb.row(hv);
    }
    return res;
}

OptimizerState init_optimizer(const ModelParams& params) {
    OptimizerState st;
    st.m = params.zeros_like();
    st.v = params.zeros_like();
    return st;
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr) {
    auto p_refs = tensor_refs(params);
    auto g_refs = tensor_refs(grads);
    auto m_refs = tensor_refs(state.m);
    auto v_refs = tensor_refs(state.v);
    if (g_refs.size() != p_refs.size())
        throw std::invalid_argument("adam_step: gradient tensor set does not match params");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < p_refs.size(); ++i) {
        const Mat& g = *g_refs[i].second;
        if (!g.allFinite())
            throw std::runtime_error("adam_step: non-finite gradient in tensor " + g_refs[i].first);
        Mat& m = *m_refs[i].second;
        Mat& v = *v_refs[i].second;
        Mat& p = *p_refs[i].second;
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        p.array() -=
            lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
    }
}

double smoothed_loss(const std::vector<double>& losses, std::size_t step, std::size_t window) {
    if (losses.empty()) return 0.0;
    step = std::min(step, losses.size());
    const std::size_t begin = step > window ? step - window : 0;
    double acc = 0.0;
    for (std::size_t i = begin; i < step; ++i) acc += losses[i];
    return acc / static_cast<double>(step - begin);
}

EmbeddingTable compute_embeddings(const CrossScenarioMultiGraph& g, const ModelParams& params,
                                  std::uint32_t inference_fanout, std::uint32_t inference_batch,
                                  std::uint64_t seed) {
    const std::size_t n = g.num_nodes();
    const std::vector<std::uint32_t> fanouts(params.config.layers, inference_fanout);
    EmbeddingTable table;
    table.ids = g.item_ids;
    table.vectors.resize(static_cast<Eigen::Index>(n), kEmbedDim);
    for (std::size_t start = 0, batch = 0; start < n; start += inference_batch, ++batch) {
        const std::size_t end = std::min(n, start + inference_batch);
        std::vector<NodeId> seeds(end - start);
        for (std::size_t i = start; i < end; ++i) seeds[i - start] = static_cast<NodeId>(i);
        Rng rng(mix_seed(seed, hash_str("inference"), batch));
        SampledBlock block = build_block(g, seeds, fanouts, rng, params.config.weight_mode);
        ForwardCache fwd = forward(block, g, params, /*training=*/false);
        for (std::size_t i = 0; i < seeds.size(); ++i)
            table.vectors.row(static_cast<Eigen::Index>(start + i)) =
                fwd.seed_emb.row(static_cast<Eigen::Index>(i));
    }
    table.rebuild_index();
    table.validate();
    return table;
}

TrainResult train(const CrossScenarioMultiGraph& g, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
    ModelConfig cfg = model_config;
    cfg.num_scenarios = static_cast<std::uint32_t>(g.num_scenarios());
    cfg.hash_buckets = g.hash_buckets;
    cfg.dropout = train_config.dropout;
    cfg.validate();
    if (train_config.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
    if (train_config.negatives == 0) throw std::invalid_argument("train: negatives must be >= 1");
    if (train_config.fanouts.size() != cfg.layers)
        throw std::invalid_argument("train: fanouts must list one value per layer");

    TrainResult res;
    res.params = init_params(cfg, train_config.seed);
    res.opt = init_optimizer(res.params);
    res.losses.reserve(train_config.stop_steps);

    if (train_config.stop_steps > 0) {
        const EdgeSampler edge_sampler(g);
        const CumTable neg_table =
            CumTable::from_weights(strategy_weights(g, train_config.negative));
        const std::uint32_t b = train_config.batch_size;
        const std::uint32_t k = train_config.negatives;

        for (std::uint32_t step = 1; step <= train_config.stop_steps; ++step) {
            Rng rng(mix_seed(train_config.seed, hash_str("train_step"), step));

            TripletBatch batch;
            batch.negatives_per_head = k;
            batch.heads.reserve(b);
            batch.tails.reserve(b);
            for (std::uint32_t i = 0; i < b; ++i) {
                auto [head, tail] = edge_sampler.sample(rng);
                batch.heads.push_back(head);
                batch.tails.push_back(tail);
            }
            batch.negatives = draw_negatives(g, batch.heads, k, neg_table, rng);

            std::vector<NodeId> seeds;
            seeds.reserve(b * (2 + k));
            seeds.insert(seeds.end(), batch.heads.begin(), batch.heads.end());
            seeds.insert(seeds.end(), batch.tails.begin(), batch.tails.end());
            seeds.insert(seeds.end(), batch.negatives.begin(), batch.negatives.end());

            SampledBlock block = build_block(g, seeds, train_config.fanouts, rng, cfg.weight_mode);

            std::unordered_map<NodeId, std::uint32_t> seed_row;
            seed_row.reserve(block.seed_slots().size() * 2);
            for (std::size_t i = 0; i < block.seed_slots().size(); ++i)
                seed_row[block.node_ids[block.seed_slots()[i]]] = static_cast<std::uint32_t>(i);
            auto rows_of = [&](const std::vector<NodeId>& nodes) {
                std::vector<std::uint32_t> rows(nodes.size());
                for (std::size_t i = 0; i < nodes.size(); ++i) rows[i] = seed_row.at(nodes[i]);
                return rows;
            };
            const auto head_rows = rows_of(batch.heads);
            const auto tail_rows = rows_of(batch.tails);
            const auto neg_rows = rows_of(batch.negatives);

            ForwardCache fwd = forward(block, g, res.params, /*training=*/true, &rng);
            BprGradResult bpr = bpr_loss_and_grad(fwd.seed_emb, head_rows, tail_rows, neg_rows, k);
            ModelParams grads = backward(block, g, res.params, fwd, bpr.seed_grad);
            adam_step(res.params, grads, res.opt, train_config.lr);
            res.losses.push_back(bpr.loss);
        }
    }

    res.embeddings = compute_embeddings(g, res.params, train_config.inference_fanout,
                                        train_config.inference_batch, train_config.seed);
    return res;
}

// ---------------------------------------------------------------------------
// checkpoint image

namespace {
constexpr char kCkptMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const OptimizerState& opt, const std::string& header) {
    ByteWriter w;
    w.raw(kCkptMagic, 4);
    w.u32(kCkptVersion);
    w.str(header);
    write_params(w, params);
    w.u64(opt.step);
    w.f64(opt.beta1);
    w.f64(opt.beta2);
    w.f64(opt.eps);
    write_params(w, opt.m);
    write_params(w, opt.v);
    write_file_bytes(path, w.bytes);
}

Checkpoint load_checkpoint(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r{bytes, 0, "checkpoint"};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCkptMagic, 4) != 0)
        throw SerializeError("not a checkpoint file (bad magic)");
    std::uint32_t version = r.u32();
    if (version != kCkptVersion)
        throw SerializeError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.header = r.str();
    ck.params = read_params(r);
    ck.opt.step = r.u64();
    ck.opt.beta1 = r.f64();
    ck.opt.beta2 = r.f64();
    ck.opt.eps = r.f64();
    ck.opt.m = read_params(r);
    ck.opt.v = read_params(r);
    r.expect_end();
    return ck;
}

}  // namespace mgfn
