#include "mgfn/model.hpp"

#include <cmath>

#include "mgfn/bytes.hpp"

namespace mgfn {

namespace {

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_grad_mask(const Mat& z) {
    return (z.array() > 0.0).cast<double>().matrix();
}

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }
double leaky_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

Mat leaky_mat(const Mat& x, double slope) {
    return x.unaryExpr([slope](double v) { return leaky(v, slope); });
}

}  // namespace

void ModelConfig::validate() const {
    if (layers == 0) throw std::invalid_argument("model config: layers must be >= 1");
    if (num_scenarios == 0) throw std::invalid_argument("model config: num_scenarios must be >= 1");
    if (hash_buckets == 0) throw std::invalid_argument("model config: hash_buckets must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("model config: dropout must lie in [0, 1)");
    if (leaky_slope <= 0.0) throw std::invalid_argument("model config: leaky_slope must be > 0");
}

namespace {

ModelParams alloc_params(const ModelConfig& config) {
    config.validate();
    const auto B = config.hash_buckets;
    const auto L = config.layers;
    const auto S = config.num_scenarios;
    const auto d = kEmbedDim;

    ModelParams p;
    p.config = config;
    p.e_kw = Mat::Zero(B, kHashEmbedDim);
    p.e_tag = Mat::Zero(B, kHashEmbedDim);
    p.e_id = Mat::Zero(B, kHashEmbedDim);
    p.w_m1 = Mat::Zero(kRawDim, d);
    p.b_m1 = Mat::Zero(1, d);
    p.w_m2 = Mat::Zero(d, d);
    p.b_m2 = Mat::Zero(1, d);
    p.w_self.assign(L, std::vector<Mat>(S, Mat::Zero(d, d)));
    p.w_nb.assign(L, std::vector<Mat>(S, Mat::Zero(d, d)));
    if (config.conv == ConvKind::kGat)
        p.attn.assign(L, std::vector<Mat>(S, Mat::Zero(2 * d, 1)));
    if (config.fusion == FusionKind::kConcat && L > 1)
        p.w_proj.assign(L - 1, Mat::Zero(d * S, d));
    if (config.fusion == FusionKind::kWeighted) p.fusion_w = Mat::Zero(L, S);
    p.w_f1 = Mat::Zero(config.fused_dim(), d);
    p.b_f1 = Mat::Zero(1, d);
    p.w_f2 = Mat::Zero(d, d);
    p.b_f2 = Mat::Zero(1, d);
    return p;
}

template <typename Self, typename Fn>
void visit_tensors(Self& p, const Fn& fn) {
    fn("e_kw", p.e_kw);
    fn("e_tag", p.e_tag);
    fn("e_id", p.e_id);
    fn("w_m1", p.w_m1);
    fn("b_m1", p.b_m1);
    fn("w_m2", p.w_m2);
    fn("b_m2", p.b_m2);
    for (std::size_t l = 0; l < p.w_self.size(); ++l)
        for (std::size_t s = 0; s < p.w_self[l].size(); ++s) {
            const std::string suffix = "." + std::to_string(l) + "." + std::to_string(s);
            fn("w_self" + suffix, p.w_self[l][s]);
            fn("w_nb" + suffix, p.w_nb[l][s]);
            if (!p.attn.empty()) fn("attn" + suffix, p.attn[l][s]);
        }
    for (std::size_t l = 0; l < p.w_proj.size(); ++l)
        fn("w_proj." + std::to_string(l), p.w_proj[l]);
    if (p.fusion_w.size() > 0) fn("fusion_w", p.fusion_w);
    fn("w_f1", p.w_f1);
    fn("b_f1", p.b_f1);
    fn("w_f2", p.w_f2);
    fn("b_f2", p.b_f2);
}

}  // namespace

void ModelParams::for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn) {
    visit_tensors(*this, fn);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const Mat&)>& fn) const {
    visit_tensors(*this, fn);
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = alloc_params(config);
    return z;
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const Mat& t) {
        if (!t.allFinite()) ok = false;
    });
    return ok;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p = alloc_params(config);
    Rng rng(mix_seed(seed, hash_str("init_params")));
    p.for_each_tensor([&](const std::string& name, Mat& t) {
        const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
        for (Eigen::Index j = 0; j < t.cols(); ++j)
            for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = rng.uniform(-bound, bound);
        if (name.starts_with("b_")) t.setZero();
        if (name == "fusion_w") t.setOnes();
    });
    return p;
}

// ---------------------------------------------------------------------------
// forward

Mat feature_transform(const CrossScenarioMultiGraph& g, std::span<const NodeId> nodes,
                      const ModelParams& params) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Mat raw(n, kRawDim);
    for (Eigen::Index k = 0; k < n; ++k) {
        NodeId v = nodes[static_cast<std::size_t>(k)];
        if (g.kw_bucket[v] >= params.config.hash_buckets ||
            g.tag_bucket[v] >= params.config.hash_buckets ||
            g.id_bucket[v] >= params.config.hash_buckets)
            throw std::out_of_range("feature bucket index exceeds the model's hash table");
        raw.row(k).segment(0, kHashEmbedDim) = params.e_kw.row(g.kw_bucket[v]);
        raw.row(k).segment(kHashEmbedDim, kHashEmbedDim) = params.e_tag.row(g.tag_bucket[v]);
        raw.row(k).segment(2 * kHashEmbedDim, kHashEmbedDim) = params.e_id.row(g.id_bucket[v]);
        raw(k, 3 * kHashEmbedDim) = g.log_duration[v];
        raw(k, 3 * kHashEmbedDim + 1) = g.log_degree[v];
    }
    Mat z1 = (raw * params.w_m1).rowwise() + params.b_m1.row(0);
    return (relu(z1) * params.w_m2).rowwise() + params.b_m2.row(0);
}

Mat sage_layer(const SampledBlock& block, std::uint32_t layer, std::size_t scenario,
               const Mat& h_prev, const Mat& w_self, const Mat& w_nb, Mat* agg_out) {
    const auto& frontier = block.frontier[layer];
    const auto& e = block.edges[layer - 1][scenario];

    Mat agg = Mat::Zero(h_prev.rows(), h_prev.cols());
    for (std::size_t di = 0; di < frontier.size(); ++di) {
        const std::uint64_t begin = e.dst_offsets[di];
        const std::uint64_t end = e.dst_offsets[di + 1];
        if (begin == end) continue;
        auto dst = static_cast<Eigen::Index>(frontier[di]);
        for (std::uint64_t k = begin; k < end; ++k)
            agg.row(dst) += e.weight[k] * h_prev.row(static_cast<Eigen::Index>(e.src_slot[k]));
        agg.row(dst) /= static_cast<double>(end - begin);
    }
    Mat out(h_prev.rows(), w_self.cols());
    out.noalias() = h_prev * w_self;
    out.noalias() += agg * w_nb;
    if (agg_out) *agg_out = std::move(agg);
    return out;
}

Mat gat_layer(const SampledBlock& block, std::uint32_t layer, std::size_t scenario,
              const Mat& h_prev, const Mat& w_self, const Mat& w_nb, const Mat& attn,
              double leaky_slope, LayerCache* cache, std::size_t cache_slot) {
    const auto& frontier = block.frontier[layer];
    const auto& e = block.edges[layer - 1][scenario];
    const Eigen::Index d = w_nb.cols();

    Mat p(h_prev.rows(), d);
    p.noalias() = h_prev * w_nb;
    Eigen::VectorXd att_src = p * attn.topRows(d);     // a_L^T (W_nb h_j)
    Eigen::VectorXd att_dst = p * attn.bottomRows(d);  // a_R^T (W_nb h_i)

    std::vector<double> score_pre(e.src_slot.size());
    std::vector<double> alpha(e.src_slot.size());
    Mat gat_pre = Mat::Zero(h_prev.rows(), d);

    for (std::size_t di = 0; di < frontier.size(); ++di) {
        const std::uint64_t begin = e.dst_offsets[di];
        const std::uint64_t end = e.dst_offsets[di + 1];
        if (begin == end) continue;
        auto dst = static_cast<Eigen::Index>(frontier[di]);
        // the edge weight scales both halves of the attention input
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::uint64_t k = begin; k < end; ++k) {
            double z = e.weight[k] * (att_src(static_cast<Eigen::Index>(e.src_slot[k])) +
                                      att_dst(dst));
            score_pre[k] = z;
            max_score = std::max(max_score, leaky(z, leaky_slope));
        }
        double denom = 0.0;
        for (std::uint64_t k = begin; k < end; ++k) {
            alpha[k] = std::exp(leaky(score_pre[k], leaky_slope) - max_score);
            denom += alpha[k];
        }
        for (std::uint64_t k = begin; k < end; ++k) {
            alpha[k] /= denom;
            gat_pre.row(dst) +=
                alpha[k] * e.weight[k] * p.row(static_cast<Eigen::Index>(e.src_slot[k]));
        }
    }

    Mat out(h_prev.rows(), d);
    out.noalias() = h_prev * w_self;
    out += leaky_mat(gat_pre, leaky_slope);
    if (cache) {
        cache->p[cache_slot] = std::move(p);
        cache->att_src[cache_slot] = std::move(att_src);
        cache->att_dst[cache_slot] = std::move(att_dst);
        cache->score_pre[cache_slot] = std::move(score_pre);
        cache->alpha[cache_slot] = std::move(alpha);
        cache->gat_pre[cache_slot] = std::move(gat_pre);
    }
    return out;
}

Mat fuse(const std::vector<Mat>& h_scen, FusionKind kind, const Mat& fusion_w,
         std::uint32_t layer) {
    if (h_scen.empty()) throw std::invalid_argument("fuse: no scenario latents");
    const Eigen::Index rows = h_scen[0].rows();
    const Eigen::Index cols = h_scen[0].cols();
    for (const Mat& h : h_scen)
        if (h.rows() != rows || h.cols() != cols)
            throw std::invalid_argument("fuse: mismatched latent shapes");
    const double inv_s = 1.0 / static_cast<double>(h_scen.size());
    switch (kind) {
        case FusionKind::kMean: {
            Mat acc = h_scen[0];
            for (std::size_t s = 1; s < h_scen.size(); ++s) acc += h_scen[s];
            return acc * inv_s;
        }
        case FusionKind::kWeighted: {
            Mat acc = fusion_w(layer, 0) * h_scen[0];
            for (std::size_t s = 1; s < h_scen.size(); ++s)
                acc += fusion_w(layer, static_cast<Eigen::Index>(s)) * h_scen[s];
            return acc * inv_s;
        }
        case FusionKind::kConcat: {
            Mat cat(rows, cols * static_cast<Eigen::Index>(h_scen.size()));
            for (std::size_t s = 0; s < h_scen.size(); ++s)
                cat.middleCols(static_cast<Eigen::Index>(s) * cols, cols) = h_scen[s];
            return cat;
        }
    }
    throw std::logic_error("fuse: unknown fusion kind");
}

Mat final_mlp(const Mat& h_last, const ModelParams& params) {
    Mat z1 = (h_last * params.w_f1).rowwise() + params.b_f1.row(0);
    return (relu(z1) * params.w_f2).rowwise() + params.b_f2.row(0);
}

ForwardCache forward(const SampledBlock& block, const CrossScenarioMultiGraph& g,
                     const ModelParams& params, bool training, Rng* dropout_rng) {
    const ModelConfig& cfg = params.config;
    if (block.num_layers != cfg.layers)
        throw std::invalid_argument("forward: block layer count does not match the model");
    const std::size_t S = cfg.num_scenarios;
    if (block.edges.size() == cfg.layers)
        for (const auto& per_scen : block.edges)
            if (per_scen.size() != S)
                throw std::invalid_argument("forward: block scenario count does not match");

    ForwardCache cache;
    const auto n = static_cast<Eigen::Index>(block.num_slots());
    cache.raw.resize(n, kRawDim);
    for (Eigen::Index k = 0; k < n; ++k) {
        NodeId v = block.node_ids[static_cast<std::size_t>(k)];
        if (g.kw_bucket[v] >= cfg.hash_buckets || g.tag_bucket[v] >= cfg.hash_buckets ||
            g.id_bucket[v] >= cfg.hash_buckets)
            throw std::out_of_range("feature bucket index exceeds the model's hash table");
        cache.raw.row(k).segment(0, kHashEmbedDim) = params.e_kw.row(g.kw_bucket[v]);
        cache.raw.row(k).segment(kHashEmbedDim, kHashEmbedDim) = params.e_tag.row(g.tag_bucket[v]);
        cache.raw.row(k).segment(2 * kHashEmbedDim, kHashEmbedDim) =
            params.e_id.row(g.id_bucket[v]);
        cache.raw(k, 3 * kHashEmbedDim) = g.log_duration[v];
        cache.raw(k, 3 * kHashEmbedDim + 1) = g.log_degree[v];
    }
    cache.ft_z1 = (cache.raw * params.w_m1).rowwise() + params.b_m1.row(0);
    cache.ft_a1 = relu(cache.ft_z1);
    cache.h0 = (cache.ft_a1 * params.w_m2).rowwise() + params.b_m2.row(0);

    const bool use_dropout = training && cfg.dropout > 0.0;
    if (use_dropout && !dropout_rng)
        throw std::invalid_argument("forward: dropout requires an rng in training mode");

    cache.layers.resize(cfg.layers);
    const Mat* h = &cache.h0;
    for (std::uint32_t l = 1; l <= cfg.layers; ++l) {
        LayerCache& lc = cache.layers[l - 1];
        lc.h_scen.resize(S);
        if (cfg.conv == ConvKind::kSage) {
            lc.agg.resize(S);
            for (std::size_t s = 0; s < S; ++s)
                lc.h_scen[s] = sage_layer(block, l, s, *h, params.w_self[l - 1][s],
                                          params.w_nb[l - 1][s], &lc.agg[s]);
        } else {
            lc.p.resize(S);
            lc.att_src.resize(S);
            lc.att_dst.resize(S);
            lc.score_pre.resize(S);
            lc.alpha.resize(S);
            lc.gat_pre.resize(S);
            for (std::size_t s = 0; s < S; ++s)
                lc.h_scen[s] = gat_layer(block, l, s, *h, params.w_self[l - 1][s],
                                         params.w_nb[l - 1][s], params.attn[l - 1][s],
                                         cfg.leaky_slope, &lc, s);
        }
        Mat fused = fuse(lc.h_scen, cfg.fusion, params.fusion_w, l - 1);
        if (cfg.fusion == FusionKind::kConcat && l < cfg.layers) {
            lc.concat_pre = std::move(fused);
            fused.noalias() = lc.concat_pre * params.w_proj[l - 1];
        }
        lc.fused = std::move(fused);
        if (use_dropout) {
            const double keep = 1.0 - cfg.dropout;
            lc.dropout_mask.resize(lc.fused.rows(), lc.fused.cols());
            for (Eigen::Index j = 0; j < lc.dropout_mask.cols(); ++j)
                for (Eigen::Index i = 0; i < lc.dropout_mask.rows(); ++i)
                    lc.dropout_mask(i, j) = dropout_rng->uniform() < cfg.dropout ? 0.0 : 1.0 / keep;
            lc.h_out = lc.fused.cwiseProduct(lc.dropout_mask);
        } else {
            lc.h_out = lc.fused;
        }
        h = &lc.h_out;
    }

    const auto& seeds = block.seed_slots();
    cache.fin_in.resize(static_cast<Eigen::Index>(seeds.size()), h->cols());
    for (std::size_t k = 0; k < seeds.size(); ++k)
        cache.fin_in.row(static_cast<Eigen::Index>(k)) = h->row(seeds[k]);
    cache.fin_z1 = (cache.fin_in * params.w_f1).rowwise() + params.b_f1.row(0);
    cache.fin_a1 = relu(cache.fin_z1);
    cache.seed_emb = (cache.fin_a1 * params.w_f2).rowwise() + params.b_f2.row(0);
    return cache;
}

// ---------------------------------------------------------------------------
// backward

ModelParams backward(const SampledBlock& block, const CrossScenarioMultiGraph& g,
                     const ModelParams& params, const ForwardCache& cache,
                     const Mat& seed_grad) {
    const ModelConfig& cfg = params.config;
    const std::size_t S = cfg.num_scenarios;
    ModelParams grads = params.zeros_like();

    // final MLP
    grads.w_f2.noalias() += cache.fin_a1.transpose() * seed_grad;
    grads.b_f2.row(0) += seed_grad.colwise().sum();
    Mat d_fin_a1 = seed_grad * params.w_f2.transpose();
    Mat d_fin_z1 = d_fin_a1.cwiseProduct(relu_grad_mask(cache.fin_z1));
    grads.w_f1.noalias() += cache.fin_in.transpose() * d_fin_z1;
    grads.b_f1.row(0) += d_fin_z1.colwise().sum();
    Mat d_fin_in = d_fin_z1 * params.w_f1.transpose();

    const auto n = static_cast<Eigen::Index>(block.num_slots());
    Mat dh = Mat::Zero(n, d_fin_in.cols());
    const auto& seeds = block.seed_slots();
    for (std::size_t k = 0; k < seeds.size(); ++k)
        dh.row(seeds[k]) += d_fin_in.row(static_cast<Eigen::Index>(k));

    for (std::uint32_t l = cfg.layers; l >= 1; --l) {
        const LayerCache& lc = cache.layers[l - 1];
        if (lc.dropout_mask.size() > 0) dh = dh.cwiseProduct(lc.dropout_mask);

        // dh now sits at lc.fused; push through fusion to per-scenario latents
        std::vector<Mat> d_hs(S);
        if (cfg.fusion == FusionKind::kConcat) {
            Mat d_cat;
            if (l < cfg.layers) {
                grads.w_proj[l - 1].noalias() += lc.concat_pre.transpose() * dh;
                d_cat = dh * params.w_proj[l - 1].transpose();
            } else {
                d_cat = std::move(dh);
            }
            for (std::size_t s = 0; s < S; ++s)
                d_hs[s] = d_cat.middleCols(static_cast<Eigen::Index>(s) * kEmbedDim, kEmbedDim);
        } else if (cfg.fusion == FusionKind::kMean) {
            const double inv_s = 1.0 / static_cast<double>(S);
            for (std::size_t s = 0; s < S; ++s) d_hs[s] = dh * inv_s;
        } else {
            const double inv_s = 1.0 / static_cast<double>(S);
            for (std::size_t s = 0; s < S; ++s) {
                const auto si = static_cast<Eigen::Index>(s);
                grads.fusion_w(l - 1, si) += inv_s * dh.cwiseProduct(lc.h_scen[s]).sum();
                d_hs[s] = (params.fusion_w(l - 1, si) * inv_s) * dh;
            }
        }

        const Mat& h_prev = l == 1 ? cache.h0 : cache.layers[l - 2].h_out;
        Mat dh_prev = Mat::Zero(n, kEmbedDim);
        const auto& frontier = block.frontier[l];

        for (std::size_t s = 0; s < S; ++s) {
            const Mat& gsc = d_hs[s];
            grads.w_self[l - 1][s].noalias() += h_prev.transpose() * gsc;
            dh_prev.noalias() += gsc * params.w_self[l - 1][s].transpose();
            const auto& e = block.edges[l - 1][s];

            if (cfg.conv == ConvKind::kSage) {
                grads.w_nb[l - 1][s].noalias() += lc.agg[s].transpose() * gsc;
                Mat d_agg = gsc * params.w_nb[l - 1][s].transpose();
                for (std::size_t di = 0; di < frontier.size(); ++di) {
                    const std::uint64_t begin = e.dst_offsets[di];
                    const std::uint64_t end = e.dst_offsets[di + 1];
                    if (begin == end) continue;
                    const double inv_n = 1.0 / static_cast<double>(end - begin);
                    auto dst = static_cast<Eigen::Index>(frontier[di]);
                    for (std::uint64_t k = begin; k < end; ++k)
                        dh_prev.row(static_cast<Eigen::Index>(e.src_slot[k])) +=
                            (e.weight[k] * inv_n) * d_agg.row(dst);
                }
            } else {
                const Mat& p = lc.p[s];
                const Mat& attn = params.attn[l - 1][s];
                const Eigen::Index d = kEmbedDim;
                // through the post-aggregation LeakyReLU
                Mat d_pre =
                    gsc.cwiseProduct(lc.gat_pre[s].unaryExpr([&](double v) {
                        return leaky_grad(v, cfg.leaky_slope);
                    }));
                Mat d_p = Mat::Zero(n, d);
                Eigen::VectorXd d_att_src = Eigen::VectorXd::Zero(n);
                Eigen::VectorXd d_att_dst = Eigen::VectorXd::Zero(n);
                std::vector<double> d_alpha(e.src_slot.size(), 0.0);
                for (std::size_t di = 0; di < frontier.size(); ++di) {
                    const std::uint64_t begin = e.dst_offsets[di];
                    const std::uint64_t end = e.dst_offsets[di + 1];
                    if (begin == end) continue;
                    auto dst = static_cast<Eigen::Index>(frontier[di]);
                    double weighted_sum = 0.0;  // sum_e alpha_e * dalpha_e for softmax backward
                    for (std::uint64_t k = begin; k < end; ++k) {
                        auto src = static_cast<Eigen::Index>(e.src_slot[k]);
                        d_alpha[k] = e.weight[k] * d_pre.row(dst).dot(p.row(src));
                        d_p.row(src) += (lc.alpha[s][k] * e.weight[k]) * d_pre.row(dst);
                        weighted_sum += lc.alpha[s][k] * d_alpha[k];
                    }
                    for (std::uint64_t k = begin; k < end; ++k) {
                        auto src = static_cast<Eigen::Index>(e.src_slot[k]);
                        double d_score = lc.alpha[s][k] * (d_alpha[k] - weighted_sum);
                        double d_z = d_score * leaky_grad(lc.score_pre[s][k], cfg.leaky_slope);
                        d_att_src(src) += d_z * e.weight[k];
                        d_att_dst(dst) += d_z * e.weight[k];
                    }
                }
                grads.attn[l - 1][s].topRows(d).noalias() += p.transpose() * d_att_src;
                grads.attn[l - 1][s].bottomRows(d).noalias() += p.transpose() * d_att_dst;
                d_p.noalias() += d_att_src * attn.topRows(d).transpose();
                d_p.noalias() += d_att_dst * attn.bottomRows(d).transpose();
                grads.w_nb[l - 1][s].noalias() += h_prev.transpose() * d_p;
                dh_prev.noalias() += d_p * params.w_nb[l - 1][s].transpose();
            }
        }
        dh = std::move(dh_prev);
    }

    // feature transform
    grads.w_m2.noalias() += cache.ft_a1.transpose() * dh;
    grads.b_m2.row(0) += dh.colwise().sum();
    Mat d_a1 = dh * params.w_m2.transpose();
    Mat d_z1 = d_a1.cwiseProduct(relu_grad_mask(cache.ft_z1));
    grads.w_m1.noalias() += cache.raw.transpose() * d_z1;
    grads.b_m1.row(0) += d_z1.colwise().sum();
    Mat d_raw = d_z1 * params.w_m1.transpose();
    for (Eigen::Index k = 0; k < n; ++k) {
        NodeId v = block.node_ids[static_cast<std::size_t>(k)];
        grads.e_kw.row(g.kw_bucket[v]) += d_raw.row(k).segment(0, kHashEmbedDim);
        grads.e_tag.row(g.tag_bucket[v]) += d_raw.row(k).segment(kHashEmbedDim, kHashEmbedDim);
        grads.e_id.row(g.id_bucket[v]) += d_raw.row(k).segment(2 * kHashEmbedDim, kHashEmbedDim);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// checkpoint image

namespace {
constexpr std::uint32_t kParamsVersion = 1;
}

void write_params(ByteWriter& w, const ModelParams& p) {
    w.u32(kParamsVersion);
    w.u32(static_cast<std::uint32_t>(p.config.conv));
    w.u32(static_cast<std::uint32_t>(p.config.fusion));
    w.u32(p.config.layers);
    w.u32(p.config.num_scenarios);
    w.u32(p.config.hash_buckets);
    w.f64(p.config.dropout);
    w.f64(p.config.leaky_slope);
    w.u32(static_cast<std::uint32_t>(p.config.weight_mode));
    p.for_each_tensor([&](const std::string& name, const Mat& t) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rows()));
        w.u32(static_cast<std::uint32_t>(t.cols()));
        for (Eigen::Index j = 0; j < t.cols(); ++j)
            for (Eigen::Index i = 0; i < t.rows(); ++i) w.f64(t(i, j));
    });
}

ModelParams read_params(ByteReader& r) {
    std::uint32_t version = r.u32();
    if (version != kParamsVersion)
        throw SerializeError("unsupported model params version " + std::to_string(version));
    ModelConfig cfg;
    cfg.conv = static_cast<ConvKind>(r.u32());
    cfg.fusion = static_cast<FusionKind>(r.u32());
    cfg.layers = r.u32();
    cfg.num_scenarios = r.u32();
    cfg.hash_buckets = r.u32();
    cfg.dropout = r.f64();
    cfg.leaky_slope = r.f64();
    cfg.weight_mode = static_cast<WeightMode>(r.u32());
    ModelParams p = alloc_params(cfg);
    p.for_each_tensor([&](const std::string& name, Mat& t) {
        std::string got = r.str();
        if (got != name)
            throw SerializeError("model params tensor mismatch: expected " + name + ", got " + got);
        auto rows = static_cast<Eigen::Index>(r.u32());
        auto cols = static_cast<Eigen::Index>(r.u32());
        if (rows != t.rows() || cols != t.cols())
            throw SerializeError("model params tensor " + name + " has unexpected shape");
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) t(i, j) = r.f64();
    });
    return p;
}

std::vector<std::uint8_t> serialize_params(const ModelParams& p) {
    ByteWriter w;
    write_params(w, p);
    return w.bytes;
}

ModelParams deserialize_params(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
    ByteReader r{bytes, 0, "model params image"};
    ModelParams p = read_params(r);
    if (consumed)
        *consumed = r.pos;
    else
        r.expect_end();
    return p;
}

}  // namespace mgfn
