#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgfn/multigraph.hpp"
#include "mgfn/rng.hpp"

namespace mgfn {

using Mat = Eigen::MatrixXd;

constexpr std::uint32_t kEmbedDim = 128;     // latent and output width d
constexpr std::uint32_t kHashEmbedDim = 32;  // width of each hash-embedding slice
constexpr std::uint32_t kRawDim = 3 * kHashEmbedDim + 2;  // + log duration, log degree

enum class ConvKind { kSage, kGat };
enum class FusionKind { kMean, kWeighted, kConcat };

struct ModelConfig {
    ConvKind conv = ConvKind::kSage;
    FusionKind fusion = FusionKind::kConcat;
    std::uint32_t layers = 2;
    std::uint32_t num_scenarios = 2;
    std::uint32_t hash_buckets = 5000;  // must match the graph's
    double dropout = 0.0;
    double leaky_slope = 0.2;
    WeightMode weight_mode = WeightMode::kNormalized;

    // width of H^(L) as fed to the final MLP
    std::uint32_t fused_dim() const {
        return fusion == FusionKind::kConcat ? kEmbedDim * num_scenarios : kEmbedDim;
    }
    void validate() const;
};

// Every learnable tensor of MGFN. Weight matrices are stored input x output
// (rows act as vectors: y = x * W); biases are 1 x dim rows.
struct ModelParams {
    ModelConfig config;

    Mat e_kw, e_tag, e_id;  // hash-embedding tables, B x 32
    Mat w_m1, b_m1, w_m2, b_m2;
    std::vector<std::vector<Mat>> w_self;  // [layer][scenario], 128 x 128
    std::vector<std::vector<Mat>> w_nb;
    std::vector<std::vector<Mat>> attn;    // [layer][scenario], 256 x 1 (GAT only)
    std::vector<Mat> w_proj;  // inter-layer concat projections, (128 |S|) x 128
    Mat fusion_w;             // layers x scenarios scalars (weighted fusion only)
    Mat w_f1, b_f1, w_f2, b_f2;

    // visits every allocated tensor in a fixed order
    void for_each_tensor(const std::function<void(const std::string&, Mat&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Mat&)>& fn) const;

    ModelParams zeros_like() const;
    bool all_finite() const;
};

// Glorot-uniform weights, zero biases, unit fusion weights; deterministic.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

std::vector<std::uint8_t> serialize_params(const ModelParams& p);
ModelParams deserialize_params(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

struct ByteWriter;
struct ByteReader;
void write_params(ByteWriter& w, const ModelParams& p);
ModelParams read_params(ByteReader& r);

// Per-layer forward intermediates kept for the hand-derived backward pass.
struct LayerCache {
    std::vector<Mat> h_scen;  // post-conv per scenario, slots x 128
    // SAGE
    std::vector<Mat> agg;  // mean of weighted neighbor inputs, slots x 128
    // GAT
    std::vector<Mat> p;                              // H_prev * W_nb
    std::vector<Eigen::VectorXd> att_src, att_dst;   // score halves per slot
    std::vector<std::vector<double>> score_pre;      // per edge, pre-LeakyReLU
    std::vector<std::vector<double>> alpha;          // per edge, post-softmax
    std::vector<Mat> gat_pre;                        // aggregated attention sum, pre-activation

    Mat concat_pre;     // concat fusion input to the inter-layer projection
    Mat fused;          // post fusion (and projection), pre-dropout
    Mat dropout_mask;   // empty when no dropout was applied
    Mat h_out;          // layer output fed to the next stage
};

struct ForwardCache {
    Mat raw;                        // gathered raw feature rows, slots x 98
    Mat ft_z1, ft_a1, h0;           // feature-transform intermediates
    std::vector<LayerCache> layers;
    Mat fin_in, fin_z1, fin_a1;     // final MLP intermediates on seed rows
    Mat seed_emb;                   // seeds x 128
};

// Eq. y = W2^T relu(W1^T x + b1) + b2 applied per raw feature row.
Mat feature_transform(const CrossScenarioMultiGraph& g, std::span<const NodeId> nodes,
                      const ModelParams& params);

// Single scenario-conv layers, exposed for unit oracles. `h_prev` spans all
// block slots; output rows outside the layer's frontier carry the self part
// only and are never read downstream.
Mat sage_layer(const SampledBlock& block, std::uint32_t layer, std::size_t scenario,
               const Mat& h_prev, const Mat& w_self, const Mat& w_nb, Mat* agg_out = nullptr);
Mat gat_layer(const SampledBlock& block, std::uint32_t layer, std::size_t scenario,
              const Mat& h_prev, const Mat& w_self, const Mat& w_nb, const Mat& attn,
              double leaky_slope, LayerCache* cache = nullptr, std::size_t cache_slot = 0);

// Cross-scenario fusion of same-shaped per-scenario latents.
Mat fuse(const std::vector<Mat>& h_scen, FusionKind kind, const Mat& fusion_w, std::uint32_t layer);

Mat final_mlp(const Mat& h_last, const ModelParams& params);

// Full composition over a sampled block. `dropout_rng` is consumed only when
// training with dropout > 0; inference is deterministic.
ForwardCache forward(const SampledBlock& block, const CrossScenarioMultiGraph& g,
                     const ModelParams& params, bool training = false,
                     Rng* dropout_rng = nullptr);

// Gradients of a scalar loss with respect to every parameter, given the
// loss gradient at the seed embeddings. Exact reverse pass of forward().
ModelParams backward(const SampledBlock& block, const CrossScenarioMultiGraph& g,
                     const ModelParams& params, const ForwardCache& cache,
                     const Mat& seed_grad);

}  // namespace mgfn
