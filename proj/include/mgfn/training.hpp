#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgfn/embedding_table.hpp"
#include "mgfn/model.hpp"
#include "mgfn/multigraph.hpp"
#include "mgfn/rng.hpp"

namespace mgfn {

enum class NegativeStrategy { kCrossScenario, kDegreeSingleScenario, kRandom };

struct NegativeSampling {
    NegativeStrategy strategy = NegativeStrategy::kCrossScenario;
    std::string scenario_id;  // required for kDegreeSingleScenario
};

struct TrainConfig {
    std::uint32_t batch_size = 4000;  // number of head nodes per minibatch
    std::uint32_t negatives = 5;      // per positive
    double lr = 0.002;                // grid {0.001, 0.002, 0.005}
    std::uint32_t stop_steps = 12000; // grid [10000, 16000]
    double dropout = 0.0;             // {0.0, 0.5}
    NegativeSampling negative;
    std::uint64_t seed = 42;
    std::vector<std::uint32_t> fanouts = {10, 10};
    std::uint32_t inference_fanout = kFullFanout;
    std::uint32_t inference_batch = 1024;
};

struct TripletBatch {
    std::vector<NodeId> heads;      // b_s
    std::vector<NodeId> tails;      // b_s, (head, tail) is an edge somewhere
    std::vector<NodeId> negatives;  // b_s * k, (head, neg) is a non-edge everywhere
    std::uint32_t negatives_per_head = 0;
};

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// P(v) proportional to (scenario-summed edge-weight degree)^(3/4); zero-degree
// nodes get probability 0. Errors when every node has zero degree.
std::vector<double> degree_target_distribution(const CrossScenarioMultiGraph& g);

// Edges drawn with probability proportional to transition count, pooled over
// all scenarios.
std::vector<std::pair<NodeId, NodeId>> sample_positive_pairs(const CrossScenarioMultiGraph& g,
                                                             std::uint32_t n, Rng& rng);

// Draws k negatives per head from the strategy's node distribution, rejecting
// candidates equal to the head or connected (head -> cand) in any scenario;
// at most 100 attempts per slot before a SamplingError.
std::vector<NodeId> sample_negatives(const CrossScenarioMultiGraph& g,
                                     std::span<const NodeId> heads, std::uint32_t k,
                                     const NegativeSampling& sampling, Rng& rng);

// Mean over heads of the mean over each head's negatives of
// log(1 + exp(h.n - h.t)), computed overflow-free.
double bpr_loss(const Mat& h_heads, const Mat& h_tails, const Mat& h_negs,
                std::uint32_t negatives_per_head);

struct BprGradResult {
    double loss = 0.0;
    Mat seed_grad;  // dLoss/d(seed embedding row)
};

// Loss plus its gradient with respect to the seed embedding rows, where
// head/tail/negative occurrences of one seed accumulate into its single row.
BprGradResult bpr_loss_and_grad(const Mat& seed_emb, std::span<const std::uint32_t> head_rows,
                                std::span<const std::uint32_t> tail_rows,
                                std::span<const std::uint32_t> neg_rows,
                                std::uint32_t negatives_per_head);

struct OptimizerState {
    ModelParams m;  // first-moment accumulators, same shapes as the params
    ModelParams v;  // second-moment accumulators
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

OptimizerState init_optimizer(const ModelParams& params);

// Bias-corrected Adam; rejects non-finite gradients naming the tensor.
void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr);

struct TrainResult {
    ModelParams params;
    OptimizerState opt;
    std::vector<double> losses;  // one entry per step
    EmbeddingTable embeddings;   // inference forward over every node
};

TrainResult train(const CrossScenarioMultiGraph& g, const ModelConfig& model_config,
                  const TrainConfig& train_config);

// Inference embeddings for every node, batched; exact neighborhoods when
// inference_fanout covers the maximum in-degree.
EmbeddingTable compute_embeddings(const CrossScenarioMultiGraph& g, const ModelParams& params,
                                  std::uint32_t inference_fanout, std::uint32_t inference_batch,
                                  std::uint64_t seed);

// 100-step trailing mean of the loss curve at a 1-based step (clamped to the
// available prefix).
double smoothed_loss(const std::vector<double>& losses, std::size_t step, std::size_t window = 100);

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const OptimizerState& opt, const std::string& header = "{}");
struct Checkpoint {
    ModelParams params;
    OptimizerState opt;
    std::string header;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mgfn
