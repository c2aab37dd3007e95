#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "trer/mat.hpp"
#include "trer/model.hpp"
#include "trer/retrieval.hpp"

namespace trer {

// One training/eval unit: a query, its k retrieved candidates in retrieval
// order, and ground-truth relevance (negated pose distance, so larger means
// more relevant and 0 is a perfect co-location).
struct RankingSample {
    std::uint32_t query_id = 0;
    std::vector<std::uint32_t> candidates; // L_q, database row indices
    Mat descriptors;                       // k x d, rows aligned with L_q
    std::vector<double> relevance;         // Y_q, -distance in meters
    std::array<double, 3> query_pose{0.0, 0.0, 0.0};
    std::vector<double> query_descriptor;  // used when the model consumes it
};

struct TrainConfig {
    double learning_rate = 0.0001;
    double weight_decay = 0.0005;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double sigma = 1.0;        // pairwise loss sharpness
    std::size_t patience = 0;  // early stopping; 0 disables
    std::size_t query_stride = 1; // subsample queries when building samples
    std::size_t threads = 0;   // batch workers; 0 = hardware concurrency

    void validate() const;
};

struct SampleBuildStats {
    std::size_t built = 0;
    std::size_t skipped = 0; // queries with fewer than k eligible candidates
};

// Turns per-query retrieval output into ranking samples. Queries whose
// candidate list is shorter than k are skipped and counted in stats.
std::vector<RankingSample> build_training_set(
    const DescriptorDatabase& db,
    const std::vector<std::vector<std::uint32_t>>& retrieved_per_query,
    std::size_t k, SampleBuildStats* stats = nullptr);

// Convenience: runs knn for every `stride`-th query frame, then builds.
std::vector<RankingSample> retrieve_and_build(const DescriptorDatabase& db,
                                              std::size_t k,
                                              std::uint32_t exclusion_window,
                                              std::size_t stride = 1,
                                              SampleBuildStats* stats = nullptr);

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad; // dloss / dscores
};

// Pairwise logistic ranking loss:
//   sum over pairs with y_i > y_j of log2(1 + exp(-sigma * (s_i - s_j)))
// evaluated in softplus form so large score gaps stay finite. Ties in y
// contribute nothing.
LossResult logistic_loss(std::span<const double> relevance,
                         std::span<const double> scores, double sigma);

struct AdamState {
    std::size_t step = 0;
    ModelWeights m;
    ModelWeights v;
};

AdamState make_adam_state(const ModelConfig& cfg);

// One AdamW update with decoupled weight decay and bias-corrected moments.
// Returns false (and leaves weights untouched) when the gradient is not
// finite; callers flag the rejected step in the training log.
bool adamw_step(ModelWeights& weights, const ModelWeights& grads,
                AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double wall_ms = 0.0;
    std::size_t rejected_steps = 0;
};

struct TrainResult {
    ModelWeights weights;
    std::vector<EpochRecord> log;
};

// Mini-batch AdamW over the mean per-query loss. Deterministic per seed:
// fixed shuffle order and fixed-order gradient reduction regardless of the
// worker count.
TrainResult train(const std::vector<RankingSample>& samples,
                  const ModelConfig& model_cfg, const TrainConfig& cfg);

// Model input for one sample: the candidate descriptors, with the query
// descriptor prepended as row 0 when the config asks for it.
Mat sample_input(const ModelConfig& cfg, const RankingSample& sample);

} // namespace trer
