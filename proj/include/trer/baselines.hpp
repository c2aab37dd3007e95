#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "trer/mat.hpp"
#include "trer/model.hpp"
#include "trer/reranker.hpp"

namespace trer {

struct AlphaQEConfig {
    double alpha = 3.0;
    std::size_t n_expand = 10; // top candidates folded into the new query
    bool normalize = true;     // L2-normalize before similarity

    void validate(std::size_t k) const;
};

// Query expansion: q' = q + sum_{i<=n_expand} sim(q, d_i)^alpha * d_i with
// sim the clamped dot product of unit vectors, then candidates re-sorted by
// ascending distance to q'. Ties keep the original retrieval order.
std::vector<std::uint32_t> alpha_qe_rerank(
    std::span<const double> query_descriptor,
    const std::vector<std::uint32_t>& candidates, const Mat& descriptors,
    const AlphaQEConfig& cfg);

std::vector<std::uint32_t> identity_rerank(
    const std::vector<std::uint32_t>& candidates);

// Upper-bound diagnostic: sorts candidates by true pose distance.
std::vector<std::uint32_t> oracle_rerank(
    const std::vector<std::uint32_t>& candidates,
    const std::array<double, 3>& query_pose,
    std::span<const std::array<double, 3>> candidate_poses);

class IdentityReranker final : public Reranker {
public:
    std::string name() const override { return "none"; }
    std::vector<std::uint32_t> rerank(const QueryContext&,
                                      const std::vector<std::uint32_t>& c,
                                      const Mat&) const override {
        return identity_rerank(c);
    }
};

class AlphaQEReranker final : public Reranker {
public:
    explicit AlphaQEReranker(AlphaQEConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "alpha-qe"; }
    std::vector<std::uint32_t> rerank(const QueryContext& ctx,
                                      const std::vector<std::uint32_t>& c,
                                      const Mat& d) const override {
        return alpha_qe_rerank(ctx.query_descriptor, c, d, cfg_);
    }

private:
    AlphaQEConfig cfg_;
};

class OracleReranker final : public Reranker {
public:
    std::string name() const override { return "oracle"; }
    std::vector<std::uint32_t> rerank(const QueryContext& ctx,
                                      const std::vector<std::uint32_t>& c,
                                      const Mat&) const override {
        return oracle_rerank(c, ctx.query_pose, ctx.candidate_poses);
    }
};

class TrerReranker final : public Reranker {
public:
    TrerReranker(ModelConfig cfg, ModelWeights weights);
    std::string name() const override { return "trer"; }
    std::vector<std::uint32_t> rerank(const QueryContext& ctx,
                                      const std::vector<std::uint32_t>& c,
                                      const Mat& d) const override;

    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    ModelWeights weights_;
};

} // namespace trer
