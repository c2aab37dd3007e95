#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trer/mat.hpp"

namespace trer {

// Query-side information handed to every re-ranker. Each implementation
// uses what it needs: the transformer reads only the candidate descriptors,
// query expansion needs the query descriptor, the oracle needs poses.
struct QueryContext {
    std::span<const double> query_descriptor;
    std::array<double, 3> query_pose{0.0, 0.0, 0.0};
    std::span<const std::array<double, 3>> candidate_poses; // aligned with L_q
};

// Common surface for TReR, alpha-QE, identity and oracle so evaluation can
// treat them uniformly: (query context, L_q, D_q) -> reordered L_q.
class Reranker {
public:
    virtual ~Reranker() = default;

    virtual std::string name() const = 0;

    // candidates and descriptor rows are aligned; the result is always a
    // permutation of candidates.
    virtual std::vector<std::uint32_t> rerank(
        const QueryContext& ctx, const std::vector<std::uint32_t>& candidates,
        const Mat& descriptors) const = 0;
};

} // namespace trer
