#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trer/mat.hpp"
#include "trer/reranker.hpp"

namespace trer {

// Immutable store of (pose, descriptor, frame id) records for one sequence.
struct DescriptorDatabase {
    std::string sequence_id;
    std::vector<std::array<double, 3>> poses; // meters
    Mat descriptors;                          // N x d
    std::vector<std::uint32_t> frame_ids;     // strictly increasing

    std::size_t size() const { return poses.size(); }
    std::size_t dim() const { return descriptors.cols; }

    void validate() const; // throws DataError on broken invariants
};

// Closed frame-id interval; prevents trivial temporal neighbors from being
// retrieved as loop candidates. Empty when first > last.
struct FrameRange {
    std::uint32_t first = 1;
    std::uint32_t last = 0;

    static FrameRange around(std::uint32_t frame, std::uint32_t radius);
    bool contains(std::uint32_t frame) const {
        return first <= frame && frame <= last;
    }
    bool empty() const { return first > last; }
};

struct LoopQuery {
    std::size_t query_index = 0;         // row in the database
    std::uint32_t exclusion_window = 100; // frames
};

// Exact brute-force k nearest neighbors by Euclidean distance, ascending,
// skipping frames inside `exclude`. Ties break to the lower frame index.
// Throws CapacityError when fewer than k frames are eligible.
std::vector<std::uint32_t> knn(const DescriptorDatabase& db,
                               std::span<const double> query_descriptor,
                               std::size_t k, FrameRange exclude = {});

// True loop iff the poses are strictly closer than zeta meters.
bool is_true_loop(const std::array<double, 3>& query_pose,
                  const std::array<double, 3>& candidate_pose, double zeta);

// Fraction of counted queries whose top-N list hits at least one relevant
// index. Queries with an empty relevance set are not counted (they have no
// loops to find). truth rows must be sorted ascending.
double recall_at(const std::vector<std::vector<std::uint32_t>>& rankings,
                 const std::vector<std::vector<std::uint32_t>>& truth,
                 std::size_t n);

struct LatencyStats {
    double mean_s = 0.0;
    double stddev_s = 0.0;
    std::size_t count = 0;
};

struct RecallReport {
    std::string sequence_id;
    std::string method;
    std::size_t k = 0;
    std::vector<double> recall_curve; // recall at N = index + 1, N in 1..k
    std::size_t query_count = 0;      // loop-bearing queries counted
    std::size_t skipped_queries = 0;  // too few eligible candidates
    LatencyStats latency;

    double at(std::size_t n) const; // recall at N, 1-based
};

struct EvalConfig {
    std::size_t k = 25;
    double zeta = 25.0;                       // meters
    std::uint32_t exclusion_window = 100;     // frames
    std::vector<std::size_t> report_n = {1, 5, 10};

    void validate() const;
};

// Runs retrieve -> rerank -> score over every eligible query of db and
// aggregates recall and per-call re-rank latency.
RecallReport evaluate(const DescriptorDatabase& db, const Reranker& reranker,
                      const EvalConfig& cfg);

// CSV rows: sequence,method,N,recall for N in 1..k (deterministic bytes).
void write_recall_csv(const std::vector<RecallReport>& reports,
                      const std::filesystem::path& path);

// JSON report including the latency block.
void write_recall_json(const std::vector<RecallReport>& reports,
                       const std::filesystem::path& path);

} // namespace trer
