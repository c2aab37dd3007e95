#include "trer/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "trer/errors.hpp"

#include "json.hpp"

namespace trer {

void DescriptorDatabase::validate() const {
    if (poses.size() != descriptors.rows || poses.size() != frame_ids.size()) {
        throw DataError("database '" + sequence_id + "': " +
                        std::to_string(poses.size()) + " poses, " +
                        std::to_string(descriptors.rows) + " descriptors, " +
                        std::to_string(frame_ids.size()) + " frame ids");
    }
    for (std::size_t i = 1; i < frame_ids.size(); ++i) {
        if (frame_ids[i] <= frame_ids[i - 1]) {
            throw DataError("database '" + sequence_id +
                            "': frame ids not strictly increasing at index " +
                            std::to_string(i));
        }
    }
    if (!all_finite(descriptors.data)) {
        throw DataError("database '" + sequence_id +
                        "': non-finite descriptor values");
    }
}

FrameRange FrameRange::around(std::uint32_t frame, std::uint32_t radius) {
    FrameRange r;
    r.first = frame >= radius ? frame - radius : 0;
    r.last = frame <= UINT32_MAX - radius ? frame + radius : UINT32_MAX;
    return r;
}

std::vector<std::uint32_t> knn(const DescriptorDatabase& db,
                               std::span<const double> query_descriptor,
                               std::size_t k, FrameRange exclude) {
    if (query_descriptor.size() != db.dim()) {
        throw ShapeError("knn: query has " +
                         std::to_string(query_descriptor.size()) +
                         " dims, database has " + std::to_string(db.dim()));
    }
    // Squared distances order identically to Euclidean ones and avoid the
    // sqrt in the hot loop.
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        if (!exclude.empty() && exclude.contains(db.frame_ids[i])) continue;
        const auto row = db.descriptors.row(i);
        double d2 = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double diff = row[c] - query_descriptor[c];
            d2 += diff * diff;
        }
        scored.emplace_back(d2, static_cast<std::uint32_t>(i));
    }
    if (scored.size() < k) {
        throw CapacityError("knn: k=" + std::to_string(k) + " but only " +
                            std::to_string(scored.size()) +
                            " eligible frames");
    }
    // Ties break to the lower frame index; pair comparison handles both.
    std::partial_sort(scored.begin(),
                      scored.begin() + static_cast<std::ptrdiff_t>(k),
                      scored.end());
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(scored[i].second);
    }
    return out;
}

bool is_true_loop(const std::array<double, 3>& query_pose,
                  const std::array<double, 3>& candidate_pose, double zeta) {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double diff = query_pose[i] - candidate_pose[i];
        d2 += diff * diff;
    }
    return std::sqrt(d2) < zeta;
}

double recall_at(const std::vector<std::vector<std::uint32_t>>& rankings,
                 const std::vector<std::vector<std::uint32_t>>& truth,
                 std::size_t n) {
    if (rankings.size() != truth.size()) {
        throw ShapeError("recall_at: " + std::to_string(rankings.size()) +
                         " rankings vs " + std::to_string(truth.size()) +
                         " truth sets");
    }
    if (n < 1 || (!rankings.empty() && n > rankings.front().size())) {
        throw ConfigError("recall_at: N=" + std::to_string(n) +
                          " outside 1..k");
    }
    std::size_t counted = 0;
    std::size_t hits = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        if (truth[q].empty()) continue;
        ++counted;
        const auto& list = rankings[q];
        for (std::size_t r = 0; r < n; ++r) {
            if (std::binary_search(truth[q].begin(), truth[q].end(),
                                   list[r])) {
                ++hits;
                break;
            }
        }
    }
    if (counted == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(counted);
}

double RecallReport::at(std::size_t n) const {
    if (n < 1 || n > recall_curve.size()) {
        throw ConfigError("recall report: N=" + std::to_string(n) +
                          " outside 1..k");
    }
    return recall_curve[n - 1];
}

void EvalConfig::validate() const {
    if (k < 1) throw ConfigError("eval config: k must be >= 1");
    if (!(zeta > 0.0)) throw ConfigError("eval config: zeta must be positive");
    for (std::size_t n : report_n) {
        if (n < 1 || n > k) {
            throw ConfigError("eval config: report N=" + std::to_string(n) +
                              " outside 1..k");
        }
    }
}

RecallReport evaluate(const DescriptorDatabase& db, const Reranker& reranker,
                      const EvalConfig& cfg) {
    cfg.validate();
    db.validate();
    if (db.size() < cfg.k) {
        throw ConfigError("evaluate: database smaller than k");
    }

    RecallReport report;
    report.sequence_id = db.sequence_id;
    report.method = reranker.name();
    report.k = cfg.k;
    report.recall_curve.assign(cfg.k, 0.0);

    std::vector<std::size_t> hits(cfg.k, 0);
    std::vector<double> latencies;
    latencies.reserve(db.size());

    for (std::size_t q = 0; q < db.size(); ++q) {
        const auto exclude =
            FrameRange::around(db.frame_ids[q], cfg.exclusion_window);

        // Ground truth over the eligible database; queries without any true
        // loop do not enter the recall denominator.
        bool has_loop = false;
        for (std::size_t i = 0; i < db.size(); ++i) {
            if (exclude.contains(db.frame_ids[i])) continue;
            if (is_true_loop(db.poses[q], db.poses[i], cfg.zeta)) {
                has_loop = true;
                break;
            }
        }
        if (!has_loop) continue;

        std::vector<std::uint32_t> candidates;
        try {
            candidates = knn(db, db.descriptors.row(q), cfg.k, exclude);
        } catch (const CapacityError&) {
            ++report.skipped_queries;
            continue;
        }

        Mat cand_desc(cfg.k, db.dim());
        std::vector<std::array<double, 3>> cand_poses(cfg.k);
        for (std::size_t r = 0; r < cfg.k; ++r) {
            const auto row = db.descriptors.row(candidates[r]);
            std::copy(row.begin(), row.end(), cand_desc.row(r).begin());
            cand_poses[r] = db.poses[candidates[r]];
        }

        QueryContext ctx;
        ctx.query_descriptor = db.descriptors.row(q);
        ctx.query_pose = db.poses[q];
        ctx.candidate_poses = cand_poses;

        const auto t0 = std::chrono::steady_clock::now();
        const auto reordered = reranker.rerank(ctx, candidates, cand_desc);
        const auto t1 = std::chrono::steady_clock::now();
        latencies.push_back(std::chrono::duration<double>(t1 - t0).count());

        ++report.query_count;
        std::size_t first_hit = cfg.k; // first rank holding a true loop
        for (std::size_t r = 0; r < reordered.size(); ++r) {
            if (is_true_loop(db.poses[q], db.poses[reordered[r]], cfg.zeta)) {
                first_hit = r;
                break;
            }
        }
        for (std::size_t n = first_hit; n < cfg.k; ++n) {
            ++hits[n];
        }
    }

    if (report.query_count > 0) {
        for (std::size_t n = 0; n < cfg.k; ++n) {
            report.recall_curve[n] = static_cast<double>(hits[n]) /
                                     static_cast<double>(report.query_count);
        }
    }
    if (!latencies.empty()) {
        const double mean =
            std::accumulate(latencies.begin(), latencies.end(), 0.0) /
            static_cast<double>(latencies.size());
        double ss = 0.0;
        for (double v : latencies) ss += (v - mean) * (v - mean);
        report.latency.mean_s = mean;
        report.latency.stddev_s =
            latencies.size() > 1
                ? std::sqrt(ss / static_cast<double>(latencies.size() - 1))
                : 0.0;
        report.latency.count = latencies.size();
    }
    return report;
}

void write_recall_csv(const std::vector<RecallReport>& reports,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    out << "sequence,method,N,recall\n";
    char buf[32];
    for (const auto& r : reports) {
        for (std::size_t n = 1; n <= r.k; ++n) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.at(n));
            out << r.sequence_id << ',' << r.method << ',' << n << ',' << buf
                << '\n';
        }
    }
    if (!out) {
        throw DataError("write failed: " + path.string());
    }
}

void write_recall_json(const std::vector<RecallReport>& reports,
                       const std::filesystem::path& path) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json doc;
        doc["sequence"] = r.sequence_id;
        doc["method"] = r.method;
        doc["k"] = r.k;
        doc["recall"] = r.recall_curve;
        doc["query_count"] = r.query_count;
        doc["skipped_queries"] = r.skipped_queries;
        doc["latency"] = {{"mean_s", r.latency.mean_s},
                          {"stddev_s", r.latency.stddev_s},
                          {"count", r.latency.count}};
        docs.push_back(std::move(doc));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open for writing: " + path.string());
    }
    out << docs.dump(2) << '\n';
}

} // namespace trer
