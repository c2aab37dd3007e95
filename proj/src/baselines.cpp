#include "trer/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "trer/errors.hpp"

namespace trer {

void AlphaQEConfig::validate(std::size_t k) const {
    if (alpha < 0.0) {
        throw ConfigError("alpha-qe: alpha must be >= 0");
    }
    if (n_expand > k) {
        throw ConfigError("alpha-qe: n_expand=" + std::to_string(n_expand) +
                          " exceeds k=" + std::to_string(k));
    }
}

namespace {

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Stable sort of candidate positions by ascending distance to `reference`.
std::vector<std::uint32_t> sort_by_distance(
    const std::vector<std::uint32_t>& candidates, const Mat& descriptors,
    std::span<const double> reference) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> d2(candidates.size());
    for (std::size_t r = 0; r < candidates.size(); ++r) {
        const auto row = descriptors.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double diff = row[c] - reference[c];
            s += diff * diff;
        }
        d2[r] = s;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&d2](std::size_t a, std::size_t b) {
                         return d2[a] < d2[b];
                     });
    std::vector<std::uint32_t> out;
    out.reserve(candidates.size());
    for (std::size_t r : order) out.push_back(candidates[r]);
    return out;
}

} // namespace

std::vector<std::uint32_t> alpha_qe_rerank(
    std::span<const double> query_descriptor,
    const std::vector<std::uint32_t>& candidates, const Mat& descriptors,
    const AlphaQEConfig& cfg) {
    const std::size_t k = candidates.size();
    if (descriptors.rows != k || descriptors.cols != query_descriptor.size()) {
        throw ShapeError("alpha-qe: descriptors are " +
                         std::to_string(descriptors.rows) + "x" +
                         std::to_string(descriptors.cols) + " for " +
                         std::to_string(k) + " candidates of dim " +
                         std::to_string(query_descriptor.size()));
    }
    cfg.validate(k);
    const std::size_t d = query_descriptor.size();

    const double qnorm = norm(query_descriptor);
    if (cfg.normalize && qnorm == 0.0) {
        throw NumericError("alpha-qe: zero-norm query descriptor");
    }

    // q' = q + sum_i sim^alpha * d_i over the expansion set.
    std::vector<double> expanded(query_descriptor.begin(),
                                 query_descriptor.end());
    for (std::size_t i = 0; i < cfg.n_expand; ++i) {
        const auto row = descriptors.row(i);
        double sim = dot(query_descriptor, row);
        if (cfg.normalize) {
            const double rnorm = norm(row);
            if (rnorm == 0.0) {
                throw NumericError("alpha-qe: zero-norm descriptor row " +
                                   std::to_string(i));
            }
            sim /= qnorm * rnorm;
            sim = std::clamp(sim, 0.0, 1.0);
        } else {
            sim = std::max(sim, 0.0); // keep weights real for fractional alpha
        }
        const double weight = std::pow(sim, cfg.alpha);
        for (std::size_t c = 0; c < d; ++c) {
            expanded[c] += weight * row[c];
        }
    }
    if (cfg.normalize) {
        const double enorm = norm(expanded);
        if (enorm == 0.0) {
            throw NumericError("alpha-qe: expanded query has zero norm");
        }
        for (auto& v : expanded) v /= enorm;
    }
    return sort_by_distance(candidates, descriptors, expanded);
}

std::vector<std::uint32_t> identity_rerank(
    const std::vector<std::uint32_t>& candidates) {
    return candidates;
}

std::vector<std::uint32_t> oracle_rerank(
    const std::vector<std::uint32_t>& candidates,
    const std::array<double, 3>& query_pose,
    std::span<const std::array<double, 3>> candidate_poses) {
    if (candidate_poses.size() != candidates.size()) {
        throw DataError("oracle: " + std::to_string(candidate_poses.size()) +
                        " poses for " + std::to_string(candidates.size()) +
                        " candidates");
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> d2(candidates.size());
    for (std::size_t r = 0; r < candidates.size(); ++r) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double diff = query_pose[i] - candidate_poses[r][i];
            s += diff * diff;
        }
        d2[r] = s;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&d2](std::size_t a, std::size_t b) {
                         return d2[a] < d2[b];
                     });
    std::vector<std::uint32_t> out;
    out.reserve(candidates.size());
    for (std::size_t r : order) out.push_back(candidates[r]);
    return out;
}

TrerReranker::TrerReranker(ModelConfig cfg, ModelWeights weights)
    : cfg_(cfg), weights_(std::move(weights)) {
    cfg_.validate();
}

std::vector<std::uint32_t> TrerReranker::rerank(
    const QueryContext& ctx, const std::vector<std::uint32_t>& candidates,
    const Mat& descriptors) const {
    if (!cfg_.include_query) {
        return trer::rerank(cfg_, weights_, candidates, descriptors).ranking;
    }
    if (ctx.query_descriptor.size() != cfg_.d) {
        throw ShapeError("trer: query descriptor has " +
                         std::to_string(ctx.query_descriptor.size()) +
                         " dims, model expects " + std::to_string(cfg_.d));
    }
    Mat with_query(cfg_.input_rows(), cfg_.d);
    std::copy(ctx.query_descriptor.begin(), ctx.query_descriptor.end(),
              with_query.row(0).begin());
    for (std::size_t r = 0; r < descriptors.rows; ++r) {
        const auto row = descriptors.row(r);
        std::copy(row.begin(), row.end(), with_query.row(r + 1).begin());
    }
    return trer::rerank(cfg_, weights_, candidates, with_query).ranking;
}

} // namespace trer
