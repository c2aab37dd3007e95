#include "trer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "trer/errors.hpp"
#include "trer/rng.hpp"

namespace trer {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("train config: learning_rate must be positive");
    }
    if (weight_decay < 0.0) {
        throw ConfigError("train config: weight_decay must be >= 0");
    }
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 ||
        adam_beta2 >= 1.0) {
        throw ConfigError("train config: betas must be in [0, 1)");
    }
    if (!(adam_eps > 0.0)) {
        throw ConfigError("train config: adam_eps must be positive");
    }
    if (batch_size < 1) {
        throw ConfigError("train config: batch_size must be >= 1");
    }
    if (!(sigma > 0.0)) {
        throw ConfigError("train config: sigma must be positive");
    }
    if (query_stride < 1) {
        throw ConfigError("train config: query_stride must be >= 1");
    }
}

namespace {

RankingSample make_sample(const DescriptorDatabase& db, std::size_t q,
                          std::span<const std::uint32_t> retrieved,
                          std::size_t k) {
    RankingSample s;
    s.query_id = db.frame_ids[q];
    s.query_pose = db.poses[q];
    const auto qrow = db.descriptors.row(q);
    s.query_descriptor.assign(qrow.begin(), qrow.end());
    s.candidates.assign(retrieved.begin(),
                        retrieved.begin() + static_cast<std::ptrdiff_t>(k));
    s.descriptors = Mat(k, db.dim());
    s.relevance.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::uint32_t idx = s.candidates[r];
        if (idx >= db.size()) {
            throw DataError("training set: candidate index " +
                            std::to_string(idx) + " outside database");
        }
        const auto row = db.descriptors.row(idx);
        std::copy(row.begin(), row.end(), s.descriptors.row(r).begin());
        double d2 = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double diff = db.poses[q][i] - db.poses[idx][i];
            d2 += diff * diff;
        }
        s.relevance[r] = -std::sqrt(d2); // larger = more relevant
    }
    return s;
}

} // namespace

std::vector<RankingSample> build_training_set(
    const DescriptorDatabase& db,
    const std::vector<std::vector<std::uint32_t>>& retrieved_per_query,
    std::size_t k, SampleBuildStats* stats) {
    db.validate();
    if (retrieved_per_query.size() > db.size()) {
        throw DataError("build_training_set: more retrieval lists than "
                        "database rows");
    }
    std::vector<RankingSample> samples;
    SampleBuildStats local;
    for (std::size_t q = 0; q < retrieved_per_query.size(); ++q) {
        const auto& retrieved = retrieved_per_query[q];
        if (retrieved.size() < k) {
            ++local.skipped;
            continue;
        }
        samples.push_back(make_sample(db, q, retrieved, k));
        ++local.built;
    }
    if (stats) *stats = local;
    return samples;
}

std::vector<RankingSample> retrieve_and_build(const DescriptorDatabase& db,
                                              std::size_t k,
                                              std::uint32_t exclusion_window,
                                              std::size_t stride,
                                              SampleBuildStats* stats) {
    db.validate();
    if (stride < 1) {
        throw ConfigError("retrieve_and_build: stride must be >= 1");
    }
    std::vector<std::size_t> queries;
    for (std::size_t q = 0; q < db.size(); q += stride) {
        queries.push_back(q);
    }
    std::vector<std::vector<std::uint32_t>> retrieved(queries.size());

    // Queries are independent; shard them over the hardware threads.
    const std::size_t n_workers = std::max<std::size_t>(
        1, std::min<std::size_t>(queries.size(),
                                 std::thread::hardware_concurrency()));
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t qi = w; qi < queries.size(); qi += n_workers) {
                const std::size_t q = queries[qi];
                const auto exclude =
                    FrameRange::around(db.frame_ids[q], exclusion_window);
                try {
                    retrieved[qi] = knn(db, db.descriptors.row(q), k, exclude);
                } catch (const CapacityError&) {
                    // left empty, counted as skipped below
                }
            }
        });
    }
    for (auto& t : workers) t.join();

    std::vector<RankingSample> samples;
    SampleBuildStats local;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        if (retrieved[qi].size() < k) {
            ++local.skipped;
            continue;
        }
        samples.push_back(make_sample(db, queries[qi], retrieved[qi], k));
        ++local.built;
    }
    if (stats) *stats = local;
    return samples;
}

LossResult logistic_loss(std::span<const double> relevance,
                         std::span<const double> scores, double sigma) {
    if (relevance.size() != scores.size()) {
        throw ShapeError("logistic_loss: " + std::to_string(relevance.size()) +
                         " relevances vs " + std::to_string(scores.size()) +
                         " scores");
    }
    if (!(sigma > 0.0)) {
        throw ConfigError("logistic_loss: sigma must be positive");
    }
    const std::size_t k = scores.size();
    const double inv_ln2 = 1.0 / std::log(2.0);
    LossResult result;
    result.grad.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (!(relevance[i] > relevance[j])) continue; // strict ordering
            const double x = sigma * (scores[i] - scores[j]);
            // log2(1 + e^-x) in softplus form, stable for any |x|.
            const double softplus =
                x > 0.0 ? std::log1p(std::exp(-x))
                        : -x + std::log1p(std::exp(x));
            result.loss += softplus * inv_ln2;
            // d/dx log(1+e^-x) = -1/(1+e^x)
            const double g = -sigma * inv_ln2 / (1.0 + std::exp(x));
            result.grad[i] += g;
            result.grad[j] -= g;
        }
    }
    return result;
}

AdamState make_adam_state(const ModelConfig& cfg) {
    AdamState state;
    state.m = zero_weights(cfg);
    state.v = zero_weights(cfg);
    return state;
}

bool adamw_step(ModelWeights& weights, const ModelWeights& grads,
                AdamState& state, const TrainConfig& cfg) {
    auto wt = weights.tensors();
    const auto gt = grads.tensors();
    auto mt = state.m.tensors();
    auto vt = state.v.tensors();
    if (wt.size() != gt.size()) {
        throw ShapeError("adamw_step: weight/gradient tensor counts differ");
    }
    for (std::size_t t = 0; t < wt.size(); ++t) {
        if (wt[t].rows != gt[t].rows || wt[t].cols != gt[t].cols) {
            throw ShapeError("adamw_step: shape mismatch in " + wt[t].name);
        }
        if (!all_finite({gt[t].data, gt[t].size()})) {
            return false; // step rejected, caller logs it
        }
    }

    state.step += 1;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double bc1 =
        1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 =
        1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr = cfg.learning_rate;

    for (std::size_t t = 0; t < wt.size(); ++t) {
        double* w = wt[t].data;
        const double* g = gt[t].data;
        double* m = mt[t].data;
        double* v = vt[t].data;
        const std::size_t n = wt[t].size();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            // Decoupled weight decay, applied directly to the weight.
            w[i] -= lr * cfg.weight_decay * w[i];
            w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
    return true;
}

Mat sample_input(const ModelConfig& cfg, const RankingSample& sample) {
    if (!cfg.include_query) {
        return sample.descriptors;
    }
    if (sample.query_descriptor.size() != cfg.d) {
        throw ShapeError("sample_input: query descriptor has " +
                         std::to_string(sample.query_descriptor.size()) +
                         " dims, model expects " + std::to_string(cfg.d));
    }
    Mat out(cfg.input_rows(), cfg.d);
    std::copy(sample.query_descriptor.begin(), sample.query_descriptor.end(),
              out.row(0).begin());
    for (std::size_t r = 0; r < sample.descriptors.rows; ++r) {
        const auto row = sample.descriptors.row(r);
        std::copy(row.begin(), row.end(), out.row(r + 1).begin());
    }
    return out;
}

namespace {

struct BatchAccum {
    ModelWeights grads;
    double loss_sum = 0.0;
};

void accumulate_weights(ModelWeights& into, const ModelWeights& from) {
    auto a = into.tensors();
    const auto b = from.tensors();
    for (std::size_t t = 0; t < a.size(); ++t) {
        double* x = a[t].data;
        const double* y = b[t].data;
        for (std::size_t i = 0; i < a[t].size(); ++i) x[i] += y[i];
    }
}

void scale_weights(ModelWeights& w, double factor) {
    for (auto& t : w.tensors()) {
        for (std::size_t i = 0; i < t.size(); ++i) t.data[i] *= factor;
    }
}

} // namespace

TrainResult train(const std::vector<RankingSample>& samples,
                  const ModelConfig& model_cfg, const TrainConfig& cfg) {
    model_cfg.validate();
    cfg.validate();
    if (samples.empty()) {
        throw DataError("train: empty sample list");
    }
    for (const auto& s : samples) {
        if (s.candidates.size() != model_cfg.k ||
            s.descriptors.rows != model_cfg.k ||
            s.descriptors.cols != model_cfg.d ||
            s.relevance.size() != model_cfg.k) {
            throw ShapeError("train: sample for query " +
                             std::to_string(s.query_id) +
                             " does not match the model config");
        }
    }

    TrainResult result;
    result.weights = init_weights(model_cfg, cfg.seed);
    if (cfg.epochs == 0) {
        return result;
    }

    AdamState adam = make_adam_state(model_cfg);
    Rng shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t n_workers = std::max<std::size_t>(
        1, cfg.threads != 0 ? cfg.threads
                            : std::thread::hardware_concurrency());

    double best_loss = 0.0;
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t rejected = 0;

        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + cfg.batch_size);
            const std::size_t batch = end - start;
            const std::size_t workers = std::min(n_workers, batch);

            // Each worker owns a contiguous chunk; partial sums are merged
            // in worker order so the result is independent of scheduling.
            std::vector<BatchAccum> partial;
            partial.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                partial.push_back({zero_weights(model_cfg), 0.0});
            }
            auto run_chunk = [&](std::size_t w) {
                const std::size_t chunk = (batch + workers - 1) / workers;
                const std::size_t lo = start + w * chunk;
                const std::size_t hi = std::min(end, lo + chunk);
                for (std::size_t s = lo; s < hi; ++s) {
                    const auto& sample = samples[order[s]];
                    const Mat input = sample_input(model_cfg, sample);
                    ForwardTrace trace;
                    const auto scores =
                        forward(model_cfg, result.weights, input, trace);
                    const auto loss =
                        logistic_loss(sample.relevance, scores, cfg.sigma);
                    partial[w].loss_sum += loss.loss;
                    const auto g =
                        backward(model_cfg, result.weights, trace, loss.grad);
                    accumulate_weights(partial[w].grads, g);
                }
            };
            if (workers == 1) {
                run_chunk(0);
            } else {
                std::vector<std::thread> pool;
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back(run_chunk, w);
                }
                for (auto& t : pool) t.join();
            }

            ModelWeights grads = std::move(partial[0].grads);
            double batch_loss = partial[0].loss_sum;
            for (std::size_t w = 1; w < workers; ++w) {
                accumulate_weights(grads, partial[w].grads);
                batch_loss += partial[w].loss_sum;
            }
            scale_weights(grads, 1.0 / static_cast<double>(batch));
            epoch_loss += batch_loss;

            if (!adamw_step(result.weights, grads, adam, cfg)) {
                ++rejected;
            }
        }

        const auto t_end = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = epoch_loss / static_cast<double>(samples.size());
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(t_end - t_start).count();
        rec.rejected_steps = rejected;
        result.log.push_back(rec);

        if (cfg.patience > 0) {
            if (epoch == 0 || rec.mean_loss < best_loss) {
                best_loss = rec.mean_loss;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.patience) {
                break;
            }
        }
    }
    return result;
}

} // namespace trer
