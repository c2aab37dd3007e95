#include "trer/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "trer/baselines.hpp"
#include "trer/errors.hpp"
#include "trer/gradcheck.hpp"
#include "trer/model.hpp"
#include "trer/retrieval.hpp"
#include "trer/rng.hpp"
#include "trer/serialize.hpp"
#include "trer/synthdata.hpp"
#include "trer/training.hpp"

namespace trer {

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
    Mat m(rows, cols);
    for (auto& v : m.data) v = rng.normal();
    return m;
}

SuiteResult suite_gradcheck(const VerifyHooks& hooks) {
    SuiteResult result{"gradcheck", false, ""};
    ModelConfig cfg;
    cfg.d = 6;
    cfg.k = 3;
    cfg.d_h = 8;
    cfg.n_heads = 2;
    cfg.n_encoders = 2;

    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ModelWeights w = init_weights(cfg, seed);
        Rng rng(seed * 77 + 5);
        const Mat input = random_mat(cfg.k, cfg.d, rng);
        std::vector<double> relevance(cfg.k);
        for (auto& y : relevance) y = rng.normal();

        const auto x0 = w.flatten();
        auto loss_at = [&](std::span<const double> params) {
            ModelWeights probe = zero_weights(cfg);
            probe.unflatten(params);
            const auto scores = forward(cfg, probe, input);
            return logistic_loss(relevance, scores, 1.0).loss;
        };

        ForwardTrace trace;
        const auto scores = forward(cfg, w, input, trace);
        const auto loss = logistic_loss(relevance, scores, 1.0);
        ModelWeights grads = backward(cfg, w, trace, loss.grad);
        auto analytic = grads.flatten();
        if (hooks.flip_gradient_sign) {
            for (auto& g : analytic) g = -g;
        }
        worst = std::max(worst, grad_check(loss_at, x0, analytic, 1e-5));
    }
    result.pass = worst < 1e-4;
    result.detail = "max relative error " + std::to_string(worst);
    return result;
}

// Straight-line pair sum; deliberately the naive formula, valid at the
// small magnitudes used here.
double pair_sum_reference(std::span<const double> y,
                          std::span<const double> s, double sigma) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[i] > y[j]) {
                total += std::log2(1.0 + std::exp(-sigma * (s[i] - s[j])));
            }
        }
    }
    return total;
}

SuiteResult suite_loss_oracle(const VerifyHooks&) {
    SuiteResult result{"loss_oracle", false, ""};
    Rng rng(404);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + static_cast<std::size_t>(rng.next_u64() % 5);
        std::vector<double> y(k), s(k);
        for (auto& v : y) v = rng.uniform(-3.0, 3.0);
        for (auto& v : s) v = rng.uniform(-3.0, 3.0);
        const double sigma = rng.uniform(0.2, 3.0);
        const auto got = logistic_loss(y, s, sigma);
        worst = std::max(worst,
                         std::fabs(got.loss - pair_sum_reference(y, s, sigma)));
    }
    // All-equal scores must give exactly one bit per ordered pair.
    std::vector<double> y = {3.0, 1.0, 2.0, 0.5};
    std::vector<double> s = {1.0, 1.0, 1.0, 1.0};
    const auto equal_scores = logistic_loss(y, s, 2.5);
    const bool count_ok = equal_scores.loss == 6.0;

    result.pass = worst < 1e-10 && count_ok;
    result.detail = "max abs deviation " + std::to_string(worst) +
                    (count_ok ? "" : ", pair-count mismatch");
    return result;
}

SuiteResult suite_knn_oracle(const VerifyHooks&) {
    SuiteResult result{"knn_oracle", false, ""};
    Rng rng(2024);
    const std::size_t n = 1000;
    const std::size_t d = 8;
    DescriptorDatabase db;
    db.sequence_id = "verify";
    db.descriptors = random_mat(n, d, rng);
    db.poses.assign(n, {0.0, 0.0, 0.0});
    db.frame_ids.resize(n);
    std::iota(db.frame_ids.begin(), db.frame_ids.end(), 0);

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> query(d);
        for (auto& v : query) v = rng.normal();
        const auto got = knn(db, query, 10);

        std::vector<std::pair<double, std::uint32_t>> ref;
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = db.descriptors.at(i, c) - query[c];
                d2 += diff * diff;
            }
            ref.emplace_back(d2, static_cast<std::uint32_t>(i));
        }
        std::sort(ref.begin(), ref.end());
        for (std::size_t r = 0; r < got.size(); ++r) {
            if (got[r] != ref[r].second) {
                result.detail = "mismatch at trial " + std::to_string(trial);
                return result;
            }
        }
    }
    result.pass = true;
    result.detail = "200 queries exact";
    return result;
}

SuiteResult suite_numkit_invariants(const VerifyHooks&) {
    SuiteResult result{"numkit_invariants", false, ""};
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Mat m = random_mat(5, 7, rng);
        const Mat p = softmax_rows(m);
        Mat shifted = m;
        const double c = rng.uniform(-50.0, 50.0);
        for (auto& v : shifted.data) v += c;
        const Mat p2 = softmax_rows(shifted);
        for (std::size_t r = 0; r < p.rows; ++r) {
            double sum = 0.0;
            for (double v : p.row(r)) sum += v;
            worst = std::max(worst, std::fabs(sum - 1.0));
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            worst = std::max(worst, std::fabs(p.data[i] - p2.data[i]));
        }

        std::vector<double> gain(m.cols, 1.0), bias(m.cols, 0.0);
        const Mat ln = layer_norm(m, gain, bias, 1e-8);
        const Mat ln2 = layer_norm(shifted, gain, bias, 1e-8);
        for (std::size_t i = 0; i < ln.size(); ++i) {
            worst = std::max(worst, std::fabs(ln.data[i] - ln2.data[i]));
        }
    }
    result.pass = worst < 1e-9;
    result.detail = "max deviation " + std::to_string(worst);
    return result;
}

SuiteResult suite_rerank_permutation(const VerifyHooks&) {
    SuiteResult result{"rerank_permutation", false, ""};
    Rng rng(31);
    const std::size_t k = 8;
    const std::size_t d = 6;
    ModelConfig cfg;
    cfg.d = d;
    cfg.k = k;
    cfg.d_h = 12;

    const TrerReranker trer_rr(cfg, init_weights(cfg, 9));
    const IdentityReranker identity_rr;
    const AlphaQEReranker qe_rr(AlphaQEConfig{2.0, 4, true});
    const OracleReranker oracle_rr;
    const Reranker* rerankers[] = {&trer_rr, &identity_rr, &qe_rr, &oracle_rr};

    for (int trial = 0; trial < 25; ++trial) {
        const Mat descriptors = random_mat(k, d, rng);
        std::vector<double> query(d);
        for (auto& v : query) v = rng.normal();
        std::vector<std::uint32_t> ids(k);
        for (auto& id : ids) {
            id = static_cast<std::uint32_t>(rng.next_u64() % 1000);
        }
        std::vector<std::array<double, 3>> poses(k);
        for (auto& p : poses) p = {rng.normal(), rng.normal(), 0.0};

        QueryContext ctx;
        ctx.query_descriptor = query;
        ctx.query_pose = {0.0, 0.0, 0.0};
        ctx.candidate_poses = poses;

        for (const auto* rr : rerankers) {
            auto out = rr->rerank(ctx, ids, descriptors);
            auto sorted_out = out;
            auto sorted_in = ids;
            std::sort(sorted_out.begin(), sorted_out.end());
            std::sort(sorted_in.begin(), sorted_in.end());
            if (sorted_out != sorted_in) {
                result.detail = rr->name() + " broke the permutation";
                return result;
            }
        }
    }
    result.pass = true;
    result.detail = "4 rerankers x 25 instances";
    return result;
}

SuiteResult suite_roundtrip(const VerifyHooks&) {
    SuiteResult result{"roundtrip", false, ""};
    const auto dir = std::filesystem::temp_directory_path() / "trer_verify";
    std::filesystem::create_directories(dir);

    ModelConfig cfg;
    cfg.d = 5;
    cfg.k = 4;
    cfg.d_h = 7;
    const ModelWeights w = init_weights(cfg, 3);
    const auto wpath = dir / "verify.trrw";
    save_weights(cfg, w, wpath);
    const auto loaded = load_weights(wpath);
    if (!(loaded.weights == w)) {
        result.detail = "weights round-trip not bit-exact";
        return result;
    }

    WorldConfig world;
    world.sequence_id = "verify";
    world.n_frames = 120;
    world.descriptor_dim = 5;
    world.seed = 8;
    const auto db = generate_world(world);
    const auto dpath = dir / "verify.trrd";
    save_dataset(db, dpath);
    const auto db2 = load_dataset(dpath);
    if (db2.descriptors.data != db.descriptors.data ||
        db2.poses != db.poses || db2.frame_ids != db.frame_ids) {
        result.detail = "dataset round-trip not bit-exact";
        return result;
    }

    // A flipped payload byte must be rejected, not read.
    auto bytes = ByteReader::from_file(dpath);
    std::vector<unsigned char> corrupted(bytes.all().begin(),
                                         bytes.all().end());
    corrupted[corrupted.size() / 2] ^= 0x40;
    const auto cpath = dir / "corrupt.trrd";
    {
        std::ofstream out(cpath, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(corrupted.data()),
                  static_cast<std::streamsize>(corrupted.size()));
    }
    try {
        (void)load_dataset(cpath);
        result.detail = "corrupted dataset was accepted";
        return result;
    } catch (const FormatError&) {
    }

    result.pass = true;
    result.detail = "weights + dataset bit-exact, corruption rejected";
    return result;
}

SuiteResult suite_alpha_qe_reference(const VerifyHooks&) {
    SuiteResult result{"alpha_qe_reference", false, ""};
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t k = 6;
        const std::size_t d = 5;
        const Mat descriptors = random_mat(k, d, rng);
        std::vector<double> query(d);
        for (auto& v : query) v = rng.normal();
        std::vector<std::uint32_t> ids(k);
        std::iota(ids.begin(), ids.end(), 100);
        AlphaQEConfig cfg;
        cfg.alpha = rng.uniform(0.0, 4.0);
        cfg.n_expand = 3;

        // Straight-line restatement of the expansion formula.
        auto unit = [](std::vector<double> v) {
            double n = 0.0;
            for (double x : v) n += x * x;
            n = std::sqrt(n);
            for (auto& x : v) x /= n;
            return v;
        };
        const auto qn = unit(query);
        std::vector<double> expanded = query;
        for (std::size_t i = 0; i < cfg.n_expand; ++i) {
            std::vector<double> row(descriptors.row(i).begin(),
                                    descriptors.row(i).end());
            const auto rn = unit(row);
            double sim = 0.0;
            for (std::size_t c = 0; c < d; ++c) sim += qn[c] * rn[c];
            sim = std::clamp(sim, 0.0, 1.0);
            const double wgt = std::pow(sim, cfg.alpha);
            for (std::size_t c = 0; c < d; ++c) {
                expanded[c] += wgt * descriptors.at(i, c);
            }
        }
        expanded = unit(expanded);
        std::vector<std::pair<double, std::uint32_t>> ref;
        for (std::size_t r = 0; r < k; ++r) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = descriptors.at(r, c) - expanded[c];
                d2 += diff * diff;
            }
            ref.emplace_back(d2, ids[r]);
        }
        std::stable_sort(ref.begin(), ref.end(),
                         [](const auto& a, const auto& b) {
                             return a.first < b.first;
                         });

        const auto got = alpha_qe_rerank(query, ids, descriptors, cfg);
        for (std::size_t r = 0; r < k; ++r) {
            if (got[r] != ref[r].second) {
                result.detail = "ordering mismatch at trial " +
                                std::to_string(trial);
                return result;
            }
        }
    }
    result.pass = true;
    result.detail = "25 instances exact";
    return result;
}

} // namespace

std::vector<SuiteResult> run_verify_suites(const VerifyHooks& hooks) {
    std::vector<SuiteResult> results;
    results.push_back(suite_gradcheck(hooks));
    results.push_back(suite_loss_oracle(hooks));
    results.push_back(suite_knn_oracle(hooks));
    results.push_back(suite_numkit_invariants(hooks));
    results.push_back(suite_rerank_permutation(hooks));
    results.push_back(suite_roundtrip(hooks));
    results.push_back(suite_alpha_qe_reference(hooks));
    return results;
}

} // namespace trer
