#include "trer/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "trer/errors.hpp"
#include "trer/rng.hpp"

namespace trer {

void ModelConfig::validate() const {
    if (d < 1 || k < 1 || d_h < 1 || n_heads < 1 || n_encoders < 1) {
        throw ConfigError("model config: d, k, d_h, n_heads, n_encoders must "
                          "all be >= 1");
    }
    if (!(loss_sigma > 0.0)) {
        throw ConfigError("model config: loss_sigma must be positive");
    }
    if (!(ln_eps > 0.0)) {
        throw ConfigError("model config: ln_eps must be positive");
    }
}

namespace {

TensorView view(const std::string& name, Mat& m) {
    return {name, m.data.data(), m.rows, m.cols};
}

TensorView view(const std::string& name, std::vector<double>& v) {
    return {name, v.data(), 1, v.size()};
}

std::vector<TensorView> collect(ModelWeights& w) {
    std::vector<TensorView> out;
    for (std::size_t i = 0; i < w.encoders.size(); ++i) {
        auto& enc = w.encoders[i];
        const std::string p = "enc" + std::to_string(i) + ".";
        for (std::size_t j = 0; j < enc.heads.size(); ++j) {
            const std::string h = p + "head" + std::to_string(j) + ".";
            out.push_back(view(h + "wq", enc.heads[j].wq));
            out.push_back(view(h + "wk", enc.heads[j].wk));
            out.push_back(view(h + "wv", enc.heads[j].wv));
        }
        out.push_back(view(p + "w_ao", enc.w_ao));
        out.push_back(view(p + "ln1_gain", enc.ln1_gain));
        out.push_back(view(p + "ln1_bias", enc.ln1_bias));
        out.push_back(view(p + "ln2_gain", enc.ln2_gain));
        out.push_back(view(p + "ln2_bias", enc.ln2_bias));
        out.push_back(view(p + "w1", enc.w1));
        out.push_back(view(p + "b1", enc.b1));
        out.push_back(view(p + "w2", enc.w2));
        out.push_back(view(p + "b2", enc.b2));
    }
    out.push_back(view("head.w_out", w.w_out));
    out.push_back(view("head.b_out", w.b_out));
    return out;
}

// Fingerprint of shapes plus a few sentinel elements per tensor; cheap
// enough to compute on every forward and strong enough to catch a trace
// paired with the wrong weights.
std::uint64_t weight_probe(const ModelWeights& w) {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (const auto& t : const_cast<ModelWeights&>(w).tensors()) {
        mix(t.rows);
        mix(t.cols);
        if (t.size() == 0) continue;
        mix(std::bit_cast<std::uint64_t>(t.data[0]));
        mix(std::bit_cast<std::uint64_t>(t.data[t.size() / 2]));
        mix(std::bit_cast<std::uint64_t>(t.data[t.size() - 1]));
    }
    return h;
}

} // namespace

std::vector<TensorView> ModelWeights::tensors() {
    return collect(*this);
}

std::vector<TensorView> ModelWeights::tensors() const {
    return collect(const_cast<ModelWeights&>(*this));
}

std::size_t ModelWeights::param_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
}

void ModelWeights::fill(double value) {
    for (auto& t : tensors()) {
        std::fill(t.data, t.data + t.size(), value);
    }
}

std::vector<double> ModelWeights::flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& t : tensors()) {
        out.insert(out.end(), t.data, t.data + t.size());
    }
    return out;
}

void ModelWeights::unflatten(std::span<const double> values) {
    if (values.size() != param_count()) {
        throw ShapeError("unflatten: " + std::to_string(values.size()) +
                         " values vs " + std::to_string(param_count()) +
                         " parameters");
    }
    std::size_t pos = 0;
    for (auto& t : tensors()) {
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(pos),
                  values.begin() + static_cast<std::ptrdiff_t>(pos + t.size()),
                  t.data);
        pos += t.size();
    }
}

bool ModelWeights::operator==(const ModelWeights& other) const {
    const auto a = tensors();
    const auto b = other.tensors();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows != b[i].rows || a[i].cols != b[i].cols) return false;
        if (!std::equal(a[i].data, a[i].data + a[i].size(), b[i].data)) {
            return false;
        }
    }
    return true;
}

ModelWeights zero_weights(const ModelConfig& cfg) {
    cfg.validate();
    ModelWeights w;
    w.encoders.resize(cfg.n_encoders);
    for (auto& enc : w.encoders) {
        enc.heads.resize(cfg.n_heads);
        for (auto& head : enc.heads) {
            head.wq = Mat(cfg.d, cfg.d);
            head.wk = Mat(cfg.d, cfg.d);
            head.wv = Mat(cfg.d, cfg.d);
        }
        enc.w_ao = Mat(cfg.n_heads * cfg.d, cfg.d);
        enc.ln1_gain.assign(cfg.d, 0.0);
        enc.ln1_bias.assign(cfg.d, 0.0);
        enc.ln2_gain.assign(cfg.d, 0.0);
        enc.ln2_bias.assign(cfg.d, 0.0);
        enc.w1 = Mat(cfg.d, cfg.d_h);
        enc.b1.assign(cfg.d_h, 0.0);
        enc.w2 = Mat(cfg.d_h, cfg.d);
        enc.b2.assign(cfg.d, 0.0);
    }
    w.w_out = Mat(cfg.input_rows(), cfg.k);
    w.b_out.assign(cfg.k, 0.0);
    return w;
}

namespace {

void glorot(Mat& m, Rng& rng) {
    // fan_in = rows, fan_out = cols under the row-vector convention.
    const double bound =
        std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (auto& v : m.data) {
        v = rng.uniform(-bound, bound);
    }
}

} // namespace

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
    ModelWeights w = zero_weights(cfg);
    Rng rng(seed);
    for (auto& enc : w.encoders) {
        for (auto& head : enc.heads) {
            glorot(head.wq, rng);
            glorot(head.wk, rng);
            glorot(head.wv, rng);
        }
        glorot(enc.w_ao, rng);
        std::fill(enc.ln1_gain.begin(), enc.ln1_gain.end(), 1.0);
        std::fill(enc.ln2_gain.begin(), enc.ln2_gain.end(), 1.0);
        glorot(enc.w1, rng);
        glorot(enc.w2, rng);
    }
    glorot(w.w_out, rng);
    return w;
}

std::size_t param_count(const ModelConfig& cfg) {
    return zero_weights(cfg).param_count();
}

std::vector<TensorCount> param_breakdown(const ModelConfig& cfg) {
    std::vector<TensorCount> out;
    for (const auto& t : zero_weights(cfg).tensors()) {
        out.push_back({t.name, t.rows, t.cols, t.size()});
    }
    return out;
}

namespace {

void check_forward_shapes(const ModelConfig& cfg, const ModelWeights& w,
                          const Mat& descriptors) {
    if (descriptors.rows != cfg.input_rows() || descriptors.cols != cfg.d) {
        throw ShapeError("forward: descriptors are " +
                         std::to_string(descriptors.rows) + "x" +
                         std::to_string(descriptors.cols) + ", expected " +
                         std::to_string(cfg.input_rows()) + "x" +
                         std::to_string(cfg.d));
    }
    if (w.encoders.size() != cfg.n_encoders ||
        (cfg.n_encoders > 0 && w.encoders[0].heads.size() != cfg.n_heads) ||
        w.w_out.rows != cfg.input_rows() || w.w_out.cols != cfg.k) {
        throw ShapeError("forward: weights do not match the model config");
    }
}

Mat normalize_rows_or_throw(const Mat& m) {
    Mat out = m;
    for (std::size_t r = 0; r < out.rows; ++r) {
        auto row = out.row(r);
        double norm2 = 0.0;
        for (double v : row) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            throw NumericError("normalize_input: zero-norm descriptor row " +
                               std::to_string(r));
        }
        for (auto& v : row) v /= norm;
    }
    return out;
}

} // namespace

std::vector<double> forward(const ModelConfig& cfg, const ModelWeights& w,
                            const Mat& descriptors, ForwardTrace& trace) {
    check_forward_shapes(cfg, w, descriptors);
    const std::size_t rows = cfg.input_rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));

    trace.encoders.clear();
    trace.encoders.reserve(cfg.n_encoders);

    Mat z = cfg.normalize_input ? normalize_rows_or_throw(descriptors)
                                : descriptors;

    for (std::size_t i = 0; i < cfg.n_encoders; ++i) {
        const auto& enc = w.encoders[i];
        EncoderTrace t;
        t.z_in = z;

        t.heads_concat = Mat(rows, cfg.n_heads * cfg.d);
        for (std::size_t j = 0; j < cfg.n_heads; ++j) {
            t.q.push_back(matmul(z, enc.heads[j].wq));
            t.k.push_back(matmul(z, enc.heads[j].wk));
            t.v.push_back(matmul(z, enc.heads[j].wv));
            Mat logits = matmul_transposed(t.q[j], t.k[j]);
            for (auto& v : logits.data) v *= scale;
            t.attn.push_back(softmax_rows(logits));
            const Mat head_out = matmul(t.attn[j], t.v[j]);
            for (std::size_t r = 0; r < rows; ++r) {
                std::copy(head_out.row(r).begin(), head_out.row(r).end(),
                          t.heads_concat.row(r).begin() + j * cfg.d);
            }
        }
        const Mat attn_out = matmul(t.heads_concat, enc.w_ao);

        t.res1 = z;
        for (std::size_t idx = 0; idx < t.res1.size(); ++idx) {
            t.res1.data[idx] += attn_out.data[idx];
        }
        t.z_bar = layer_norm(t.res1, enc.ln1_gain, enc.ln1_bias, cfg.ln_eps);

        t.ffn_pre = matmul(t.z_bar, enc.w1);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = t.ffn_pre.row(r);
            for (std::size_t c = 0; c < cfg.d_h; ++c) row[c] += enc.b1[c];
        }
        t.ffn_act = t.ffn_pre;
        for (auto& v : t.ffn_act.data) v = std::max(0.0, v);

        t.res2 = matmul(t.ffn_act, enc.w2);
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = t.res2.row(r);
            for (std::size_t c = 0; c < cfg.d; ++c) row[c] += enc.b2[c];
        }
        if (cfg.second_residual) {
            for (std::size_t idx = 0; idx < t.res2.size(); ++idx) {
                t.res2.data[idx] += t.z_bar.data[idx];
            }
        }
        t.z_out = layer_norm(t.res2, enc.ln2_gain, enc.ln2_bias, cfg.ln_eps);

        z = t.z_out;
        trace.encoders.push_back(std::move(t));
    }

    // Scoring head: row-wise feature max, then a k-wide linear projection.
    trace.pooled.assign(rows, 0.0);
    trace.argmax.assign(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = z.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < cfg.d; ++c) {
            if (row[c] > row[best]) best = c; // ties keep the lowest index
        }
        trace.pooled[r] = row[best];
        trace.argmax[r] = best;
    }
    trace.scores.assign(cfg.k, 0.0);
    for (std::size_t c = 0; c < cfg.k; ++c) {
        double acc = w.b_out[c];
        for (std::size_t r = 0; r < rows; ++r) {
            acc += trace.pooled[r] * w.w_out.at(r, c);
        }
        trace.scores[c] = acc;
    }
    trace.weight_probe = weight_probe(w);
    return trace.scores;
}

std::vector<double> forward(const ModelConfig& cfg, const ModelWeights& w,
                            const Mat& descriptors) {
    ForwardTrace trace;
    return forward(cfg, w, descriptors, trace);
}

namespace {

// dY for y = LN(x) with population variance. Accumulates dgain/dbias and
// returns dx. mean/var are recomputed from x; identical arithmetic to the
// forward pass.
Mat layer_norm_backward(const Mat& x, std::span<const double> gain,
                        double eps, const Mat& dy,
                        std::span<double> dgain_acc,
                        std::span<double> dbias_acc) {
    Mat dx(x.rows, x.cols);
    const double n = static_cast<double>(x.cols);
    std::vector<double> xhat(x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const auto xr = x.row(r);
        const auto dyr = dy.row(r);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : xr) {
            const double d = v - mean;
            var += d * d;
        }
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + eps);

        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            xhat[c] = (xr[c] - mean) * inv_std;
            dgain_acc[c] += dyr[c] * xhat[c];
            dbias_acc[c] += dyr[c];
            const double dxhat = dyr[c] * gain[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[c];
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        auto dxr = dx.row(r);
        for (std::size_t c = 0; c < x.cols; ++c) {
            const double dxhat = dyr[c] * gain[c];
            dxr[c] = inv_std * (dxhat - mean_dxhat - xhat[c] * mean_dxhat_xhat);
        }
    }
    return dx;
}

} // namespace

ModelWeights backward(const ModelConfig& cfg, const ModelWeights& w,
                      const ForwardTrace& trace,
                      std::span<const double> dloss_dscores) {
    const std::size_t rows = cfg.input_rows();
    if (dloss_dscores.size() != cfg.k) {
        throw ShapeError("backward: gradient length " +
                         std::to_string(dloss_dscores.size()) + " vs k=" +
                         std::to_string(cfg.k));
    }
    if (trace.encoders.size() != cfg.n_encoders ||
        trace.pooled.size() != rows || trace.scores.size() != cfg.k ||
        trace.encoders[0].z_in.rows != rows ||
        trace.encoders[0].z_in.cols != cfg.d) {
        throw ContractError("backward: trace does not match the model config");
    }
    if (trace.weight_probe != weight_probe(w)) {
        throw ContractError(
            "backward: trace was produced by different weights");
    }

    ModelWeights g = zero_weights(cfg);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d));

    // Scoring head.
    std::vector<double> dpooled(rows, 0.0);
    for (std::size_t c = 0; c < cfg.k; ++c) {
        const double ds = dloss_dscores[c];
        g.b_out[c] += ds;
        for (std::size_t r = 0; r < rows; ++r) {
            g.w_out.at(r, c) += trace.pooled[r] * ds;
            dpooled[r] += w.w_out.at(r, c) * ds;
        }
    }

    // Max-pool: gradient flows only to the winning feature of each row.
    Mat dz(rows, cfg.d);
    for (std::size_t r = 0; r < rows; ++r) {
        dz.at(r, trace.argmax[r]) = dpooled[r];
    }

    for (std::size_t i = cfg.n_encoders; i-- > 0;) {
        const auto& enc = w.encoders[i];
        const auto& t = trace.encoders[i];
        auto& ge = g.encoders[i];

        Mat dres2 = layer_norm_backward(t.res2, enc.ln2_gain, cfg.ln_eps, dz,
                                        ge.ln2_gain, ge.ln2_bias);

        // FFN: res2 = relu(z_bar*W1 + b1)*W2 + b2 (+ z_bar).
        Mat dz_bar(rows, cfg.d);
        if (cfg.second_residual) {
            dz_bar = dres2;
        }
        ge.w2 = transposed_matmul(t.ffn_act, dres2);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = dres2.row(r);
            for (std::size_t c = 0; c < cfg.d; ++c) ge.b2[c] += row[c];
        }
        Mat dact = matmul_transposed(dres2, enc.w2);
        for (std::size_t idx = 0; idx < dact.size(); ++idx) {
            if (t.ffn_pre.data[idx] <= 0.0) dact.data[idx] = 0.0;
        }
        ge.w1 = transposed_matmul(t.z_bar, dact);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = dact.row(r);
            for (std::size_t c = 0; c < cfg.d_h; ++c) ge.b1[c] += row[c];
        }
        const Mat dz_bar_ffn = matmul_transposed(dact, enc.w1);
        for (std::size_t idx = 0; idx < dz_bar.size(); ++idx) {
            dz_bar.data[idx] += dz_bar_ffn.data[idx];
        }

        Mat dres1 = layer_norm_backward(t.res1, enc.ln1_gain, cfg.ln_eps,
                                        dz_bar, ge.ln1_gain, ge.ln1_bias);

        // res1 = z_in + heads_concat * W_AO.
        Mat dz_in = dres1;
        ge.w_ao = transposed_matmul(t.heads_concat, dres1);
        const Mat dconcat = matmul_transposed(dres1, enc.w_ao);

        for (std::size_t j = 0; j < cfg.n_heads; ++j) {
            Mat dhead(rows, cfg.d);
            for (std::size_t r = 0; r < rows; ++r) {
                std::copy(dconcat.row(r).begin() + j * cfg.d,
                          dconcat.row(r).begin() + (j + 1) * cfg.d,
                          dhead.row(r).begin());
            }
            // head = attn * V.
            Mat dattn = matmul_transposed(dhead, t.v[j]);
            const Mat dv = transposed_matmul(t.attn[j], dhead);

            // Softmax rows: dA = P .* (dP - rowdot(dP, P)).
            Mat dlogits(rows, rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto p = t.attn[j].row(r);
                const auto dp = dattn.row(r);
                double dot = 0.0;
                for (std::size_t c = 0; c < rows; ++c) dot += dp[c] * p[c];
                auto dl = dlogits.row(r);
                for (std::size_t c = 0; c < rows; ++c) {
                    dl[c] = p[c] * (dp[c] - dot);
                }
            }
            // logits = scale * Q * K^T.
            Mat dq = matmul(dlogits, t.k[j]);
            for (auto& v : dq.data) v *= scale;
            Mat dk = transposed_matmul(dlogits, t.q[j]);
            for (auto& v : dk.data) v *= scale;

            ge.heads[j].wq = transposed_matmul(t.z_in, dq);
            ge.heads[j].wk = transposed_matmul(t.z_in, dk);
            ge.heads[j].wv = transposed_matmul(t.z_in, dv);

            const Mat dz_q = matmul_transposed(dq, enc.heads[j].wq);
            const Mat dz_k = matmul_transposed(dk, enc.heads[j].wk);
            const Mat dz_v = matmul_transposed(dv, enc.heads[j].wv);
            for (std::size_t idx = 0; idx < dz_in.size(); ++idx) {
                dz_in.data[idx] +=
                    dz_q.data[idx] + dz_k.data[idx] + dz_v.data[idx];
            }
        }
        dz = std::move(dz_in);
    }
    return g;
}

std::vector<std::size_t> argsort_descending(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) {
                         return scores[a] > scores[b];
                     });
    return order;
}

RerankResult rerank(const ModelConfig& cfg, const ModelWeights& w,
                    const std::vector<std::uint32_t>& candidate_ids,
                    const Mat& descriptors) {
    if (candidate_ids.size() != cfg.k) {
        throw ShapeError("rerank: " + std::to_string(candidate_ids.size()) +
                         " candidates vs k=" + std::to_string(cfg.k));
    }
    RerankResult result;
    result.scores = forward(cfg, w, descriptors);
    const auto order = argsort_descending(result.scores);
    result.ranking.reserve(cfg.k);
    for (std::size_t r : order) {
        result.ranking.push_back(candidate_ids[r]);
    }
    return result;
}

} // namespace trer
