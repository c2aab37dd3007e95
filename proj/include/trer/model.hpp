#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trer/mat.hpp"

namespace trer {

// Architecture hyperparameters. Defaults reproduce the reference setup:
// one attention head, one encoder, d=256, k=25, d_h=512.
struct ModelConfig {
    std::size_t d = 256;        // descriptor feature dimension
    std::size_t k = 25;         // candidates per query
    std::size_t d_h = 512;      // feed-forward hidden width
    std::size_t n_heads = 1;
    std::size_t n_encoders = 1;
    bool second_residual = false; // skip connection around the FFN block
    bool include_query = false;   // prepend the query descriptor as row 0
    bool normalize_input = false; // L2-normalize descriptor rows on entry
    double loss_sigma = 1.0;
    double ln_eps = 1e-8;

    // Rows fed to the encoder stack (k, or k+1 with the query prepended).
    std::size_t input_rows() const { return k + (include_query ? 1 : 0); }

    void validate() const; // throws ConfigError
};

// Weights of one attention head; per-head projections use the full width d.
struct HeadWeights {
    Mat wq; // d x d
    Mat wk; // d x d
    Mat wv; // d x d
};

struct EncoderWeights {
    std::vector<HeadWeights> heads;
    Mat w_ao;                     // (n_heads*d) x d
    std::vector<double> ln1_gain; // d
    std::vector<double> ln1_bias; // d
    std::vector<double> ln2_gain; // d
    std::vector<double> ln2_bias; // d
    Mat w1;                       // d x d_h
    std::vector<double> b1;       // d_h
    Mat w2;                       // d_h x d
    std::vector<double> b2;       // d
};

// Non-owning handle to one named weight tensor; vectors are 1 x n.
struct TensorView {
    std::string name;
    double* data;
    std::size_t rows;
    std::size_t cols;

    std::size_t size() const { return rows * cols; }
};

// Every learnable tensor of the re-ranker. Also used as the container for
// gradients and optimizer moments, which share the same shapes.
struct ModelWeights {
    std::vector<EncoderWeights> encoders;
    Mat w_out;                  // input_rows x k scoring projection
    std::vector<double> b_out;  // k

    // Tensor traversal in the canonical (serialization) order.
    std::vector<TensorView> tensors();
    std::vector<TensorView> tensors() const; // views are const-cast; read only

    std::size_t param_count() const;
    void fill(double value);
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> values);

    bool operator==(const ModelWeights& other) const;
};

// Shapes an all-zero weight container for cfg.
ModelWeights zero_weights(const ModelConfig& cfg);

// Glorot-uniform weight matrices, zero biases, unit layer-norm gains.
// Deterministic per (cfg, seed).
ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

// Intermediate activations recorded by forward for the backward pass.
struct EncoderTrace {
    Mat z_in;                    // rows x d input to this encoder
    std::vector<Mat> q, k, v;    // per head, rows x d
    std::vector<Mat> attn;       // per head softmax(QK^T/sqrt(d)), rows x rows
    Mat heads_concat;            // rows x (n_heads*d)
    Mat res1;                    // z_in + attention output, pre-LN1
    Mat z_bar;                   // post-LN1
    Mat ffn_pre;                 // z_bar*W1 + b1, pre-ReLU
    Mat ffn_act;                 // ReLU output
    Mat res2;                    // FFN output (+ z_bar when second_residual)
    Mat z_out;                   // post-LN2
};

struct ForwardTrace {
    std::vector<EncoderTrace> encoders;
    std::vector<double> pooled;        // row-wise feature max, size rows
    std::vector<std::size_t> argmax;   // winning feature per row
    std::vector<double> scores;        // k
    std::uint64_t weight_probe = 0;    // fingerprint guarding backward()
};

// Per-tensor parameter accounting.
struct TensorCount {
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::size_t count;
};

std::size_t param_count(const ModelConfig& cfg);
std::vector<TensorCount> param_breakdown(const ModelConfig& cfg);

// Encoder stack + scoring head. descriptors must be input_rows() x d.
// Returns the k candidate scores and the trace backward needs.
std::vector<double> forward(const ModelConfig& cfg, const ModelWeights& w,
                            const Mat& descriptors, ForwardTrace& trace);

// Convenience overload discarding the trace.
std::vector<double> forward(const ModelConfig& cfg, const ModelWeights& w,
                            const Mat& descriptors);

// Exact adjoint of forward for the trace's input. Max-pool routes gradient
// only to the argmax feature (ties already resolved to the lowest index by
// forward). Throws ContractError when the trace does not match (cfg, w).
ModelWeights backward(const ModelConfig& cfg, const ModelWeights& w,
                      const ForwardTrace& trace,
                      std::span<const double> dloss_dscores);

// Descending stable argsort of scores; ties keep their original position.
std::vector<std::size_t> argsort_descending(std::span<const double> scores);

struct RerankResult {
    std::vector<std::uint32_t> ranking; // permutation of the input ids
    std::vector<double> scores;         // aligned with the input order
};

// Scores the candidate list and reorders it by descending score.
// descriptors rows must align with candidate_ids (plus the query row first
// when cfg.include_query is set).
RerankResult rerank(const ModelConfig& cfg, const ModelWeights& w,
                    const std::vector<std::uint32_t>& candidate_ids,
                    const Mat& descriptors);

// Weights file ("TRRW"): magic, u16 version, u32 header length, JSON header
// (config, tensor names/shapes/offsets, payload checksum), then raw
// little-endian f64 tensor data in header order.
void save_weights(const ModelConfig& cfg, const ModelWeights& w,
                  const std::filesystem::path& path);

struct LoadedWeights {
    ModelConfig config;
    ModelWeights weights;
};

LoadedWeights load_weights(const std::filesystem::path& path);

} // namespace trer
