#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trer/baselines.hpp"
#include "trer/model.hpp"
#include "trer/retrieval.hpp"
#include "trer/synthdata.hpp"
#include "trer/training.hpp"

#include "json.hpp"

namespace trer {

// One document drives a whole run: world generation, model, training and
// evaluation. Shared dimensions (d, k) must agree across sections; the
// validator rejects inconsistent documents atomically.
struct RunConfig {
    std::uint64_t seed = 7;
    std::vector<WorldConfig> sequences;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    AlphaQEConfig alpha_qe;

    void validate() const; // throws ConfigError listing every problem

    // Per-part seeds mixed with the top-level seed, so changing `seed`
    // reshuffles everything while per-sequence offsets stay distinct.
    std::uint64_t world_seed(std::size_t sequence_index) const;
    std::uint64_t train_seed() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& path);

    // The built-in 5-sequence benchmark: four direction-blind sequences and
    // one with opposite-direction revisits and strong heading coupling.
    static RunConfig defaults();
};

} // namespace trer
