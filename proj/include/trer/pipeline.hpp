#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "trer/runconfig.hpp"

namespace trer {

// The generate/train/eval stages as library calls, shared by the CLI and
// the acceptance suite. Every stage is deterministic given (config, seed).

struct GenerateArtifacts {
    std::vector<std::filesystem::path> files; // one .trrd per sequence
};

GenerateArtifacts run_generate(const RunConfig& cfg,
                               const std::filesystem::path& out_dir);

struct TrainArtifacts {
    std::filesystem::path weights_file;
    std::filesystem::path log_file;
    TrainResult result;
    SampleBuildStats sample_stats;
};

// Trains on every sequence in data_dir except the holdout.
TrainArtifacts run_train(const RunConfig& cfg,
                         const std::filesystem::path& data_dir,
                         const std::string& holdout_id,
                         const std::filesystem::path& out_dir);

struct EvalArtifacts {
    std::filesystem::path csv_file;
    std::filesystem::path json_file;
    std::vector<RecallReport> reports;
};

// Evaluates the named methods ("none", "trer", "alpha-qe", "oracle") on a
// dataset file. weights_file may be empty when "trer" is not requested.
EvalArtifacts run_eval(const RunConfig& cfg,
                       const std::filesystem::path& dataset_file,
                       const std::vector<std::string>& methods,
                       const std::filesystem::path& weights_file,
                       const std::filesystem::path& out_dir);

// Builds a re-ranker by CLI method name; loads weights for "trer".
std::unique_ptr<Reranker> make_reranker(const RunConfig& cfg,
                                        const std::string& method,
                                        const std::filesystem::path&
                                            weights_file);

// Sorted .trrd files in a directory (deterministic order).
std::vector<std::filesystem::path> list_datasets(
    const std::filesystem::path& data_dir);

} // namespace trer
