// Command-line front end: generate synthetic sequences, train the
// re-ranker, evaluate methods, re-rank a single query, or run the
// verification suites.
//
// Exit codes: 0 success, 2 validation error, 3 data/format error,
// 4 verification failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "trer/errors.hpp"
#include "trer/json_conv.hpp"
#include "trer/pipeline.hpp"
#include "trer/runconfig.hpp"
#include "trer/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitData = 3;
constexpr int kExitVerify = 4;

trer::RunConfig load_config(const std::string& config_path,
                            std::optional<std::uint64_t> seed_override) {
    trer::RunConfig cfg = config_path.empty()
                              ? trer::RunConfig::defaults()
                              : trer::RunConfig::from_file(config_path);
    if (seed_override) {
        cfg.seed = *seed_override;
    }
    cfg.validate();
    return cfg;
}

int cmd_generate(const std::string& config_path,
                 std::optional<std::uint64_t> seed, const std::string& out) {
    const auto cfg = load_config(config_path, seed);
    const auto artifacts = trer::run_generate(cfg, out);
    for (const auto& file : artifacts.files) {
        std::cout << file.string() << '\n';
    }
    return kExitOk;
}

int cmd_train(const std::string& config_path,
              std::optional<std::uint64_t> seed, const std::string& data_dir,
              const std::string& holdout, const std::string& out,
              std::optional<std::size_t> epochs) {
    auto cfg = load_config(config_path, seed);
    if (epochs) {
        cfg.train.epochs = *epochs;
    }
    const auto artifacts = trer::run_train(cfg, data_dir, holdout, out);
    std::cout << artifacts.weights_file.string() << '\n'
              << artifacts.log_file.string() << '\n';
    std::cerr << "samples built: " << artifacts.sample_stats.built
              << ", skipped: " << artifacts.sample_stats.skipped << '\n';
    if (!artifacts.result.log.empty()) {
        std::cerr << "final mean loss: "
                  << artifacts.result.log.back().mean_loss << '\n';
    }
    return kExitOk;
}

int cmd_eval(const std::string& config_path,
             std::optional<std::uint64_t> seed, const std::string& dataset,
             const std::vector<std::string>& methods,
             const std::string& weights, const std::string& out) {
    const auto cfg = load_config(config_path, seed);
    const auto artifacts =
        trer::run_eval(cfg, dataset, methods, weights, out);
    std::cout << artifacts.csv_file.string() << '\n'
              << artifacts.json_file.string() << '\n';
    return kExitOk;
}

// Re-ranks one query read from a JSON file:
// { "method": "...", "query_descriptor": [...], "query_pose": [x,y,z],
//   "candidates": [ {"id": n, "descriptor": [...], "pose": [x,y,z]}, ... ] }
int cmd_rerank(const std::string& config_path,
               std::optional<std::uint64_t> seed, const std::string& input,
               const std::string& method, const std::string& weights) {
    auto cfg = load_config(config_path, seed);

    std::ifstream in(input);
    if (!in) {
        throw trer::DataError("cannot open query file: " + input);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw trer::FormatError("query file " + input + ": " + e.what());
    }

    std::vector<double> query;
    std::array<double, 3> query_pose{0.0, 0.0, 0.0};
    std::vector<std::uint32_t> ids;
    std::vector<std::array<double, 3>> poses;
    try {
        query = doc.at("query_descriptor").get<std::vector<double>>();
        if (doc.contains("query_pose")) {
            doc.at("query_pose").get_to(query_pose);
        }
        const auto& candidates = doc.at("candidates");
        trer::Mat descriptors(candidates.size(), query.size());
        std::size_t row = 0;
        for (const auto& c : candidates) {
            ids.push_back(c.at("id").get<std::uint32_t>());
            const auto desc = c.at("descriptor").get<std::vector<double>>();
            if (desc.size() != query.size()) {
                throw trer::ShapeError(
                    "candidate " + std::to_string(ids.back()) + " has " +
                    std::to_string(desc.size()) + " dims, query has " +
                    std::to_string(query.size()));
            }
            std::copy(desc.begin(), desc.end(),
                      descriptors.row(row).begin());
            if (c.contains("pose")) {
                poses.push_back(c.at("pose").get<std::array<double, 3>>());
            } else {
                poses.push_back({0.0, 0.0, 0.0});
            }
            ++row;
        }

        // Single-query re-ranking follows the file's candidate count.
        cfg.model.k = ids.size();
        cfg.model.d = query.size();
        cfg.eval.k = ids.size();

        const auto rr = trer::make_reranker(cfg, method, weights);
        trer::QueryContext ctx;
        ctx.query_descriptor = query;
        ctx.query_pose = query_pose;
        ctx.candidate_poses = poses;
        const auto ranking = rr->rerank(ctx, ids, descriptors);

        nlohmann::json result;
        result["method"] = method;
        result["ranking"] = ranking;
        std::cout << result.dump() << '\n';
    } catch (const nlohmann::json::exception& e) {
        throw trer::FormatError("query file " + input + ": " + e.what());
    }
    return kExitOk;
}

int cmd_verify() {
    const auto results = trer::run_verify_suites();
    bool all_pass = true;
    for (const auto& r : results) {
        nlohmann::json line = {{"suite", r.name},
                               {"pass", r.pass},
                               {"detail", r.detail}};
        std::cout << line.dump() << '\n';
        all_pass = all_pass && r.pass;
    }
    nlohmann::json summary = {{"all_pass", all_pass},
                              {"suites", results.size()}};
    std::cout << summary.dump() << '\n';
    return all_pass ? kExitOk : kExitVerify;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loop-closure retrieval + transformer re-ranking toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Run config JSON");
        cmd->add_option("--seed", seed, "Master seed override");
    };

    auto* generate = app.add_subcommand(
        "generate", "Write one dataset file per configured sequence");
    add_common(generate);
    generate->add_option("--out", out_dir, "Output directory");

    std::string data_dir;
    std::string holdout;
    std::optional<std::size_t> epochs;
    auto* train = app.add_subcommand(
        "train", "Train the re-ranker on all sequences except the holdout");
    add_common(train);
    train->add_option("--data", data_dir, "Directory of .trrd datasets")
        ->required();
    train->add_option("--holdout", holdout, "Test sequence id")->required();
    train->add_option("--out", out_dir, "Output directory");
    train->add_option("--epochs", epochs, "Override epoch count");

    std::string dataset_file;
    std::string weights_file;
    std::vector<std::string> methods = {"none", "trer"};
    auto* eval = app.add_subcommand(
        "eval", "Evaluate re-ranking methods on one dataset");
    add_common(eval);
    eval->add_option("--dataset", dataset_file, "Dataset .trrd file")
        ->required();
    eval->add_option("--methods", methods,
                     "Methods: none, trer, alpha-qe, oracle")
        ->delimiter(',');
    eval->add_option("--weights", weights_file, "Weights .trrw file");
    eval->add_option("--out", out_dir, "Output directory");

    std::string query_file;
    std::string method = "trer";
    auto* rerank = app.add_subcommand(
        "rerank", "Re-rank a single query from a JSON file");
    add_common(rerank);
    rerank->add_option("--input", query_file, "Query JSON file")->required();
    rerank->add_option("--method", method,
                       "Method: none, trer, alpha-qe, oracle");
    rerank->add_option("--weights", weights_file, "Weights .trrw file");

    auto* verify = app.add_subcommand(
        "verify", "Run the verification suites and report pass/fail");
    (void)verify;

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            return cmd_generate(config_path, seed, out_dir);
        }
        if (train->parsed()) {
            return cmd_train(config_path, seed, data_dir, holdout, out_dir,
                             epochs);
        }
        if (eval->parsed()) {
            return cmd_eval(config_path, seed, dataset_file, methods,
                            weights_file, out_dir);
        }
        if (rerank->parsed()) {
            return cmd_rerank(config_path, seed, query_file, method,
                              weights_file);
        }
        if (verify->parsed()) {
            return cmd_verify();
        }
    } catch (const trer::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const trer::ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const trer::FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const trer::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const trer::CapacityError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}
