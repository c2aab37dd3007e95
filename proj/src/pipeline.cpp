#include "trer/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include "trer/errors.hpp"
#include "trer/json_conv.hpp"

namespace trer {

GenerateArtifacts run_generate(const RunConfig& cfg,
                               const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    GenerateArtifacts artifacts;
    for (std::size_t i = 0; i < cfg.sequences.size(); ++i) {
        WorldConfig world = cfg.sequences[i];
        world.seed = cfg.world_seed(i);
        const auto db = generate_world(world);
        const auto file = out_dir / (world.sequence_id + ".trrd");
        save_dataset(db, file);
        artifacts.files.push_back(file);
    }
    return artifacts;
}

std::vector<std::filesystem::path> list_datasets(
    const std::filesystem::path& data_dir) {
    if (!std::filesystem::is_directory(data_dir)) {
        throw DataError("not a directory: " + data_dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".trrd") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw DataError("no .trrd datasets in " + data_dir.string());
    }
    return files;
}

TrainArtifacts run_train(const RunConfig& cfg,
                         const std::filesystem::path& data_dir,
                         const std::string& holdout_id,
                         const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    std::vector<DescriptorDatabase> dbs;
    for (const auto& file : list_datasets(data_dir)) {
        dbs.push_back(load_dataset(file));
    }
    auto split = split_sequences(std::move(dbs), holdout_id);

    std::vector<RankingSample> samples;
    SampleBuildStats stats;
    for (const auto& db : split.train) {
        if (db.dim() != cfg.model.d) {
            throw ConfigError("sequence '" + db.sequence_id +
                              "' has descriptor dim " +
                              std::to_string(db.dim()) + ", model expects " +
                              std::to_string(cfg.model.d));
        }
        SampleBuildStats s;
        auto batch = retrieve_and_build(db, cfg.model.k,
                                        cfg.eval.exclusion_window,
                                        cfg.train.query_stride, &s);
        stats.built += s.built;
        stats.skipped += s.skipped;
        samples.insert(samples.end(),
                       std::make_move_iterator(batch.begin()),
                       std::make_move_iterator(batch.end()));
    }

    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.train_seed();
    tcfg.sigma = cfg.model.loss_sigma;

    TrainArtifacts artifacts;
    artifacts.sample_stats = stats;
    artifacts.result = train(samples, cfg.model, tcfg);

    artifacts.weights_file = out_dir / ("trer_" + holdout_id + ".trrw");
    save_weights(cfg.model, artifacts.result.weights,
                 artifacts.weights_file);

    artifacts.log_file = out_dir / ("train_log_" + holdout_id + ".jsonl");
    std::ofstream log(artifacts.log_file, std::ios::trunc);
    if (!log) {
        throw DataError("cannot open for writing: " +
                        artifacts.log_file.string());
    }
    for (const auto& rec : artifacts.result.log) {
        nlohmann::json j = {{"epoch", rec.epoch},
                            {"mean_loss", rec.mean_loss},
                            {"wall_ms", rec.wall_ms}};
        if (rec.rejected_steps > 0) {
            j["rejected_steps"] = rec.rejected_steps;
        }
        log << j.dump() << '\n';
    }
    return artifacts;
}

std::unique_ptr<Reranker> make_reranker(
    const RunConfig& cfg, const std::string& method,
    const std::filesystem::path& weights_file) {
    if (method == "none") {
        return std::make_unique<IdentityReranker>();
    }
    if (method == "oracle") {
        return std::make_unique<OracleReranker>();
    }
    if (method == "alpha-qe") {
        return std::make_unique<AlphaQEReranker>(cfg.alpha_qe);
    }
    if (method == "trer") {
        if (weights_file.empty()) {
            throw ConfigError("method 'trer' needs a weights file");
        }
        auto loaded = load_weights(weights_file);
        if (loaded.config.d != cfg.model.d ||
            loaded.config.k != cfg.model.k) {
            throw ConfigError(
                "weights " + weights_file.string() + " are for d=" +
                std::to_string(loaded.config.d) + ", k=" +
                std::to_string(loaded.config.k) + "; run config has d=" +
                std::to_string(cfg.model.d) + ", k=" +
                std::to_string(cfg.model.k));
        }
        return std::make_unique<TrerReranker>(loaded.config,
                                              std::move(loaded.weights));
    }
    throw ConfigError("unknown method '" + method +
                      "' (expected none, trer, alpha-qe or oracle)");
}

EvalArtifacts run_eval(const RunConfig& cfg,
                       const std::filesystem::path& dataset_file,
                       const std::vector<std::string>& methods,
                       const std::filesystem::path& weights_file,
                       const std::filesystem::path& out_dir) {
    cfg.validate();
    if (methods.empty()) {
        throw ConfigError("eval: no methods requested");
    }
    std::filesystem::create_directories(out_dir);
    const auto db = load_dataset(dataset_file);
    if (db.dim() != cfg.model.d) {
        throw ConfigError("dataset '" + db.sequence_id +
                          "' has descriptor dim " + std::to_string(db.dim()) +
                          ", run config expects " +
                          std::to_string(cfg.model.d));
    }

    EvalArtifacts artifacts;
    for (const auto& method : methods) {
        const auto reranker = make_reranker(cfg, method, weights_file);
        artifacts.reports.push_back(evaluate(db, *reranker, cfg.eval));
    }

    artifacts.csv_file = out_dir / ("recall_" + db.sequence_id + ".csv");
    artifacts.json_file = out_dir / ("recall_" + db.sequence_id + ".json");
    write_recall_csv(artifacts.reports, artifacts.csv_file);
    write_recall_json(artifacts.reports, artifacts.json_file);
    return artifacts;
}

} // namespace trer
