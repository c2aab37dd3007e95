#include "trer/runconfig.hpp"

#include <fstream>
#include <set>
#include <string>

#include "trer/errors.hpp"
#include "trer/json_conv.hpp"

namespace trer {

namespace {

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t part) {
    std::uint64_t x = master * 0x9E3779B97F4A7C15ull + part;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

} // namespace

void RunConfig::validate() const {
    std::string problems;
    auto add = [&problems](const std::string& msg) {
        if (!problems.empty()) problems += "; ";
        problems += msg;
    };

    try {
        model.validate();
    } catch (const ConfigError& e) {
        add(e.what());
    }
    try {
        train.validate();
    } catch (const ConfigError& e) {
        add(e.what());
    }
    try {
        eval.validate();
    } catch (const ConfigError& e) {
        add(e.what());
    }
    try {
        alpha_qe.validate(eval.k);
    } catch (const ConfigError& e) {
        add(e.what());
    }

    if (sequences.empty()) {
        add("no sequences declared");
    }
    std::set<std::string> ids;
    for (const auto& w : sequences) {
        try {
            w.validate(eval.k);
        } catch (const ConfigError& e) {
            add(e.what());
        }
        if (!ids.insert(w.sequence_id).second) {
            add("duplicate sequence id '" + w.sequence_id + "'");
        }
        if (w.descriptor_dim != model.d) {
            add("sequence '" + w.sequence_id + "' has descriptor_dim=" +
                std::to_string(w.descriptor_dim) + " but model d=" +
                std::to_string(model.d));
        }
    }
    if (model.k != eval.k) {
        add("model k=" + std::to_string(model.k) + " differs from eval k=" +
            std::to_string(eval.k));
    }
    if (model.loss_sigma != train.sigma) {
        add("model loss_sigma=" + std::to_string(model.loss_sigma) +
            " differs from train sigma=" + std::to_string(train.sigma));
    }

    if (!problems.empty()) {
        throw ConfigError("invalid run config: " + problems);
    }
}

std::uint64_t RunConfig::world_seed(std::size_t sequence_index) const {
    // The generator reads the descriptor bank (the simulated backbone) from
    // the high bits and the noise stream from the low bits. All sequences
    // of a run share one bank; their own seeds separate the noise.
    const std::uint64_t bank = mix_seed(seed, 0xBACC0FFEull) & 0xFFFFFFFFull;
    const std::uint64_t noise =
        mix_seed(seed, sequences.at(sequence_index).seed) & 0xFFFFull;
    return (bank << 16) | noise;
}

std::uint64_t RunConfig::train_seed() const {
    return mix_seed(seed, 0x7452E19Bull + train.seed);
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["sequences"] = sequences;
    j["model"] = model;
    j["train"] = train;
    j["eval"] = eval;
    j["alpha_qe"] = alpha_qe;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg = defaults();
    try {
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("sequences")) {
            cfg.sequences =
                j.at("sequences").get<std::vector<WorldConfig>>();
        }
        if (j.contains("model")) j.at("model").get_to(cfg.model);
        if (j.contains("train")) j.at("train").get_to(cfg.train);
        if (j.contains("eval")) j.at("eval").get_to(cfg.eval);
        if (j.contains("alpha_qe")) j.at("alpha_qe").get_to(cfg.alpha_qe);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open config: " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.seed = 7;

    cfg.model.d = 48;
    cfg.model.k = 25;
    cfg.model.d_h = 64;
    cfg.model.n_heads = 2;
    cfg.model.n_encoders = 1;

    // Desk-scale schedule; more aggressive than the full-scale defaults in
    // TrainConfig, which fifteen epochs over ~12k short-list samples need.
    cfg.train.epochs = 15;
    cfg.train.learning_rate = 0.001;
    cfg.train.weight_decay = 0.005;
    cfg.train.batch_size = 32;
    cfg.train.query_stride = 1;
    cfg.train.seed = 0;

    cfg.eval.k = 25;
    cfg.eval.zeta = 25.0;
    cfg.eval.exclusion_window = 100;
    cfg.eval.report_n = {1, 5, 10};

    auto sequence = [](std::string id, RouteKind route, double noise,
                       double heading, std::uint64_t seed) {
        WorldConfig w;
        w.sequence_id = std::move(id);
        w.n_frames = 4000;
        w.route = route;
        w.revisit_fraction = 0.3;
        w.descriptor_dim = 48;
        w.feature_bandwidth = 0.15;
        w.noise_sigma = noise;
        w.heading_coupling = heading;
        w.seed = seed;
        return w;
    };
    // Three mild loop-rich sequences plus two grids whose revisit tails run
    // the lanes in the opposite direction; s08 couples heading hardest and
    // plays the role of the difficult sequence.
    cfg.sequences = {
        sequence("s00", RouteKind::Circuit, 0.15, 0.15, 1),
        sequence("s02", RouteKind::Circuit, 0.16, 0.15, 2),
        sequence("s05", RouteKind::Circuit, 0.14, 0.15, 3),
        sequence("s06", RouteKind::Grid, 0.12, 0.55, 4),
        sequence("s08", RouteKind::Grid, 0.10, 0.70, 5),
    };
    return cfg;
}

} // namespace trer
