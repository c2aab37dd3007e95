#pragma once

#include "json.hpp"

#include "trer/baselines.hpp"
#include "trer/model.hpp"
#include "trer/retrieval.hpp"
#include "trer/synthdata.hpp"
#include "trer/training.hpp"

// JSON bindings for the config structs. Readers accept partial documents
// and keep defaults for missing fields.

namespace trer {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"d", c.d},
         {"k", c.k},
         {"d_h", c.d_h},
         {"n_heads", c.n_heads},
         {"n_encoders", c.n_encoders},
         {"second_residual", c.second_residual},
         {"include_query", c.include_query},
         {"normalize_input", c.normalize_input},
         {"loss_sigma", c.loss_sigma},
         {"ln_eps", c.ln_eps}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d = j.value("d", c.d);
    c.k = j.value("k", c.k);
    c.d_h = j.value("d_h", c.d_h);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_encoders = j.value("n_encoders", c.n_encoders);
    c.second_residual = j.value("second_residual", c.second_residual);
    c.include_query = j.value("include_query", c.include_query);
    c.normalize_input = j.value("normalize_input", c.normalize_input);
    c.loss_sigma = j.value("loss_sigma", c.loss_sigma);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate},
         {"weight_decay", c.weight_decay},
         {"adam_beta1", c.adam_beta1},
         {"adam_beta2", c.adam_beta2},
         {"adam_eps", c.adam_eps},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"seed", c.seed},
         {"sigma", c.sigma},
         {"patience", c.patience},
         {"query_stride", c.query_stride},
         {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.sigma = j.value("sigma", c.sigma);
    c.patience = j.value("patience", c.patience);
    c.query_stride = j.value("query_stride", c.query_stride);
    c.threads = j.value("threads", c.threads);
}

inline void to_json(nlohmann::json& j, const EvalConfig& c) {
    j = {{"k", c.k},
         {"zeta", c.zeta},
         {"exclusion_window", c.exclusion_window},
         {"report_n", c.report_n}};
}

inline void from_json(const nlohmann::json& j, EvalConfig& c) {
    c.k = j.value("k", c.k);
    c.zeta = j.value("zeta", c.zeta);
    c.exclusion_window = j.value("exclusion_window", c.exclusion_window);
    c.report_n = j.value("report_n", c.report_n);
}

inline void to_json(nlohmann::json& j, const AlphaQEConfig& c) {
    j = {{"alpha", c.alpha},
         {"n_expand", c.n_expand},
         {"normalize", c.normalize}};
}

inline void from_json(const nlohmann::json& j, AlphaQEConfig& c) {
    c.alpha = j.value("alpha", c.alpha);
    c.n_expand = j.value("n_expand", c.n_expand);
    c.normalize = j.value("normalize", c.normalize);
}

inline void to_json(nlohmann::json& j, const WorldConfig& c) {
    j = {{"sequence_id", c.sequence_id},
         {"n_frames", c.n_frames},
         {"route", route_to_string(c.route)},
         {"revisit_fraction", c.revisit_fraction},
         {"descriptor_dim", c.descriptor_dim},
         {"feature_bandwidth", c.feature_bandwidth},
         {"noise_sigma", c.noise_sigma},
         {"heading_coupling", c.heading_coupling},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, WorldConfig& c) {
    c.sequence_id = j.value("sequence_id", c.sequence_id);
    c.n_frames = j.value("n_frames", c.n_frames);
    if (j.contains("route")) {
        c.route = route_from_string(j.at("route").get<std::string>());
    }
    c.revisit_fraction = j.value("revisit_fraction", c.revisit_fraction);
    c.descriptor_dim = j.value("descriptor_dim", c.descriptor_dim);
    c.feature_bandwidth = j.value("feature_bandwidth", c.feature_bandwidth);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.heading_coupling = j.value("heading_coupling", c.heading_coupling);
    c.seed = j.value("seed", c.seed);
}

} // namespace trer
