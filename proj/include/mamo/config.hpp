#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamo/data.hpp"
#include "mamo/error.hpp"
#include "mamo/meta.hpp"

namespace mamo {

/// Everything a run needs. Defaults follow the MovieLens-scale profile.
struct RunConfig {
  // architecture
  std::size_t d_e = 100;
  int layers = 2;
  std::size_t k = 3;
  // learning
  double rho = 0.01;
  double lambda = 0.05;
  double tau = 0.1;
  double alpha = 0.5;
  double beta = 0.05;
  double gamma = 0.1;
  int user_batch = 32;
  int epochs = 20;
  int support_passes = 1;
  // data handling
  double split_ratio = 0.8;
  std::size_t support_size = 15;
  std::size_t record_cap = 20;
  std::vector<std::size_t> ndcg_n = {3};
  std::uint64_t seed = 1;
  int workers = 1;
  // cold-start scenario rules
  std::string user_cold_mode = "percentile";  // "percentile" | "cutoff"
  double user_cold_value = 0.9;
  int item_cold_threshold = 10;
  // paths
  std::string data_dir;
  std::string out_dir = ".";
  std::string resume;

  MetaHyper hyper() const {
    MetaHyper h;
    h.rho = rho;
    h.lambda = lambda;
    h.tau = tau;
    h.alpha = alpha;
    h.beta = beta;
    h.gamma = gamma;
    h.user_batch = user_batch;
    h.epochs = epochs;
    h.support_passes = support_passes;
    return h;
  }

  ScenarioRules scenario_rules() const {
    ScenarioRules rules;
    rules.user_rule = user_cold_mode == "cutoff" ? ScenarioRules::UserRule::order_key_cutoff
                                                 : ScenarioRules::UserRule::id_percentile;
    rules.user_value = user_cold_value;
    rules.item_cold_threshold = item_cold_threshold;
    return rules;
  }

  void validate() const {
    if (d_e < 1) throw ConfigError("d_e must be >= 1");
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
    validate_hyper(hyper());
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
      throw ConfigError("split_ratio must lie in (0, 1)");
    }
    if (support_size < 1) throw ConfigError("support_size must be >= 1");
    if (record_cap < support_size + 1) {
      throw ConfigError("record_cap must exceed support_size");
    }
    if (ndcg_n.empty()) throw ConfigError("ndcg_n must name at least one cutoff");
    for (auto n : ndcg_n) {
      if (n < 1) throw ConfigError("ndcg_n entries must be >= 1");
    }
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (user_cold_mode != "percentile" && user_cold_mode != "cutoff") {
      throw ConfigError("user_cold_mode must be 'percentile' or 'cutoff'");
    }
    if (user_cold_mode == "percentile" && !(user_cold_value >= 0.0 && user_cold_value <= 1.0)) {
      throw ConfigError("user_cold_value must lie in [0, 1] for the percentile rule");
    }
    if (item_cold_threshold < 0) throw ConfigError("item_cold_threshold must be >= 0");
  }
};

/// Flat JSON with strict keys: anything unrecognized is rejected.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  RunConfig cfg = std::move(base);
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "d_e") cfg.d_e = value.get<std::size_t>();
      else if (key == "layers") cfg.layers = value.get<int>();
      else if (key == "k") cfg.k = value.get<std::size_t>();
      else if (key == "rho") cfg.rho = value.get<double>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "tau") cfg.tau = value.get<double>();
      else if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "beta") cfg.beta = value.get<double>();
      else if (key == "gamma") cfg.gamma = value.get<double>();
      else if (key == "user_batch") cfg.user_batch = value.get<int>();
      else if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "support_passes") cfg.support_passes = value.get<int>();
      else if (key == "split_ratio") cfg.split_ratio = value.get<double>();
      else if (key == "support_size") cfg.support_size = value.get<std::size_t>();
      else if (key == "record_cap") cfg.record_cap = value.get<std::size_t>();
      else if (key == "ndcg_n") cfg.ndcg_n = value.get<std::vector<std::size_t>>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "workers") cfg.workers = value.get<int>();
      else if (key == "user_cold_mode") cfg.user_cold_mode = value.get<std::string>();
      else if (key == "user_cold_value") cfg.user_cold_value = value.get<double>();
      else if (key == "item_cold_threshold") cfg.item_cold_threshold = value.get<int>();
      else if (key == "data_dir") cfg.data_dir = value.get<std::string>();
      else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "resume") cfg.resume = value.get<std::string>();
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

}  // namespace mamo
