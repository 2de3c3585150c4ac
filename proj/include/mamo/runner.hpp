#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mamo/checkpoint.hpp"
#include "mamo/config.hpp"
#include "mamo/eval.hpp"
#include "mamo/meta.hpp"
#include "mamo/store.hpp"
#include "mamo/synthetic.hpp"

namespace mamo {

// End-to-end pipelines behind the CLI subcommands. Kept in the library so
// the test suites can drive the exact code paths the tool runs.

struct PreparedData {
  StoredDataset data;
  DatasetSplit split;
  std::vector<Episode> train_episodes;
  std::vector<Episode> test_episodes;
  EpisodeBuildStats train_stats, test_stats;
};

inline PreparedData prepare_data(const RunConfig& cfg, bool want_test_labels = true) {
  if (cfg.data_dir.empty()) throw ConfigError("data_dir is required");
  PreparedData prep;
  prep.data = load_dataset_dir(cfg.data_dir);
  prep.split = split_users(prep.data.user_ids, cfg.split_ratio, cfg.seed);
  prep.train_episodes = build_episodes(prep.data, prep.split.train_users, cfg.support_size,
                                       cfg.record_cap, nullptr, &prep.train_stats);
  const ScenarioLabeler labeler = build_scenario_labeler(prep.data.records, cfg.scenario_rules());
  prep.test_episodes = build_episodes(prep.data, prep.split.test_users, cfg.support_size,
                                      cfg.record_cap, want_test_labels ? &labeler : nullptr,
                                      &prep.test_stats);
  return prep;
}

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<EpochLog> logs;
  std::size_t train_users = 0;
  std::size_t skipped_users = 0;
};

inline TrainResult run_train(const RunConfig& cfg,
                             const std::string& checkpoint_name = "checkpoint.mamo",
                             const std::string& log_name = "train_log.csv") {
  namespace fs = std::filesystem;
  cfg.validate();
  PreparedData prep = prepare_data(cfg, /*want_test_labels=*/false);
  if (prep.train_episodes.empty()) {
    throw DataError("no usable training episodes (" +
                    std::to_string(prep.train_stats.users_skipped) + " users skipped)");
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  const std::string checkpoint_path = (fs::path(cfg.out_dir) / checkpoint_name).string();
  const std::string log_path = (fs::path(cfg.out_dir) / log_name).string();

  const ModelDims dims{prep.data.schema.user_dim(), prep.data.schema.item_dim(), cfg.d_e,
                       cfg.layers};
  MetaState state;
  int completed_epochs = 0;
  if (cfg.resume.empty()) {
    state = init_meta_state(dims, cfg.k, cfg.hyper(), cfg.seed);
    anchor_profile_memory(state, prep.train_episodes);
  } else {
    LoadedCheckpoint loaded = load_checkpoint(cfg.resume);
    if (loaded.meta.schema_id != prep.data.schema.id) {
      throw DataError("checkpoint schema '" + loaded.meta.schema_id + "' vs dataset schema '" +
                      prep.data.schema.id + "'");
    }
    if (loaded.state.dims.d_u != dims.d_u || loaded.state.dims.d_i != dims.d_i ||
        loaded.state.dims.d_e != dims.d_e || loaded.state.dims.layers != dims.layers ||
        loaded.state.k_slots != cfg.k) {
      throw DataError("checkpoint dims (d_u=" + std::to_string(loaded.state.dims.d_u) +
                      ", d_i=" + std::to_string(loaded.state.dims.d_i) + ", d_e=" +
                      std::to_string(loaded.state.dims.d_e) + ") do not match the run (d_u=" +
                      std::to_string(dims.d_u) + ", d_i=" + std::to_string(dims.d_i) +
                      ", d_e=" + std::to_string(dims.d_e) + ")");
    }
    state = std::move(loaded.state);
    state.hyper = cfg.hyper();
    completed_epochs = loaded.meta.epoch;
  }

  CheckpointMeta meta;
  meta.schema_id = prep.data.schema.id;
  meta.seed = cfg.seed;
  meta.epoch = completed_epochs;

  std::ofstream log(log_path, cfg.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write " + log_path);
  if (cfg.resume.empty()) log << "epoch,train_query_mae,wall_seconds\n";

  TrainResult result;
  result.checkpoint_path = checkpoint_path;
  result.log_path = log_path;
  result.train_users = prep.train_episodes.size();
  result.skipped_users = prep.train_stats.users_skipped;

  state.hyper.epochs = std::max(0, cfg.epochs - completed_epochs);
  TrainOptions options;
  options.workers = cfg.workers;
  options.rating_min = prep.data.schema.rating_min;
  options.rating_max = prep.data.schema.rating_max;
  options.on_epoch = [&](const EpochLog& epoch_log) {
    EpochLog shifted = epoch_log;
    shifted.epoch = completed_epochs + epoch_log.epoch;
    log << shifted.epoch << ',' << std::setprecision(17) << shifted.train_query_mae << ','
        << std::setprecision(6) << shifted.wall_seconds << '\n';
    log.flush();
    meta.epoch = shifted.epoch + 1;
    save_checkpoint(checkpoint_path, state, meta);
    result.logs.push_back(shifted);
  };
  train(state, prep.train_episodes, prep.data.item_profiles, options);
  save_checkpoint(checkpoint_path, state, meta);
  return result;
}

struct EvalResult {
  std::vector<MetricsReport> reports;  // one per configured NDCG cutoff
  std::string metrics_path;
  std::size_t test_users = 0;
  std::size_t unadapted_users = 0;
};

inline void print_metrics(std::ostream& out, const MetricsReport& report) {
  out << std::left << std::setw(10) << "scenario" << std::right << std::setw(8) << "count"
      << std::setw(10) << "MAE" << std::setw(12) << ("NDCG@" + std::to_string(report.ndcg_n))
      << '\n';
  auto row = [&](const std::string& name, const ScenarioResult& r) {
    out << std::left << std::setw(10) << name << std::right << std::setw(8) << r.count;
    if (r.count) {
      out << std::setw(10) << std::fixed << std::setprecision(4) << r.mae;
    } else {
      out << std::setw(10) << "-";
    }
    if (r.ndcg) {
      out << std::setw(12) << std::fixed << std::setprecision(4) << *r.ndcg;
    } else {
      out << std::setw(12) << "-";
    }
    out << '\n';
    out.unsetf(std::ios::fixed);
  };
  static constexpr Scenario kOrder[] = {Scenario::warm_warm, Scenario::warm_cold,
                                        Scenario::cold_warm, Scenario::cold_cold};
  for (Scenario s : kOrder) {
    row(scenario_name(s), report.per_scenario[static_cast<std::size_t>(s)]);
  }
  row("ALL", report.overall);
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "scenario,metric,N,value,count\n";
  out << std::setprecision(17);
  auto emit = [&](const std::string& name, const ScenarioResult& r, std::size_t n, bool first) {
    if (first && r.count) {
      out << name << ",MAE,," << r.mae << ',' << r.count << '\n';
    }
    out << name << ",NDCG," << n << ',';
    if (r.ndcg) out << *r.ndcg;
    out << ',' << r.count << '\n';
  };
  static constexpr Scenario kOrder[] = {Scenario::warm_warm, Scenario::warm_cold,
                                        Scenario::cold_warm, Scenario::cold_cold};
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (Scenario s : kOrder) {
      emit(scenario_name(s), reports[i].per_scenario[static_cast<std::size_t>(s)],
           reports[i].ndcg_n, i == 0);
    }
    emit("ALL", reports[i].overall, reports[i].ndcg_n, i == 0);
  }
}

inline EvalResult run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                           const std::string& metrics_name = "metrics.csv") {
  namespace fs = std::filesystem;
  cfg.validate();
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  PreparedData prep = prepare_data(cfg);
  const Schema& schema = prep.data.schema;
  if (loaded.meta.schema_id != schema.id) {
    throw DataError("checkpoint schema '" + loaded.meta.schema_id + "' vs dataset schema '" +
                    schema.id + "'");
  }
  if (loaded.state.dims.d_u != schema.user_dim() || loaded.state.dims.d_i != schema.item_dim()) {
    throw DataError("checkpoint dims d_u=" + std::to_string(loaded.state.dims.d_u) +
                    ", d_i=" + std::to_string(loaded.state.dims.d_i) +
                    " do not match schema dims d_u=" + std::to_string(schema.user_dim()) +
                    ", d_i=" + std::to_string(schema.item_dim()));
  }
  MetaState state = std::move(loaded.state);
  state.hyper = cfg.hyper();

  EvalResult result;
  result.test_users = prep.test_episodes.size();
  std::vector<TestResult> outcomes(prep.test_episodes.size());
  detail::parallel_for(prep.test_episodes.size(), cfg.workers, [&](std::size_t i) {
    outcomes[i] = test_user(state, prep.test_episodes[i], prep.data.item_profiles);
  });

  std::vector<TaggedPair> tagged;
  for (std::size_t i = 0; i < prep.test_episodes.size(); ++i) {
    const Episode& ep = prep.test_episodes[i];
    if (!outcomes[i].adapted) ++result.unadapted_users;
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
      tagged.push_back(
          TaggedPair{ep.query_scenarios[q], outcomes[i].predictions[q], ep.query[q].rating});
    }
  }
  for (std::size_t n : cfg.ndcg_n) {
    result.reports.push_back(scenario_metrics(tagged, n, schema.rating_min, schema.rating_max));
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  result.metrics_path = (fs::path(cfg.out_dir) / metrics_name).string();
  write_metrics_csv(result.metrics_path, result.reports);
  return result;
}

/// The no-memory reduction: single slot, no bias scale, no gradient-memory
/// writes. Equivalent to a plain shared-initialization meta-learner.
inline RunConfig ablation_config(RunConfig cfg) {
  cfg.k = 1;
  cfg.tau = 0.0;
  cfg.beta = 0.0;
  return cfg;
}

struct AblateResult {
  EvalResult full;
  EvalResult reduced;
  std::string summary_path;
};

inline AblateResult run_ablate(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  AblateResult result;
  TrainResult full_train = run_train(cfg, "checkpoint.mamo", "train_log.csv");
  result.full = run_eval(cfg, full_train.checkpoint_path, "metrics.csv");

  const RunConfig reduced_cfg = ablation_config(cfg);
  TrainResult reduced_train =
      run_train(reduced_cfg, "checkpoint_ablation.mamo", "train_log_ablation.csv");
  result.reduced = run_eval(reduced_cfg, reduced_train.checkpoint_path, "metrics_ablation.csv");

  result.summary_path = (fs::path(cfg.out_dir) / "ablation_summary.csv").string();
  std::ofstream out(result.summary_path);
  if (!out) throw DataError("cannot write " + result.summary_path);
  out << "variant,scenario,metric,N,value,count\n" << std::setprecision(17);
  auto emit = [&](const std::string& variant, const MetricsReport& report) {
    static constexpr Scenario kOrder[] = {Scenario::warm_warm, Scenario::warm_cold,
                                          Scenario::cold_warm, Scenario::cold_cold};
    for (Scenario s : kOrder) {
      const auto& r = report.per_scenario[static_cast<std::size_t>(s)];
      if (!r.count) continue;
      out << variant << ',' << scenario_name(s) << ",MAE,," << r.mae << ',' << r.count << '\n';
      if (r.ndcg) {
        out << variant << ',' << scenario_name(s) << ",NDCG," << report.ndcg_n << ',' << *r.ndcg
            << ',' << r.count << '\n';
      }
    }
    out << variant << ",ALL,MAE,," << report.overall.mae << ',' << report.overall.count << '\n';
    if (report.overall.ndcg) {
      out << variant << ",ALL,NDCG," << report.ndcg_n << ',' << *report.overall.ndcg << ','
          << report.overall.count << '\n';
    }
  };
  emit("mamo", result.full.reports.front());
  emit("no-memory", result.reduced.reports.front());
  return result;
}

struct SynthResult {
  std::size_t users = 0, items = 0, records = 0;
};

inline SynthResult run_synth(const SynthConfig& synth_cfg, const std::string& out_dir) {
  SyntheticData data = generate_synthetic(synth_cfg);
  write_dataset_dir(out_dir, data.schema, data.users, data.items, data.records, &data.clusters);
  return SynthResult{data.users.size(), data.items.size(), data.records.size()};
}

}  // namespace mamo
