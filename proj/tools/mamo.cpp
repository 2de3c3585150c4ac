// mamo: memory-augmented meta-optimization for cold-start rating prediction.
//
// Subcommands: synth, ingest, train, eval, gradcheck, ablate.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
// divergence, 5 verification failure.

#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mamo/gradcheck.hpp"
#include "mamo/parsers.hpp"
#include "mamo/runner.hpp"

namespace {

struct ConfigBinding {
  CLI::Option* opt = nullptr;
  std::function<void(mamo::RunConfig&, const mamo::RunConfig&)> apply;
};

// Registers the shared run options. Explicitly passed flags override values
// from --config, which override the defaults.
void add_run_options(CLI::App* cmd, mamo::RunConfig& staging, std::string& config_path,
                     std::vector<ConfigBinding>& binds) {
  cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  auto bind = [&](CLI::Option* opt, auto member) {
    binds.push_back(ConfigBinding{
        opt, [member](mamo::RunConfig& dst, const mamo::RunConfig& src) { dst.*member = src.*member; }});
  };
  bind(cmd->add_option("--data", staging.data_dir, "canonical dataset directory"),
       &mamo::RunConfig::data_dir);
  bind(cmd->add_option("--out", staging.out_dir, "output directory"), &mamo::RunConfig::out_dir);
  bind(cmd->add_option("--d_e", staging.d_e, "embedding size"), &mamo::RunConfig::d_e);
  bind(cmd->add_option("--layers", staging.layers, "dense layers per stack"),
       &mamo::RunConfig::layers);
  bind(cmd->add_option("--k", staging.k, "memory slots"), &mamo::RunConfig::k);
  bind(cmd->add_option("--rho", staging.rho, "local learning rate"), &mamo::RunConfig::rho);
  bind(cmd->add_option("--lambda", staging.lambda, "global learning rate"),
       &mamo::RunConfig::lambda);
  bind(cmd->add_option("--tau", staging.tau, "bias-term scale"), &mamo::RunConfig::tau);
  bind(cmd->add_option("--alpha", staging.alpha, "profile-memory write rate"),
       &mamo::RunConfig::alpha);
  bind(cmd->add_option("--beta", staging.beta, "gradient-memory write rate"),
       &mamo::RunConfig::beta);
  bind(cmd->add_option("--gamma", staging.gamma, "task-memory write rate"),
       &mamo::RunConfig::gamma);
  bind(cmd->add_option("--user_batch", staging.user_batch, "users per global update"),
       &mamo::RunConfig::user_batch);
  bind(cmd->add_option("--epochs", staging.epochs, "training epochs"), &mamo::RunConfig::epochs);
  bind(cmd->add_option("--support_passes", staging.support_passes,
                       "passes over the support set per episode"),
       &mamo::RunConfig::support_passes);
  bind(cmd->add_option("--split_ratio", staging.split_ratio, "train fraction of users"),
       &mamo::RunConfig::split_ratio);
  bind(cmd->add_option("--support_size", staging.support_size, "support items per episode"),
       &mamo::RunConfig::support_size);
  bind(cmd->add_option("--record_cap", staging.record_cap, "max records per user"),
       &mamo::RunConfig::record_cap);
  bind(cmd->add_option("--ndcg_n", staging.ndcg_n, "NDCG cutoffs"), &mamo::RunConfig::ndcg_n);
  bind(cmd->add_option("--seed", staging.seed, "random seed"), &mamo::RunConfig::seed);
  bind(cmd->add_option("--workers", staging.workers, "episode worker threads"),
       &mamo::RunConfig::workers);
  bind(cmd->add_option("--user_cold_mode", staging.user_cold_mode,
                       "cold-user rule: percentile|cutoff"),
       &mamo::RunConfig::user_cold_mode);
  bind(cmd->add_option("--user_cold_value", staging.user_cold_value,
                       "warm fraction (percentile) or order-key cutoff"),
       &mamo::RunConfig::user_cold_value);
  bind(cmd->add_option("--item_cold_threshold", staging.item_cold_threshold,
                       "items with fewer ratings are cold"),
       &mamo::RunConfig::item_cold_threshold);
  bind(cmd->add_option("--resume", staging.resume, "checkpoint to resume training from"),
       &mamo::RunConfig::resume);
}

mamo::RunConfig merge_config(const std::string& config_path, const mamo::RunConfig& staging,
                             const std::vector<ConfigBinding>& binds) {
  mamo::RunConfig cfg;
  if (!config_path.empty()) cfg = mamo::load_config_file(config_path);
  for (const auto& b : binds) {
    if (b.opt->count() > 0) b.apply(cfg, staging);
  }
  return cfg;
}

void print_ingest_report(const mamo::IngestReport& report) {
  std::cout << "users:   " << report.users_parsed << " kept, " << report.users_rejected
            << " rejected\n"
            << "items:   " << report.items_parsed << " kept, " << report.items_rejected
            << " rejected\n"
            << "ratings: " << report.ratings_kept << " kept, " << report.ratings_rejected
            << " rejected\n";
  for (const auto& reason : report.sample_reasons) std::cout << "  - " << reason << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memory-augmented meta-optimization for cold-start rating prediction"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  mamo::SynthConfig synth_cfg;
  std::string synth_out = "synthetic";
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--users", synth_cfg.n_users, "number of users");
  synth->add_option("--items", synth_cfg.n_items, "number of items");
  synth->add_option("--clusters", synth_cfg.n_clusters, "number of preference clusters");
  synth->add_option("--noise", synth_cfg.noise_sd, "rating noise standard deviation");
  synth->add_option("--records", synth_cfg.records_per_user, "rating records per user");
  synth->add_option("--seed", synth_cfg.seed, "random seed");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert a raw dataset to the canonical layout");
  std::string ingest_dataset, ingest_users, ingest_items, ingest_ratings, ingest_out = "data";
  ingest->add_option("--dataset", ingest_dataset, "movielens | bookcrossing")->required();
  ingest->add_option("--users", ingest_users, "raw user file")->required();
  ingest->add_option("--items", ingest_items, "raw item file")->required();
  ingest->add_option("--ratings", ingest_ratings, "raw ratings file")->required();
  ingest->add_option("--out", ingest_out, "output directory");

  // train / eval / ablate share the run options
  auto* train_cmd = app.add_subcommand("train", "meta-train and write a checkpoint");
  mamo::RunConfig train_staging;
  std::string train_config_path;
  std::vector<ConfigBinding> train_binds;
  add_run_options(train_cmd, train_staging, train_config_path, train_binds);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint per cold-start scenario");
  mamo::RunConfig eval_staging;
  std::string eval_config_path, eval_checkpoint;
  std::vector<ConfigBinding> eval_binds;
  add_run_options(eval_cmd, eval_staging, eval_config_path, eval_binds);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();

  auto* ablate_cmd =
      app.add_subcommand("ablate", "train and evaluate both the full model and the no-memory reduction");
  mamo::RunConfig ablate_staging;
  std::string ablate_config_path;
  std::vector<ConfigBinding> ablate_binds;
  add_run_options(ablate_cmd, ablate_staging, ablate_config_path, ablate_binds);

  // gradcheck
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  mamo::GradcheckOptions gc;
  gradcheck_cmd->add_option("--seed", gc.seed, "random seed");
  gradcheck_cmd->add_option("--trials", gc.trials, "random instances");
  gradcheck_cmd->add_option("--epsilon", gc.epsilon, "finite-difference step");
  gradcheck_cmd->add_flag("--corrupt", gc.corrupt)->group("");  // test hook

  try {
    app.parse(argc, argv);

    if (*synth) {
      const mamo::SynthResult r = mamo::run_synth(synth_cfg, synth_out);
      std::cout << "wrote " << synth_out << ": " << r.users << " users, " << r.items << " items, "
                << r.records << " ratings (+ schema.json, clusters.csv)\n";
      return 0;
    }
    if (*ingest) {
      mamo::ParsedDataset parsed;
      if (ingest_dataset == "movielens") {
        parsed = mamo::parse_movielens(ingest_users, ingest_items, ingest_ratings);
      } else if (ingest_dataset == "bookcrossing") {
        parsed = mamo::parse_bookcrossing(ingest_users, ingest_items, ingest_ratings);
      } else {
        throw mamo::ConfigError("unknown dataset '" + ingest_dataset + "'");
      }
      mamo::write_dataset_dir(ingest_out, parsed.schema, parsed.users, parsed.items,
                              parsed.records);
      print_ingest_report(parsed.report);
      std::cout << "wrote canonical dataset to " << ingest_out << '\n';
      return 0;
    }
    if (*train_cmd) {
      const mamo::RunConfig cfg = merge_config(train_config_path, train_staging, train_binds);
      const mamo::TrainResult r = mamo::run_train(cfg);
      std::cout << "trained on " << r.train_users << " users (" << r.skipped_users
                << " skipped)\n";
      if (!r.logs.empty()) {
        std::cout << "final train query MAE: " << std::fixed << std::setprecision(4)
                  << r.logs.back().train_query_mae << '\n';
      }
      std::cout << "checkpoint: " << r.checkpoint_path << "\nlog: " << r.log_path << '\n';
      return 0;
    }
    if (*eval_cmd) {
      const mamo::RunConfig cfg = merge_config(eval_config_path, eval_staging, eval_binds);
      const mamo::EvalResult r = mamo::run_eval(cfg, eval_checkpoint);
      std::cout << "evaluated " << r.test_users << " test users";
      if (r.unadapted_users) std::cout << " (" << r.unadapted_users << " without support items)";
      std::cout << '\n';
      for (const auto& report : r.reports) mamo::print_metrics(std::cout, report);
      std::cout << "metrics: " << r.metrics_path << '\n';
      return 0;
    }
    if (*ablate_cmd) {
      const mamo::RunConfig cfg = merge_config(ablate_config_path, ablate_staging, ablate_binds);
      const mamo::AblateResult r = mamo::run_ablate(cfg);
      std::cout << "full model:\n";
      mamo::print_metrics(std::cout, r.full.reports.front());
      std::cout << "no-memory reduction (k=1, tau=0, beta=0):\n";
      mamo::print_metrics(std::cout, r.reduced.reports.front());
      std::cout << "summary: " << r.summary_path << '\n';
      return 0;
    }
    if (*gradcheck_cmd) {
      const mamo::GradcheckReport report = mamo::run_gradcheck(gc);
      std::cout << std::scientific << std::setprecision(3)
                << "max relative error per group over " << report.trials << " trials\n"
                << "  theta_u:      " << report.max_user << '\n'
                << "  theta_i:      " << report.max_item << '\n'
                << "  theta_r:      " << report.max_rating << '\n'
                << "  fast weights: " << report.max_fast << '\n'
                << "  meta:         " << report.max_meta << '\n'
                << "threshold: " << report.threshold << '\n'
                << (report.pass() ? "PASS" : "FAIL") << '\n';
      return report.pass() ? 0 : 5;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const mamo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mamo::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const mamo::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
