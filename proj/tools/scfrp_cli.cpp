/**
 * @file scfrp_cli.cpp
 * @brief Command-line surface: simulate, sweep, dataset, train, predict,
 *        evaluate. Exit codes: 0 success, 2 configuration error,
 *        3 simulation failure, 4 dataset/training failure.
 */

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "scfrp/io.hpp"

namespace fs = std::filesystem;
using namespace scfrp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitPipeline = 4;

struct CommonOpts {
  int threads = 0;       // 0 = keep config value
  long long seed = -1;   // -1 = keep config value
};

void apply_overrides(RunConfig& rc, const CommonOpts& opts) {
  if (opts.threads > 0) rc.setup.solver.threads = opts.threads;
  if (opts.seed >= 0) rc.seed = static_cast<unsigned>(opts.seed);
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const CommonOpts& opts) {
  RunConfig rc = load_run_config(config_path);
  apply_overrides(rc, opts);
  const RunResult rr = execute_run(rc, out_dir);
  std::printf("case %s: %zu records%s -> %s\n", rc.case_name.c_str(), rr.records.size(),
              rr.terminated_early ? " (terminated early)" : "", out_dir.c_str());
  return 0;
}

int cmd_sweep(const std::string& plan_path, const std::string& out_root,
              const CommonOpts& opts) {
  SweepPlan plan = load_sweep_plan(plan_path);
  fs::create_directories(out_root);
  int failures = 0;
  for (RunConfig& rc : plan.cases) {
    apply_overrides(rc, opts);
    const fs::path dir = fs::path(out_root) / rc.case_name;
    try {
      const RunResult rr = execute_run(rc, dir);
      std::printf("[ ok ] %-24s %3zu records%s\n", rc.case_name.c_str(), rr.records.size(),
                  rr.terminated_early ? " (terminated early)" : "");
    } catch (const std::exception& ex) {
      ++failures;
      std::fprintf(stderr, "[fail] %-24s %s\n", rc.case_name.c_str(), ex.what());
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::fprintf(stderr, "%d of %zu runs failed\n", failures, plan.cases.size());
    return kExitSimulation;
  }
  return 0;
}

int cmd_dataset(const std::string& runs_root, const std::string& out_csv) {
  const auto rows = assemble_dataset(runs_root);
  write_dataset_csv(out_csv, rows);
  std::printf("dataset: %zu rows -> %s\n", rows.size(), out_csv.c_str());
  return 0;
}

std::vector<ShmRecord> training_rows(const std::vector<ShmRecord>& all,
                                     const std::set<std::string>& holdout) {
  std::vector<ShmRecord> out;
  for (const auto& r : all) {
    if (r.role == "test" || holdout.count(r.case_name)) continue;
    out.push_back(r);
  }
  return out;
}

int cmd_train(const std::string& dataset_csv, const std::string& model_out,
              const std::vector<std::string>& holdout_list, int inputs_mode,
              long long seed, int max_epochs, int patience) {
  const auto all = read_dataset_csv(dataset_csv);
  const std::set<std::string> holdout(holdout_list.begin(), holdout_list.end());
  for (const auto& tag : holdout) {
    bool found = false;
    for (const auto& r : all) found = found || r.case_name == tag;
    if (!found) throw IoError("holdout tag matches no run: " + tag);
  }
  const auto train = training_rows(all, holdout);
  if (train.size() < 8) throw IoError("training split too small: " + std::to_string(train.size()));

  TrainConfig cfg;
  cfg.max_epochs = max_epochs;
  cfg.patience = patience;
  if (seed >= 0) cfg.seed = static_cast<unsigned>(seed);

  Network net = network_init(inputs_mode, cfg.seed);
  net.holdout.assign(holdout.begin(), holdout.end());
  const Eigen::MatrixXd x = feature_matrix(train, inputs_mode);
  const Eigen::MatrixXd y = target_matrix(train);
  const TrainHistory hist = lm_train(net, x, y, cfg);
  save_model(model_out, net, cfg);
  std::printf("trained on %zu rows (%d params): epochs=%d best=%d val_mse=%.3e%s -> %s\n",
              train.size(), net.param_count(), hist.epochs_run, hist.best_epoch,
              hist.best_epoch >= 0 ? hist.val_mse[hist.best_epoch] : -1.0,
              hist.stopped_early ? " (early stop)" : "", model_out.c_str());
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& rows_csv,
                const std::string& out_csv) {
  const Network net = load_model(model_path);
  const auto rows = read_dataset_csv(rows_csv);
  const Eigen::MatrixXd x = feature_matrix(rows, net.n_in);
  std::ofstream out(out_csv);
  if (!out) throw IoError("cannot open " + out_csv);
  out << "case,step,a_tilde_hat,C_tilde_hat\n";
  for (int i = 0; i < x.rows(); ++i) {
    const Eigen::Vector2d y = forward(net, x.row(i).transpose());
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.10e,%.10e", y(0), y(1));
    out << rows[i].case_name << "," << rows[i].step << "," << buf << "\n";
  }
  std::printf("predictions: %d rows -> %s\n", static_cast<int>(x.rows()), out_csv.c_str());
  return 0;
}

void write_parity(const fs::path& path, const std::vector<ShmRecord>& rows,
                  const std::vector<int>& idx, const Network& net) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "case,step,a_tilde,a_tilde_hat,C_tilde,C_tilde_hat\n";
  for (int i : idx) {
    Eigen::VectorXd x = feature_matrix({rows[i]}, net.n_in).row(0).transpose();
    const Eigen::Vector2d y = forward(net, x);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.10e,%.10e,%.10e,%.10e", rows[i].a_tilde, y(0),
                  rows[i].c_tilde, y(1));
    out << rows[i].case_name << "," << rows[i].step << "," << buf << "\n";
  }
}

Metrics metrics_of(const std::vector<ShmRecord>& rows, const std::vector<int>& idx,
                   const Network& net) {
  Eigen::MatrixXd pred(static_cast<int>(idx.size()), 2);
  Eigen::MatrixXd truth(static_cast<int>(idx.size()), 2);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& r = rows[idx[k]];
    Eigen::VectorXd x = feature_matrix({r}, net.n_in).row(0).transpose();
    pred.row(static_cast<int>(k)) = forward(net, x).transpose();
    truth(static_cast<int>(k), 0) = r.a_tilde;
    truth(static_cast<int>(k), 1) = r.c_tilde;
  }
  return metrics(pred, truth);
}

int cmd_evaluate(const std::string& model_path, const std::string& dataset_csv,
                 const std::string& report_dir) {
  TrainConfig cfg;
  const Network net = load_model(model_path, &cfg);
  const auto all = read_dataset_csv(dataset_csv);
  const std::set<std::string> holdout(net.holdout.begin(), net.holdout.end());

  std::vector<int> train_like, test_idx;
  for (int i = 0; i < static_cast<int>(all.size()); ++i) {
    if (all[i].role == "test" || holdout.count(all[i].case_name)) {
      test_idx.push_back(i);
    } else {
      train_like.push_back(i);
    }
  }
  // reproduce the training-time split over the train-like rows
  const auto [tr_local, val_local] =
      train_val_split(static_cast<int>(train_like.size()), cfg.val_fraction, cfg.seed);
  std::vector<int> train_idx, val_idx;
  for (int i : tr_local) train_idx.push_back(train_like[i]);
  for (int i : val_local) val_idx.push_back(train_like[i]);

  fs::create_directories(report_dir);
  std::ofstream mout(fs::path(report_dir) / "metrics.csv");
  if (!mout) throw IoError("cannot open metrics.csv");
  mout << "split,output,r2,rmse,n\n";
  const char* outputs[2] = {"a_tilde", "C_tilde"};
  auto report = [&](const std::string& split, const std::vector<int>& idx) {
    if (idx.size() < 2) return;
    const Metrics m = metrics_of(all, idx, net);
    for (int c = 0; c < 2; ++c) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6e", m.r2[c], m.rmse[c]);
      mout << split << "," << outputs[c] << "," << buf << "," << idx.size() << "\n";
      std::printf("%-6s %-8s R2=%.4f RMSE=%.4e (n=%zu)\n", split.c_str(), outputs[c], m.r2[c],
                  m.rmse[c], idx.size());
    }
  };
  report("train", train_idx);
  report("val", val_idx);
  report("test", test_idx);
  write_parity(fs::path(report_dir) / "parity_train.csv", all, train_idx, net);
  write_parity(fs::path(report_dir) / "parity_val.csv", all, val_idx, net);
  write_parity(fs::path(report_dir) / "parity_test.csv", all, test_idx, net);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tension, fracture and electrode-sensing simulator for short-fiber composites"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* sim = app.add_subcommand("simulate", "Run one configured tension test");
  std::string sim_config, sim_out = "out/run";
  sim->add_option("--config", sim_config, "JSON run configuration")->required();
  sim->add_option("--out", sim_out, "Output run directory");
  sim->add_option("--threads", common.threads, "Assembly/sweep thread count");
  sim->add_option("--seed", common.seed, "Seed override");

  auto* swp = app.add_subcommand("sweep", "Run every case of a sweep plan");
  std::string swp_plan, swp_out = "out/sweep";
  swp->add_option("--plan", swp_plan, "JSON sweep plan")->required();
  swp->add_option("--out", swp_out, "Output root directory");
  swp->add_option("--threads", common.threads, "Assembly thread count");
  swp->add_option("--seed", common.seed, "Seed override");

  auto* dst = app.add_subcommand("dataset", "Assemble dataset rows from run directories");
  std::string dst_runs, dst_out = "dataset.csv";
  dst->add_option("--runs", dst_runs, "Sweep root or single run directory")->required();
  dst->add_option("--out", dst_out, "Output dataset CSV");

  auto* trn = app.add_subcommand("train", "Train the inverse network on a dataset");
  std::string trn_dataset, trn_model = "model.json";
  std::vector<std::string> trn_holdout;
  int trn_inputs = 32, trn_epochs = 1000, trn_patience = 20;
  long long trn_seed = -1;
  trn->add_option("--dataset", trn_dataset, "Dataset CSV")->required();
  trn->add_option("--model", trn_model, "Model output path");
  trn->add_option("--holdout", trn_holdout, "Case names to hold out of training");
  trn->add_option("--inputs-mode", trn_inputs, "31 or 32 input features")
      ->check(CLI::IsMember({31, 32}));
  trn->add_option("--seed", trn_seed, "Training seed");
  trn->add_option("--max-epochs", trn_epochs, "Epoch cap");
  trn->add_option("--patience", trn_patience, "Early-stopping patience");

  auto* prd = app.add_subcommand("predict", "Predict damage indicators for dataset rows");
  std::string prd_model, prd_rows, prd_out = "predictions.csv";
  prd->add_option("--model", prd_model, "Model file")->required();
  prd->add_option("--rows", prd_rows, "Rows in dataset CSV format")->required();
  prd->add_option("--out", prd_out, "Predictions CSV");

  auto* evl = app.add_subcommand("evaluate", "Metrics and parity tables for a trained model");
  std::string evl_model, evl_dataset, evl_report = "report";
  evl->add_option("--model", evl_model, "Model file")->required();
  evl->add_option("--dataset", evl_dataset, "Dataset CSV")->required();
  evl->add_option("--report", evl_report, "Report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, common);
    if (swp->parsed()) return cmd_sweep(swp_plan, swp_out, common);
    if (dst->parsed()) return cmd_dataset(dst_runs, dst_out);
    if (trn->parsed())
      return cmd_train(trn_dataset, trn_model, trn_holdout, trn_inputs, trn_seed, trn_epochs,
                       trn_patience);
    if (prd->parsed()) return cmd_predict(prd_model, prd_rows, prd_out);
    if (evl->parsed()) return cmd_evaluate(evl_model, evl_dataset, evl_report);
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "configuration error: %s\n", ex.what());
    return kExitConfig;
  } catch (const RunTerminated& ex) {
    std::fprintf(stderr, "simulation terminated: %s\n", ex.what());
    return kExitSimulation;
  } catch (const SolveError& ex) {
    std::fprintf(stderr, "solver error: %s\n", ex.what());
    return kExitSimulation;
  } catch (const IoError& ex) {
    std::fprintf(stderr, "pipeline error: %s\n", ex.what());
    return kExitPipeline;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
