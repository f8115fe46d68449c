#pragma once

#include <algorithm>
#include <filesystem>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pentadrive/ann.hpp"
#include "pentadrive/config.hpp"
#include "pentadrive/io.hpp"
#include "pentadrive/metrics.hpp"
#include "pentadrive/sim.hpp"
#include "pentadrive/tuner.hpp"

namespace pentadrive {

/// Model file is incompatible with the active configuration.
struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cmddetail {

inline nlohmann::json bounds_to_json(const ThetaBounds& b) {
  return nlohmann::json{{"kp", {b.kp_min, b.kp_max}},
                        {"ki", {b.ki_min, b.ki_max}},
                        {"lambda_xy", {b.lxy_min, b.lxy_max}},
                        {"lambda_sc", {b.lsc_min, b.lsc_max}}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace cmddetail

/// Closed-loop step test identical to the tuner's, but returning the raw
/// per-tick records so they can be written out.
inline std::vector<LogRecord> run_scenario_records(const RunConfig& cfg,
                                                   const ControllerParams& theta,
                                                   const ScenarioConfig& sc) {
  const double t_onset = cfg.control.flux_ramp_s + sc.settle;
  const double t_end = t_onset + sc.duration;
  PlantState init;
  init.omega_m = sc.omega0;
  return run_closed_loop(
      cfg.machine, theta, cfg.control, cfg.load,
      [&](double t) { return t < t_onset ? sc.omega0 : sc.omega_ref; }, t_end, init);
}

/// simulate: one closed-loop step test -> trace CSV + indicator JSON.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const ControllerParams theta = cfg.theta0();
  const auto records = run_scenario_records(cfg, theta, cfg.scenario);
  const Trace trace = trace_from_records(records, cfg.machine.Ts);
  const IndicatorVector pi = compute_all(trace);

  const std::filesystem::path dir(cfg.out_dir);
  write_trace_csv(dir / "trace.csv", records);
  cmddetail::write_json(dir / "indicators.json", indicators_to_json(pi));
  out << "simulate: wrote " << (dir / "trace.csv").string() << " ("
      << records.size() << " rows) and " << (dir / "indicators.json").string()
      << "\n";
  return 0;
}

/// tune: constrained tuning at one operating point -> result JSON with the
/// full accepted history. An infeasible outcome is recorded, not an error.
inline int cmd_tune(const RunConfig& cfg, std::ostream& out,
                    std::optional<OperatingPoint> point_override = {}) {
  cfg.validate();
  const OperatingPoint x = point_override.value_or(
      OperatingPoint{cfg.scenario.omega0, cfg.scenario.omega_ref});
  const ControllerParams theta0 = cfg.theta0();
  const TuneResult r =
      gradient_descent_tune(x, theta0, cfg.objective, cfg.tune_options(),
                            cfg.tuner_context());

  nlohmann::json j;
  j["operating_point"] = {{"omega0", x.omega0}, {"omega_ref", x.omega_ref}};
  j["theta0"] = theta_to_json(theta0);
  j["theta_star"] = theta_to_json(r.theta_star);
  j["pi_star"] = indicators_to_json(r.pi_star);
  j["xi_star"] = r.xi_star;
  j["feasible"] = r.feasible;
  j["iterations"] = r.iterations;
  j["evals"] = r.evals;
  j["effective_weights"] = {{"c2", r.effective_spec.c2},
                            {"c3", r.effective_spec.c3},
                            {"c4", r.effective_spec.c4},
                            {"c5", r.effective_spec.c5}};
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [theta, xi_p] : r.history)
    hist.push_back({{"theta", theta_to_json(theta)}, {"xi_p", xi_p}});
  j["history"] = hist;

  const std::filesystem::path path = std::filesystem::path(cfg.out_dir) / "tune_result.json";
  cmddetail::write_json(path, j);
  out << "tune: wrote " << path.string() << " (feasible=" << (r.feasible ? "true" : "false")
      << ", evals=" << r.evals << ")\n";
  return 0;
}

/// dataset: tune every grid point -> dataset CSV + summary JSON. Warm start
/// is sequential; with workers > 1 and warm start off the points fan out and
/// are merged back in grid order.
inline int cmd_dataset(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const auto grid = make_grid(cfg.grid.omega0s, cfg.grid.omega_refs);
  const ControllerParams theta0 = cfg.theta0();
  const PointTuner tuner = make_sim_point_tuner(cfg.tuner_context(), cfg.objective,
                                                cfg.tune_options(), theta0);

  std::vector<DatasetRecord> records;
  DatasetSummary summary;
  if (cfg.workers > 1 && !cfg.warm_start) {
    std::vector<std::future<TuneResult>> futures;
    futures.reserve(grid.size());
    for (const OperatingPoint& x : grid)
      futures.push_back(std::async(std::launch::async,
                                   [&tuner, &theta0, x] { return tuner(x, theta0); }));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ++summary.attempted;
      try {
        const TuneResult r = futures[i].get();
        summary.total_evals += r.evals;
        if (r.pi_star.po >= 1e8) {
          summary.failures.push_back("point (" + std::to_string(grid[i].omega0) +
                                     ", " + std::to_string(grid[i].omega_ref) +
                                     "): all runs failed");
          continue;
        }
        records.push_back({grid[i].omega0, grid[i].omega_ref, r.theta_star, r.pi_star});
        ++summary.succeeded;
      } catch (const std::exception& e) {
        summary.failures.push_back("point (" + std::to_string(grid[i].omega0) + ", " +
                                   std::to_string(grid[i].omega_ref) + "): " + e.what());
      }
    }
  } else {
    records = build_dataset(grid, theta0, cfg.warm_start, tuner, &summary);
  }

  const std::filesystem::path dir(cfg.out_dir);
  write_dataset_csv(dir / "dataset.csv", records);
  nlohmann::json j;
  j["attempted"] = summary.attempted;
  j["succeeded"] = summary.succeeded;
  j["total_evals"] = summary.total_evals;
  j["failures"] = summary.failures;
  cmddetail::write_json(dir / "dataset_summary.json", j);
  out << "dataset: " << summary.succeeded << "/" << summary.attempted
      << " points tuned, " << summary.total_evals << " step tests, wrote "
      << (dir / "dataset.csv").string() << "\n";
  return 0;
}

/// train: dataset CSV -> model file + cross-validation report.
inline int cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                     std::ostream& out) {
  cfg.validate();
  const auto records = read_dataset_csv(dataset_path);
  auto [model, report] = train(records, cfg.train, cfg.bounds);

  const std::filesystem::path dir(cfg.out_dir);
  save_model(model, dir / "model.txt");

  nlohmann::json j;
  j["selected_hidden"] = report.selected_hidden;
  j["n_train"] = report.n_train;
  j["n_val"] = report.n_val;
  j["n_test"] = report.n_test;
  j["test_rmse_normalized"] = report.test_rmse_normalized;
  j["test_rmse_raw"] = report.test_rmse_raw;
  nlohmann::json cands = nlohmann::json::array();
  for (const CandidateReport& c : report.candidates)
    cands.push_back({{"hidden", c.hidden},
                     {"val_loss", c.val_loss},
                     {"best_epoch", c.best_epoch},
                     {"stopped_epoch", c.stopped_epoch}});
  j["candidates"] = cands;
  cmddetail::write_json(dir / "train_report.json", j);
  out << "train: selected hidden size " << report.selected_hidden << ", wrote "
      << (dir / "model.txt").string() << "\n";
  return 0;
}

/// One evaluation row: fixed-parameter controller vs the network tuner.
struct EvalRow {
  OperatingPoint point{};
  IndicatorVector pi_fixed{};
  IndicatorVector pi_ann{};
  ControllerParams theta_ann{};  // parameters in force at the end of the run
  double xi_fixed = 0.0;
  double xi_ann = 0.0;
  bool ann_feasible = false;
  std::optional<double> xi_star;  // tuned objective, when the dataset is given
};

/// Step test with the network retuning the controller at every speed-loop
/// tick. Returns the trace records and the final parameter set.
inline std::pair<std::vector<LogRecord>, ControllerParams> run_ann_scenario_records(
    const RunConfig& cfg, const MlpModel& model, const OperatingPoint& x,
    double duration, double settle) {
  const double t_onset = cfg.control.flux_ramp_s + settle;
  const double t_end = t_onset + duration;
  PlantState init;
  init.omega_m = x.omega0;
  OnlineTuner online(model, cfg.evaluate.rate_limit);
  ControllerParams last = cfg.theta0();
  auto records = run_closed_loop(
      cfg.machine, last, cfg.control, cfg.load,
      [&](double t) { return t < t_onset ? x.omega0 : x.omega_ref; }, t_end, init,
      [&](DriveController& ctrl, double w_ref, double w_m) {
        last = online.update(w_m, w_ref);
        ctrl.set_params(last);
      });
  return {std::move(records), last};
}

/// evaluate: side-by-side step tests with fixed theta0 and with the network
/// tuner, over the training grid and/or extra points. Writes the report and
/// plot-ready traces for the first plot_traces points.
inline int cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& model_path,
                        std::ostream& out,
                        std::optional<std::filesystem::path> dataset_path = {}) {
  cfg.validate();
  const MlpModel model = load_model(model_path);
  if (!(model.bounds == cfg.bounds))
    throw CompatibilityError("model bounds differ from configured tuner bounds; "
                             "retrain or adjust tuner.bounds");

  std::vector<OperatingPoint> points;
  if (cfg.evaluate.use_training_grid)
    points = make_grid(cfg.grid.omega0s, cfg.grid.omega_refs);
  points.insert(points.end(), cfg.evaluate.extra_points.begin(),
                cfg.evaluate.extra_points.end());
  if (points.empty()) throw ConfigError("evaluate has no operating points");

  std::vector<DatasetRecord> dataset;
  if (dataset_path) dataset = read_dataset_csv(*dataset_path);
  const auto find_tuned = [&](const OperatingPoint& x) -> const DatasetRecord* {
    for (const DatasetRecord& r : dataset)
      if (r.omega0 == x.omega0 && r.omega_ref == x.omega_ref) return &r;
    return nullptr;
  };

  const TunerContext ctx = cfg.tuner_context();
  const ControllerParams theta0 = cfg.theta0();
  const std::filesystem::path dir(cfg.out_dir);

  const auto eval_point = [&](std::size_t idx) {
    const OperatingPoint& x = points[idx];
    EvalRow row;
    row.point = x;
    row.pi_fixed = ctx.evaluate(x, theta0);

    auto [ann_records, theta_ann] =
        run_ann_scenario_records(cfg, model, x, ctx.duration, ctx.settle);
    const Trace ann_trace = trace_from_records(ann_records, cfg.machine.Ts);
    row.pi_ann = compute_all(ann_trace);
    row.theta_ann = theta_ann;

    const ObjectiveSpec eff = cfg.normalize_objective
                                  ? normalized_weights(cfg.objective, row.pi_fixed)
                                  : cfg.objective;
    row.xi_fixed = plain_objective(row.pi_fixed, eff);
    row.xi_ann = plain_objective(row.pi_ann, eff);
    row.ann_feasible = is_feasible(row.pi_ann, cfg.objective);
    if (const DatasetRecord* rec = find_tuned(x))
      row.xi_star = plain_objective(rec->pi, eff);

    if (idx < static_cast<std::size_t>(cfg.evaluate.plot_traces)) {
      const auto fixed_records = run_scenario_records(
          cfg, theta0, ScenarioConfig{x.omega0, x.omega_ref, ctx.duration, ctx.settle});
      write_trace_csv(dir / ("eval_trace_" + std::to_string(idx) + "_fixed.csv"),
                      fixed_records);
      write_trace_csv(dir / ("eval_trace_" + std::to_string(idx) + "_ann.csv"),
                      ann_records);
    }
    return row;
  };

  std::vector<EvalRow> rows(points.size());
  if (cfg.workers > 1) {
    std::vector<std::future<EvalRow>> futures;
    futures.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      futures.push_back(std::async(std::launch::async, eval_point, i));
    for (std::size_t i = 0; i < points.size(); ++i) rows[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) rows[i] = eval_point(i);
  }

  int feasible_count = 0;
  nlohmann::json jrows = nlohmann::json::array();
  for (const EvalRow& r : rows) {
    if (r.ann_feasible) ++feasible_count;
    nlohmann::json jr;
    jr["omega0"] = r.point.omega0;
    jr["omega_ref"] = r.point.omega_ref;
    jr["fixed"] = indicators_to_json(r.pi_fixed);
    jr["ann"] = indicators_to_json(r.pi_ann);
    jr["theta_ann"] = theta_to_json(r.theta_ann);
    jr["xi_fixed"] = r.xi_fixed;
    jr["xi_ann"] = r.xi_ann;
    jr["ann_feasible"] = r.ann_feasible;
    if (r.xi_star) {
      jr["xi_star"] = *r.xi_star;
      jr["xi_ratio"] = *r.xi_star > 0.0 ? r.xi_ann / *r.xi_star : 0.0;
    }
    jrows.push_back(jr);
  }

  nlohmann::json j;
  j["n_points"] = points.size();
  j["constraint_satisfaction"] =
      static_cast<double>(feasible_count) / static_cast<double>(points.size());
  j["rate_limit"] = cfg.evaluate.rate_limit;
  j["model_hidden"] = model.hidden;
  j["model_bounds"] = cmddetail::bounds_to_json(model.bounds);
  j["points"] = jrows;
  cmddetail::write_json(dir / "evaluate_report.json", j);
  out << "evaluate: " << points.size() << " points, constraint satisfaction "
      << feasible_count << "/" << points.size() << ", wrote "
      << (dir / "evaluate_report.json").string() << "\n";
  return 0;
}

/// Full argument parse + dispatch; returns the process exit code.
/// 0 success, 2 configuration, 3 divergence, 4 data, 5 compatibility.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Five-phase induction motor drive simulator and auto-tuner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;
  int workers = 0;
  bool workers_set = false;

  app.add_option("--config", config_path, "configuration file (JSON)");
  app.add_option("--seed", seed, "override the configured seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_dir, "output directory")
      ->each([&](const std::string&) { out_set = true; });
  app.add_option("--workers", workers, "parallel simulations where applicable")
      ->each([&](const std::string&) { workers_set = true; });

  CLI::App* sim = app.add_subcommand("simulate", "run one closed-loop step test");
  sim->fallthrough();
  CLI::App* tune = app.add_subcommand("tune", "tune controller parameters at one point");
  tune->fallthrough();
  double tune_omega0 = 0.0, tune_omega_ref = 0.0;
  bool tune_point_set = false;
  tune->add_option("--omega0", tune_omega0, "initial speed (rad/s)")
      ->each([&](const std::string&) { tune_point_set = true; });
  tune->add_option("--omega-ref", tune_omega_ref, "target speed (rad/s)")
      ->each([&](const std::string&) { tune_point_set = true; });
  CLI::App* dataset = app.add_subcommand("dataset", "tune the whole operating grid");
  dataset->fallthrough();
  CLI::App* train_cmd = app.add_subcommand("train", "train the tuner network");
  train_cmd->fallthrough();
  std::string dataset_path;
  train_cmd->add_option("--dataset", dataset_path, "dataset CSV path");
  CLI::App* evaluate = app.add_subcommand("evaluate", "compare fixed vs network tuning");
  evaluate->fallthrough();
  std::string model_path;
  std::string eval_dataset_path;
  evaluate->add_option("--model", model_path, "model file path");
  evaluate->add_option("--dataset", eval_dataset_path,
                       "dataset CSV for tuned-objective comparison");

  std::vector<std::string> argv_like(args.begin() + (args.empty() ? 0 : 1),
                                     args.end());
  std::reverse(argv_like.begin(), argv_like.end());
  try {
    app.parse(argv_like);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "argument error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    if (seed_set) {
      cfg.seed = seed;
      cfg.train.seed = seed;
    }
    if (out_set) cfg.out_dir = out_dir;
    if (workers_set) cfg.workers = workers;

    if (sim->parsed()) return cmd_simulate(cfg, out);
    if (tune->parsed()) {
      std::optional<OperatingPoint> pt;
      if (tune_point_set) pt = OperatingPoint{tune_omega0, tune_omega_ref};
      return cmd_tune(cfg, out, pt);
    }
    if (dataset->parsed()) return cmd_dataset(cfg, out);
    if (train_cmd->parsed()) {
      const std::filesystem::path path = dataset_path.empty()
                                             ? std::filesystem::path(cfg.out_dir) / "dataset.csv"
                                             : std::filesystem::path(dataset_path);
      return cmd_train(cfg, path, out);
    }
    if (evaluate->parsed()) {
      const std::filesystem::path mpath = model_path.empty()
                                              ? std::filesystem::path(cfg.out_dir) / "model.txt"
                                              : std::filesystem::path(model_path);
      std::optional<std::filesystem::path> dpath;
      if (!eval_dataset_path.empty()) dpath = eval_dataset_path;
      return cmd_evaluate(cfg, mpath, out, dpath);
    }
    err << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SimulationDiverged& e) {
    err << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const TrainingError& e) {
    err << "data error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    err << "data error: " << e.what() << "\n";
    return 4;
  } catch (const CompatibilityError& e) {
    err << "compatibility error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pentadrive
