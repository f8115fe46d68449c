#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pentadrive/ann.hpp"
#include "pentadrive/control.hpp"
#include "pentadrive/errors.hpp"
#include "pentadrive/io.hpp"
#include "pentadrive/plant.hpp"
#include "pentadrive/tuner.hpp"

namespace pentadrive {

namespace cfgdetail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& known,
                           const std::string& path) {
  for (const auto& item : obj.items())
    if (!known.contains(item.key()))
      throw ConfigError("unknown config key: " + path + item.key());
}

inline const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline void get_num(const json& obj, const std::string& key, double& dst,
                    const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number()) throw ConfigError("config key must be a number: " + path + key);
    dst = v->get<double>();
  }
}

inline void get_int(const json& obj, const std::string& key, int& dst,
                    const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_integer())
      throw ConfigError("config key must be an integer: " + path + key);
    dst = v->get<int>();
  }
}

inline void get_u64(const json& obj, const std::string& key, std::uint64_t& dst,
                    const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_integer())
      throw ConfigError("config key must be an integer: " + path + key);
    dst = v->get<std::uint64_t>();
  }
}

inline void get_bool(const json& obj, const std::string& key, bool& dst,
                     const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_boolean()) throw ConfigError("config key must be a boolean: " + path + key);
    dst = v->get<bool>();
  }
}

inline void get_str(const json& obj, const std::string& key, std::string& dst,
                    const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_string()) throw ConfigError("config key must be a string: " + path + key);
    dst = v->get<std::string>();
  }
}

inline void get_num_list(const json& obj, const std::string& key,
                         std::vector<double>& dst, const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_array()) throw ConfigError("config key must be an array: " + path + key);
    dst.clear();
    for (const auto& e : *v) {
      if (!e.is_number())
        throw ConfigError("config key must hold numbers: " + path + key);
      dst.push_back(e.get<double>());
    }
  }
}

inline void get_range(const json& obj, const std::string& key, double& lo, double& hi,
                      const std::string& path) {
  if (const json* v = find(obj, key)) {
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
      throw ConfigError("config key must be a [lo, hi] pair: " + path + key);
    lo = (*v)[0].get<double>();
    hi = (*v)[1].get<double>();
  }
}

}  // namespace cfgdetail

/// Step scenario used by `simulate` and as the default tune operating point.
struct ScenarioConfig {
  double omega0 = 0.0;
  double omega_ref = 100.0;
  double duration = 2.0;  // recorded time after the step (s)
  double settle = 0.5;    // pre-step settling (s)
};

struct GridConfig {
  std::vector<double> omega0s{0.0, 40.0, 80.0, 120.0};
  std::vector<double> omega_refs{25.0, 45.0, 65.0, 85.0, 105.0, 125.0};
};

struct EvaluateConfig {
  bool use_training_grid = true;
  std::vector<OperatingPoint> extra_points;
  double rate_limit = 0.1;  // online tuner rate limit fraction; <= 0 disables
  int plot_traces = 1;      // number of grid points to dump full traces for
};

/// Full experiment configuration; every field has a default, config files
/// override selectively, unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 1;

  MachineParams machine{};
  ControllerParams controller{};  // theta0; gains may come from the rough guess
  ControllerConfig control{};
  bool use_initial_guess = true;
  double pi_bandwidth = 20.0;  // rad/s, for the rough PI guess

  LoadSpec load{};
  ScenarioConfig scenario{};

  ObjectiveSpec objective{};
  bool normalize_objective = true;
  ThetaBounds bounds{};
  MinimizeOptions minimize{};
  double cap_margin = 0.8;
  bool warm_start = true;
  double tune_duration = 1.2;  // post-step window during tuning (s)
  double tune_settle = 0.5;

  GridConfig grid{};
  TrainConfig train{};
  EvaluateConfig evaluate{};

  /// Starting parameter set: configured weighting factors plus either the
  /// configured gains or the pole-placement guess.
  ControllerParams theta0() const {
    ControllerParams t = controller;
    if (use_initial_guess) {
      const auto [kp, ki] = initial_guess_pi(machine, pi_bandwidth, control.id_ref);
      t.kp = kp;
      t.ki = ki;
    }
    return bounds.clip(t);
  }

  TunerContext tuner_context() const {
    TunerContext ctx;
    ctx.machine = machine;
    ctx.control = control;
    ctx.load = load;
    ctx.duration = tune_duration;
    ctx.settle = tune_settle;
    ctx.seed = seed;
    return ctx;
  }

  TuneOptions tune_options() const {
    TuneOptions opts;
    opts.bounds = bounds;
    opts.minimize = minimize;
    opts.normalize = normalize_objective;
    opts.cap_margin = cap_margin;
    return opts;
  }

  void validate() const {
    machine.validate();
    controller.validate();
    control.validate();
    load.validate();
    objective.validate();
    bounds.validate();
    train.validate();
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(pi_bandwidth > 0.0)) throw ConfigError("pi_bandwidth must be > 0");
    if (!(scenario.duration > 0.0)) throw ConfigError("scenario.duration must be > 0");
    if (scenario.settle < 0.0) throw ConfigError("scenario.settle must be >= 0");
    if (!(tune_duration > 0.0)) throw ConfigError("tune_duration must be > 0");
    if (tune_settle < 0.0) throw ConfigError("tune_settle must be >= 0");
    if (grid.omega0s.empty() || grid.omega_refs.empty())
      throw ConfigError("grid speed lists must not be empty");
    if (evaluate.plot_traces < 0) throw ConfigError("evaluate.plot_traces must be >= 0");
  }
};

/// Parses a config object, rejecting unknown keys with their full path.
inline RunConfig config_from_json(const nlohmann::json& root) {
  using namespace cfgdetail;
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig c;
  reject_unknown(root,
                 {"seed", "out_dir", "workers", "machine", "controller", "control",
                  "use_initial_guess", "pi_bandwidth", "load", "scenario",
                  "objective", "tuner", "grid", "train", "evaluate"},
                 "");
  get_u64(root, "seed", c.seed, "");
  get_str(root, "out_dir", c.out_dir, "");
  get_int(root, "workers", c.workers, "");
  get_bool(root, "use_initial_guess", c.use_initial_guess, "");
  get_num(root, "pi_bandwidth", c.pi_bandwidth, "");

  if (const json* m = find(root, "machine")) {
    reject_unknown(*m,
                   {"Rs", "Rr", "Lls", "Llr", "LM", "Jm", "Bm", "pole_pairs", "Vdc",
                    "Ts", "substeps"},
                   "machine.");
    get_num(*m, "Rs", c.machine.Rs, "machine.");
    get_num(*m, "Rr", c.machine.Rr, "machine.");
    get_num(*m, "Lls", c.machine.Lls, "machine.");
    get_num(*m, "Llr", c.machine.Llr, "machine.");
    get_num(*m, "LM", c.machine.LM, "machine.");
    get_num(*m, "Jm", c.machine.Jm, "machine.");
    get_num(*m, "Bm", c.machine.Bm, "machine.");
    get_int(*m, "pole_pairs", c.machine.pole_pairs, "machine.");
    get_num(*m, "Vdc", c.machine.Vdc, "machine.");
    get_num(*m, "Ts", c.machine.Ts, "machine.");
    get_int(*m, "substeps", c.machine.substeps, "machine.");
  }

  if (const json* t = find(root, "controller")) {
    reject_unknown(*t, {"kp", "ki", "lambda_xy", "lambda_sc"}, "controller.");
    get_num(*t, "kp", c.controller.kp, "controller.");
    get_num(*t, "ki", c.controller.ki, "controller.");
    get_num(*t, "lambda_xy", c.controller.lambda_xy, "controller.");
    get_num(*t, "lambda_sc", c.controller.lambda_sc, "controller.");
  }

  if (const json* k = find(root, "control")) {
    reject_unknown(*k, {"id_ref", "flux_ramp_s", "output_limit", "speed_div"},
                   "control.");
    get_num(*k, "id_ref", c.control.id_ref, "control.");
    get_num(*k, "flux_ramp_s", c.control.flux_ramp_s, "control.");
    get_num(*k, "output_limit", c.control.output_limit, "control.");
    get_int(*k, "speed_div", c.control.speed_div, "control.");
  }

  if (const json* l = find(root, "load")) {
    reject_unknown(*l, {"mode", "t_l0", "k_v", "profile"}, "load.");
    std::string mode = "constant";
    get_str(*l, "mode", mode, "load.");
    if (mode == "constant")
      c.load.mode = LoadSpec::Mode::kConstant;
    else if (mode == "viscous")
      c.load.mode = LoadSpec::Mode::kViscous;
    else if (mode == "profile")
      c.load.mode = LoadSpec::Mode::kProfile;
    else
      throw ConfigError("load.mode must be constant, viscous or profile");
    get_num(*l, "t_l0", c.load.t_l0, "load.");
    get_num(*l, "k_v", c.load.k_v, "load.");
    if (const json* p = find(*l, "profile")) {
      if (!p->is_array()) throw ConfigError("load.profile must be an array");
      c.load.profile.clear();
      for (const auto& e : *p) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
          throw ConfigError("load.profile entries must be [t, T_L] pairs");
        c.load.profile.emplace_back(e[0].get<double>(), e[1].get<double>());
      }
    }
  }

  if (const json* s = find(root, "scenario")) {
    reject_unknown(*s, {"omega0", "omega_ref", "duration", "settle"}, "scenario.");
    get_num(*s, "omega0", c.scenario.omega0, "scenario.");
    get_num(*s, "omega_ref", c.scenario.omega_ref, "scenario.");
    get_num(*s, "duration", c.scenario.duration, "scenario.");
    get_num(*s, "settle", c.scenario.settle, "scenario.");
  }

  if (const json* o = find(root, "objective")) {
    reject_unknown(*o, {"c2", "c3", "c4", "c5", "u_po", "u_asf", "mu", "normalize"},
                   "objective.");
    get_num(*o, "c2", c.objective.c2, "objective.");
    get_num(*o, "c3", c.objective.c3, "objective.");
    get_num(*o, "c4", c.objective.c4, "objective.");
    get_num(*o, "c5", c.objective.c5, "objective.");
    get_num(*o, "u_po", c.objective.u_po, "objective.");
    get_num(*o, "u_asf", c.objective.u_asf, "objective.");
    get_num(*o, "mu", c.objective.mu, "objective.");
    get_bool(*o, "normalize", c.normalize_objective, "objective.");
  }

  if (const json* t = find(root, "tuner")) {
    reject_unknown(*t,
                   {"max_iters", "fd_step", "init_step", "min_step", "tol_rel",
                    "max_line_search", "bounds", "warm_start", "duration", "settle",
                    "cap_margin"},
                   "tuner.");
    get_int(*t, "max_iters", c.minimize.max_iters, "tuner.");
    get_num(*t, "fd_step", c.minimize.fd_step, "tuner.");
    get_num(*t, "init_step", c.minimize.init_step, "tuner.");
    get_num(*t, "min_step", c.minimize.min_step, "tuner.");
    get_num(*t, "tol_rel", c.minimize.tol_rel, "tuner.");
    get_int(*t, "max_line_search", c.minimize.max_line_search, "tuner.");
    get_bool(*t, "warm_start", c.warm_start, "tuner.");
    get_num(*t, "cap_margin", c.cap_margin, "tuner.");
    get_num(*t, "duration", c.tune_duration, "tuner.");
    get_num(*t, "settle", c.tune_settle, "tuner.");
    if (const json* b = find(*t, "bounds")) {
      reject_unknown(*b, {"kp", "ki", "lambda_xy", "lambda_sc"}, "tuner.bounds.");
      get_range(*b, "kp", c.bounds.kp_min, c.bounds.kp_max, "tuner.bounds.");
      get_range(*b, "ki", c.bounds.ki_min, c.bounds.ki_max, "tuner.bounds.");
      get_range(*b, "lambda_xy", c.bounds.lxy_min, c.bounds.lxy_max, "tuner.bounds.");
      get_range(*b, "lambda_sc", c.bounds.lsc_min, c.bounds.lsc_max, "tuner.bounds.");
    }
  }

  if (const json* g = find(root, "grid")) {
    reject_unknown(*g, {"omega0", "omega_ref"}, "grid.");
    get_num_list(*g, "omega0", c.grid.omega0s, "grid.");
    get_num_list(*g, "omega_ref", c.grid.omega_refs, "grid.");
  }

  if (const json* t = find(root, "train")) {
    reject_unknown(*t,
                   {"hidden_sizes", "max_epochs", "learning_rate", "patience",
                    "validation_fraction", "test_fraction", "seed"},
                   "train.");
    if (const json* hs = find(*t, "hidden_sizes")) {
      if (!hs->is_array()) throw ConfigError("train.hidden_sizes must be an array");
      c.train.hidden_sizes.clear();
      for (const auto& e : *hs) {
        if (!e.is_number_integer())
          throw ConfigError("train.hidden_sizes entries must be integers");
        c.train.hidden_sizes.push_back(e.get<int>());
      }
    }
    get_int(*t, "max_epochs", c.train.max_epochs, "train.");
    get_num(*t, "learning_rate", c.train.learning_rate, "train.");
    get_int(*t, "patience", c.train.patience, "train.");
    get_num(*t, "validation_fraction", c.train.validation_fraction, "train.");
    get_num(*t, "test_fraction", c.train.test_fraction, "train.");
    get_u64(*t, "seed", c.train.seed, "train.");
  }

  if (const json* e = find(root, "evaluate")) {
    reject_unknown(*e, {"use_training_grid", "points", "rate_limit", "plot_traces"},
                   "evaluate.");
    get_bool(*e, "use_training_grid", c.evaluate.use_training_grid, "evaluate.");
    get_num(*e, "rate_limit", c.evaluate.rate_limit, "evaluate.");
    get_int(*e, "plot_traces", c.evaluate.plot_traces, "evaluate.");
    if (const json* pts = find(*e, "points")) {
      if (!pts->is_array()) throw ConfigError("evaluate.points must be an array");
      c.evaluate.extra_points.clear();
      for (const auto& p : *pts) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
          throw ConfigError("evaluate.points entries must be [omega0, omega_ref]");
        c.evaluate.extra_points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
  }

  c.validate();
  return c;
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(root);
}

}  // namespace pentadrive
