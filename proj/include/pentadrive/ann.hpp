#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pentadrive/errors.hpp"
#include "pentadrive/io.hpp"
#include "pentadrive/tuner.hpp"

namespace pentadrive {

/// Two-input multilayer perceptron mapping (omega, omega_ref) to the four
/// controller parameters. One sigmoid hidden layer, linear outputs, bias on
/// every unit. The weighting factors are regressed in log10 space; inference
/// denormalizes, exponentiates them back and clips everything to the tuning
/// bounds.
struct MlpModel {
  int hidden = 0;
  std::vector<double> w1;  // hidden x 2, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // 4 x hidden, row-major
  std::vector<double> b2;  // 4
  std::array<double, 2> x_mean{0.0, 0.0};
  std::array<double, 2> x_std{1.0, 1.0};
  std::array<double, 4> y_mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> y_std{1.0, 1.0, 1.0, 1.0};
  ThetaBounds bounds{};

  void validate() const {
    if (hidden < 1) throw ConfigError("mlp needs at least one hidden unit");
    const auto h = static_cast<std::size_t>(hidden);
    if (w1.size() != 2 * h || b1.size() != h || w2.size() != 4 * h || b2.size() != 4)
      throw ConfigError("mlp weight shapes do not match the hidden size");
    for (double s : x_std)
      if (!(s > 0.0)) throw ConfigError("mlp input std must be > 0");
    for (double s : y_std)
      if (!(s > 0.0)) throw ConfigError("mlp output std must be > 0");
  }

  /// Normalized-space forward pass.
  std::array<double, 4> forward_normalized(const std::array<double, 2>& xn) const {
    std::array<double, 4> out{};
    std::vector<double> z(static_cast<std::size_t>(hidden));
    for (int j = 0; j < hidden; ++j) {
      const double a = w1[2 * j] * xn[0] + w1[2 * j + 1] * xn[1] + b1[j];
      z[j] = 1.0 / (1.0 + std::exp(-a));
    }
    for (int o = 0; o < 4; ++o) {
      double acc = b2[o];
      for (int j = 0; j < hidden; ++j) acc += w2[o * hidden + j] * z[j];
      out[o] = acc;
    }
    return out;
  }

  /// Controller parameters for the given speed and reference, clipped to the
  /// tuning bounds.
  ControllerParams forward(double omega, double omega_ref) const {
    const std::array<double, 2> xn = {(omega - x_mean[0]) / x_std[0],
                                      (omega_ref - x_mean[1]) / x_std[1]};
    const std::array<double, 4> yn = forward_normalized(xn);
    ControllerParams t;
    t.kp = yn[0] * y_std[0] + y_mean[0];
    t.ki = yn[1] * y_std[1] + y_mean[1];
    t.lambda_xy = std::pow(10.0, yn[2] * y_std[2] + y_mean[2]);
    t.lambda_sc = std::pow(10.0, yn[3] * y_std[3] + y_mean[3]);
    return bounds.clip(t);
  }
};

/// Raw regression target for one record: gains linear, weights in log10.
inline std::array<double, 4> regression_target(const ControllerParams& t) {
  return {t.kp, t.ki, std::log10(t.lambda_xy), std::log10(t.lambda_sc)};
}

struct Sample {
  std::array<double, 2> x{};
  ControllerParams theta{};
};

struct Gradient {
  std::vector<double> w1, b1, w2, b2;
};

/// Mean squared error in normalized output space over the batch,
/// L = (1/2B) * sum ||yhat - y||^2, and its gradient by backpropagation.
inline std::pair<double, Gradient> loss_and_gradient(const MlpModel& m,
                                                     const std::vector<Sample>& batch) {
  if (batch.empty()) throw TrainingError("empty training batch");
  const int h = m.hidden;
  Gradient g;
  g.w1.assign(m.w1.size(), 0.0);
  g.b1.assign(m.b1.size(), 0.0);
  g.w2.assign(m.w2.size(), 0.0);
  g.b2.assign(m.b2.size(), 0.0);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> z(static_cast<std::size_t>(h));

  for (const Sample& s : batch) {
    const std::array<double, 2> xn = {(s.x[0] - m.x_mean[0]) / m.x_std[0],
                                      (s.x[1] - m.x_mean[1]) / m.x_std[1]};
    const std::array<double, 4> target = regression_target(s.theta);
    std::array<double, 4> yn;
    for (int o = 0; o < 4; ++o) yn[o] = (target[o] - m.y_mean[o]) / m.y_std[o];

    for (int j = 0; j < h; ++j) {
      const double a = m.w1[2 * j] * xn[0] + m.w1[2 * j + 1] * xn[1] + m.b1[j];
      z[j] = 1.0 / (1.0 + std::exp(-a));
    }
    std::array<double, 4> e;
    for (int o = 0; o < 4; ++o) {
      double acc = m.b2[o];
      for (int j = 0; j < h; ++j) acc += m.w2[o * h + j] * z[j];
      e[o] = acc - yn[o];
      loss += 0.5 * e[o] * e[o] * inv_b;
    }
    for (int o = 0; o < 4; ++o) {
      const double eo = e[o] * inv_b;
      g.b2[o] += eo;
      for (int j = 0; j < h; ++j) g.w2[o * h + j] += eo * z[j];
    }
    for (int j = 0; j < h; ++j) {
      double dz = 0.0;
      for (int o = 0; o < 4; ++o) dz += e[o] * m.w2[o * h + j];
      const double da = dz * z[j] * (1.0 - z[j]) * inv_b;
      g.b1[j] += da;
      g.w1[2 * j] += da * xn[0];
      g.w1[2 * j + 1] += da * xn[1];
    }
  }
  return {loss, g};
}

inline double loss_only(const MlpModel& m, const std::vector<Sample>& batch) {
  if (batch.empty()) throw TrainingError("empty batch");
  const int h = m.hidden;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  std::vector<double> z(static_cast<std::size_t>(h));
  for (const Sample& s : batch) {
    const std::array<double, 2> xn = {(s.x[0] - m.x_mean[0]) / m.x_std[0],
                                      (s.x[1] - m.x_mean[1]) / m.x_std[1]};
    const std::array<double, 4> target = regression_target(s.theta);
    for (int j = 0; j < h; ++j) {
      const double a = m.w1[2 * j] * xn[0] + m.w1[2 * j + 1] * xn[1] + m.b1[j];
      z[j] = 1.0 / (1.0 + std::exp(-a));
    }
    for (int o = 0; o < 4; ++o) {
      double acc = m.b2[o];
      for (int j = 0; j < h; ++j) acc += m.w2[o * h + j] * z[j];
      const double e = acc - (target[o] - m.y_mean[o]) / m.y_std[o];
      loss += 0.5 * e * e * inv_b;
    }
  }
  return loss;
}

struct TrainConfig {
  std::vector<int> hidden_sizes{2, 4, 8, 16};
  int max_epochs = 10000;
  double learning_rate = 0.2;
  int patience = 800;          // early stop this many epochs after the best
  double validation_fraction = 0.2;
  double test_fraction = 0.15; // held out for the final report only
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden_sizes.empty()) throw ConfigError("train.hidden_sizes must not be empty");
    for (int hsz : hidden_sizes)
      if (hsz < 1) throw ConfigError("train.hidden_sizes entries must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (patience < 1) throw ConfigError("train.patience must be >= 1");
    if (!(validation_fraction > 0.0) || validation_fraction > 0.5)
      throw ConfigError("train.validation_fraction must be in (0, 0.5]");
    if (test_fraction < 0.0 || test_fraction > 0.5)
      throw ConfigError("train.test_fraction must be in [0, 0.5]");
  }
};

struct CandidateReport {
  int hidden = 0;
  double val_loss = 0.0;   // best validation loss (normalized space)
  int best_epoch = 0;
  int stopped_epoch = 0;
};

struct TrainReport {
  std::vector<CandidateReport> candidates;
  int selected_hidden = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  // Final held-out evaluation of the selected model; not used for selection.
  double test_rmse_normalized = 0.0;
  std::array<double, 4> test_rmse_raw{};  // kp, ki, log10 lxy, log10 lsc
};

namespace detail {

inline MlpModel init_model(int hidden, std::uint64_t seed, const ThetaBounds& bounds) {
  MlpModel m;
  m.hidden = hidden;
  m.bounds = bounds;
  const auto h = static_cast<std::size_t>(hidden);
  m.w1.resize(2 * h);
  m.b1.assign(h, 0.0);
  m.w2.resize(4 * h);
  m.b2.assign(4, 0.0);
  std::mt19937_64 rng(seed);
  const double r1 = std::sqrt(6.0 / (2.0 + hidden));
  const double r2 = std::sqrt(6.0 / (hidden + 4.0));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  std::uniform_real_distribution<double> ub(-1.5, 1.5);
  for (double& w : m.w1) w = u1(rng);
  // Spread-out hidden biases decorrelate the units; with all-zero biases
  // every sigmoid crosses 0.5 at the origin and the output-layer problem is
  // badly conditioned.
  for (double& w : m.b1) w = ub(rng);
  for (double& w : m.w2) w = u2(rng);
  return m;
}

inline void apply_step(MlpModel& m, const Gradient& g, double lr) {
  for (std::size_t i = 0; i < m.w1.size(); ++i) m.w1[i] -= lr * g.w1[i];
  for (std::size_t i = 0; i < m.b1.size(); ++i) m.b1[i] -= lr * g.b1[i];
  for (std::size_t i = 0; i < m.w2.size(); ++i) m.w2[i] -= lr * g.w2[i];
  for (std::size_t i = 0; i < m.b2.size(); ++i) m.b2[i] -= lr * g.b2[i];
}

}  // namespace detail

/// Trains one candidate size with full-batch gradient descent: the step is
/// halved until the training loss decreases, early stopping restores the
/// best-validation weights.
inline std::pair<MlpModel, CandidateReport> train_candidate(
    int hidden, const std::vector<Sample>& train, const std::vector<Sample>& val,
    const TrainConfig& cfg, const MlpModel& prototype) {
  MlpModel m = prototype;
  MlpModel init = detail::init_model(hidden, cfg.seed + static_cast<std::uint64_t>(hidden) * 0x9e3779b97f4a7c15ULL, prototype.bounds);
  m.hidden = hidden;
  m.w1 = std::move(init.w1);
  m.b1 = std::move(init.b1);
  m.w2 = std::move(init.w2);
  m.b2 = std::move(init.b2);

  double lr = cfg.learning_rate;
  double train_loss = loss_only(m, train);

  // Heavy-ball velocity; reset together with the step halving whenever a
  // move would increase the training loss.
  constexpr double kMomentum = 0.9;
  Gradient vel;
  vel.w1.assign(m.w1.size(), 0.0);
  vel.b1.assign(m.b1.size(), 0.0);
  vel.w2.assign(m.w2.size(), 0.0);
  vel.b2.assign(m.b2.size(), 0.0);

  MlpModel best = m;
  double best_val = loss_only(m, val);
  int best_epoch = 0;
  int epoch = 0;

  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto [loss, grad] = loss_and_gradient(m, train);
    train_loss = loss;

    const auto update_velocity = [&](std::vector<double>& v,
                                     const std::vector<double>& g) {
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = kMomentum * v[i] - lr * g[i];
    };
    update_velocity(vel.w1, grad.w1);
    update_velocity(vel.b1, grad.b1);
    update_velocity(vel.w2, grad.w2);
    update_velocity(vel.b2, grad.b2);

    MlpModel cand = m;
    for (std::size_t i = 0; i < cand.w1.size(); ++i) cand.w1[i] += vel.w1[i];
    for (std::size_t i = 0; i < cand.b1.size(); ++i) cand.b1[i] += vel.b1[i];
    for (std::size_t i = 0; i < cand.w2.size(); ++i) cand.w2[i] += vel.w2[i];
    for (std::size_t i = 0; i < cand.b2.size(); ++i) cand.b2[i] += vel.b2[i];
    const double cand_loss = loss_only(cand, train);

    if (cand_loss > train_loss) {
      if (lr > 1e-14) lr *= 0.5;
      std::fill(vel.w1.begin(), vel.w1.end(), 0.0);
      std::fill(vel.b1.begin(), vel.b1.end(), 0.0);
      std::fill(vel.w2.begin(), vel.w2.end(), 0.0);
      std::fill(vel.b2.begin(), vel.b2.end(), 0.0);
    } else {
      m = std::move(cand);
      train_loss = cand_loss;
      lr = std::min(lr * 1.05, cfg.learning_rate * 1000.0);
    }

    const double v = loss_only(m, val);
    if (v < best_val) {
      best_val = v;
      best = m;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  CandidateReport rep;
  rep.hidden = hidden;
  rep.val_loss = best_val;
  rep.best_epoch = best_epoch;
  rep.stopped_epoch = std::min(epoch, cfg.max_epochs);
  return {best, rep};
}

/// Cross-validated training over the candidate hidden sizes. The dataset is
/// shuffled with the configured seed and split train/validation/test;
/// normalization statistics come from the training split. The size with the
/// lowest validation loss wins (ties to the smaller net); the held-out test
/// split is evaluated once at the end, for the report only.
inline std::pair<MlpModel, TrainReport> train(const std::vector<DatasetRecord>& dataset,
                                              const TrainConfig& cfg,
                                              const ThetaBounds& bounds = {}) {
  cfg.validate();
  bounds.validate();
  if (dataset.size() < 10)
    throw TrainingError("dataset too small: need at least 10 records, got " +
                        std::to_string(dataset.size()));

  std::vector<Sample> samples;
  samples.reserve(dataset.size());
  for (const DatasetRecord& r : dataset)
    samples.push_back({{r.omega0, r.omega_ref}, bounds.clip(r.theta)});

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(samples.begin(), samples.end(), rng);

  const std::size_t n = samples.size();
  std::size_t n_test = cfg.test_fraction > 0.0
                           ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.test_fraction * n)))
                           : 0;
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * n)));
  if (n_test + n_val + 2 > n) {
    n_test = std::min(n_test, n / 4);
    n_val = std::max<std::size_t>(1, std::min(n_val, (n - n_test) / 3));
  }
  const std::size_t n_train = n - n_val - n_test;
  if (n_train < 2) throw TrainingError("dataset too small after splitting");

  const std::vector<Sample> train_set(samples.begin(), samples.begin() + n_train);
  const std::vector<Sample> val_set(samples.begin() + n_train,
                                    samples.begin() + n_train + n_val);
  const std::vector<Sample> test_set(samples.begin() + n_train + n_val, samples.end());

  // Normalization from the training split.
  MlpModel proto;
  proto.bounds = bounds;
  {
    std::array<double, 2> xm{}, xs{};
    std::array<double, 4> ym{}, ys{};
    for (const Sample& s : train_set) {
      for (int i = 0; i < 2; ++i) xm[i] += s.x[i];
      const auto t = regression_target(s.theta);
      for (int o = 0; o < 4; ++o) ym[o] += t[o];
    }
    const double inv = 1.0 / static_cast<double>(train_set.size());
    for (int i = 0; i < 2; ++i) xm[i] *= inv;
    for (int o = 0; o < 4; ++o) ym[o] *= inv;
    for (const Sample& s : train_set) {
      for (int i = 0; i < 2; ++i) xs[i] += (s.x[i] - xm[i]) * (s.x[i] - xm[i]);
      const auto t = regression_target(s.theta);
      for (int o = 0; o < 4; ++o) ys[o] += (t[o] - ym[o]) * (t[o] - ym[o]);
    }
    for (int i = 0; i < 2; ++i) xs[i] = std::max(std::sqrt(xs[i] * inv), 1e-9);
    for (int o = 0; o < 4; ++o) ys[o] = std::max(std::sqrt(ys[o] * inv), 1e-9);
    proto.x_mean = xm;
    proto.x_std = xs;
    proto.y_mean = ym;
    proto.y_std = ys;
  }

  TrainReport report;
  report.n_train = n_train;
  report.n_val = n_val;
  report.n_test = n_test;

  MlpModel selected;
  double selected_val = 0.0;
  bool have = false;
  for (int hsz : cfg.hidden_sizes) {
    auto [model, rep] = train_candidate(hsz, train_set, val_set, cfg, proto);
    report.candidates.push_back(rep);
    if (!have || rep.val_loss < selected_val) {
      selected = std::move(model);
      selected_val = rep.val_loss;
      report.selected_hidden = hsz;
      have = true;
    }
  }

  // Final validation phase: report-only held-out evaluation.
  const std::vector<Sample>& holdout = test_set.empty() ? val_set : test_set;
  report.test_rmse_normalized = std::sqrt(2.0 * loss_only(selected, holdout) / 4.0);
  {
    std::array<double, 4> acc{};
    for (const Sample& s : holdout) {
      const std::array<double, 2> xn = {(s.x[0] - selected.x_mean[0]) / selected.x_std[0],
                                        (s.x[1] - selected.x_mean[1]) / selected.x_std[1]};
      const auto yn = selected.forward_normalized(xn);
      const auto t = regression_target(s.theta);
      for (int o = 0; o < 4; ++o) {
        const double raw = yn[o] * selected.y_std[o] + selected.y_mean[o];
        acc[o] += (raw - t[o]) * (raw - t[o]);
      }
    }
    for (int o = 0; o < 4; ++o)
      report.test_rmse_raw[o] = std::sqrt(acc[o] / static_cast<double>(holdout.size()));
  }
  return {selected, report};
}

inline constexpr const char* kModelTag = "pentadrive-mlp v1";

/// Self-describing text serialization; round-trips weights bit-exactly.
inline std::string model_to_text(const MlpModel& m) {
  m.validate();
  std::string out;
  out += kModelTag;
  out += '\n';
  out += "hidden " + std::to_string(m.hidden) + '\n';
  const auto vec_line = [&](const char* name, const double* v, std::size_t n) {
    out += name;
    for (std::size_t i = 0; i < n; ++i) {
      out += ' ';
      out += fmt_double(v[i]);
    }
    out += '\n';
  };
  vec_line("x_mean", m.x_mean.data(), 2);
  vec_line("x_std", m.x_std.data(), 2);
  vec_line("y_mean", m.y_mean.data(), 4);
  vec_line("y_std", m.y_std.data(), 4);
  const double b[8] = {m.bounds.kp_min,  m.bounds.kp_max,  m.bounds.ki_min,
                       m.bounds.ki_max,  m.bounds.lxy_min, m.bounds.lxy_max,
                       m.bounds.lsc_min, m.bounds.lsc_max};
  vec_line("bounds", b, 8);
  vec_line("w1", m.w1.data(), m.w1.size());
  vec_line("b1", m.b1.data(), m.b1.size());
  vec_line("w2", m.w2.data(), m.w2.size());
  vec_line("b2", m.b2.data(), m.b2.size());
  out += "end\n";
  return out;
}

inline void save_model(const MlpModel& m, const std::filesystem::path& path) {
  atomic_write_text(path, model_to_text(m));
}

/// Parses a serialized model. A malformed, truncated or version-mismatched
/// file throws IoError with the offending line; no partial model is returned.
inline MlpModel model_from_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  const auto next_line = [&]() {
    if (!std::getline(in, line))
      throw IoError("truncated model file " + origin + " after line " +
                    std::to_string(lineno));
    ++lineno;
  };

  next_line();
  if (line != kModelTag)
    throw IoError("model version mismatch in " + origin + ": got '" + line +
                  "', expected '" + kModelTag + "'");

  const auto expect_fields = [&](const char* key) {
    next_line();
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key)
      throw IoError("model file " + origin + " line " + std::to_string(lineno) +
                    ": expected '" + key + "', got '" + k + "'");
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok)
      vals.push_back(parse_double(tok, origin + " line " + std::to_string(lineno)));
    return vals;
  };

  MlpModel m;
  {
    const auto v = expect_fields("hidden");
    if (v.size() != 1 || v[0] < 1.0 || v[0] != std::floor(v[0]))
      throw IoError("model file " + origin + ": invalid hidden size");
    m.hidden = static_cast<int>(v[0]);
  }
  const auto fixed = [&](const char* key, std::size_t n) {
    const auto v = expect_fields(key);
    if (v.size() != n)
      throw IoError("model file " + origin + " line " + std::to_string(lineno) +
                    ": '" + key + "' expects " + std::to_string(n) + " values, got " +
                    std::to_string(v.size()));
    return v;
  };
  const auto h = static_cast<std::size_t>(m.hidden);
  {
    const auto v = fixed("x_mean", 2);
    std::copy(v.begin(), v.end(), m.x_mean.begin());
  }
  {
    const auto v = fixed("x_std", 2);
    std::copy(v.begin(), v.end(), m.x_std.begin());
  }
  {
    const auto v = fixed("y_mean", 4);
    std::copy(v.begin(), v.end(), m.y_mean.begin());
  }
  {
    const auto v = fixed("y_std", 4);
    std::copy(v.begin(), v.end(), m.y_std.begin());
  }
  {
    const auto v = fixed("bounds", 8);
    m.bounds.kp_min = v[0];
    m.bounds.kp_max = v[1];
    m.bounds.ki_min = v[2];
    m.bounds.ki_max = v[3];
    m.bounds.lxy_min = v[4];
    m.bounds.lxy_max = v[5];
    m.bounds.lsc_min = v[6];
    m.bounds.lsc_max = v[7];
  }
  m.w1 = fixed("w1", 2 * h);
  m.b1 = fixed("b1", h);
  m.w2 = fixed("w2", 4 * h);
  m.b2 = fixed("b2", 4);
  next_line();
  if (line != "end")
    throw IoError("model file " + origin + ": missing 'end' sentinel");
  m.validate();
  m.bounds.validate();
  return m;
}

inline MlpModel load_model(const std::filesystem::path& path) {
  return model_from_text(read_text(path), path.string());
}

/// Wraps a trained model for in-loop use: consecutive parameter updates are
/// rate limited so one call can move each component by at most
/// rate_fraction of its bound range (log10 range for the weighting factors).
/// rate_fraction <= 0 disables the limiter.
class OnlineTuner {
 public:
  explicit OnlineTuner(MlpModel model, double rate_fraction = 0.1)
      : model_(std::move(model)), rate_(rate_fraction) {
    model_.validate();
  }

  ControllerParams update(double omega, double omega_ref) {
    const ControllerParams target = model_.forward(omega, omega_ref);
    if (!primed_ || rate_ <= 0.0) {
      last_ = target;
      primed_ = true;
      return last_;
    }
    const ThetaBounds& b = model_.bounds;
    last_.kp = limited_lin(last_.kp, target.kp, b.kp_min, b.kp_max);
    last_.ki = limited_lin(last_.ki, target.ki, b.ki_min, b.ki_max);
    last_.lambda_xy = limited_log(last_.lambda_xy, target.lambda_xy, b.lxy_min, b.lxy_max);
    last_.lambda_sc = limited_log(last_.lambda_sc, target.lambda_sc, b.lsc_min, b.lsc_max);
    return last_;
  }

  const ControllerParams& current() const { return last_; }
  const MlpModel& model() const { return model_; }

 private:
  double limited_lin(double from, double to, double lo, double hi) const {
    const double cap = rate_ * (hi - lo);
    return from + std::clamp(to - from, -cap, cap);
  }
  double limited_log(double from, double to, double lo, double hi) const {
    const double cap = rate_ * (std::log10(hi) - std::log10(lo));
    const double step = std::clamp(std::log10(to) - std::log10(from), -cap, cap);
    return std::pow(10.0, std::log10(from) + step);
  }

  MlpModel model_;
  double rate_;
  bool primed_ = false;
  ControllerParams last_{};
};

}  // namespace pentadrive
