#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "pentadrive/ann.hpp"

using namespace pentadrive;

namespace {

MlpModel random_model(int hidden, std::uint64_t seed) {
  MlpModel m;
  m.hidden = hidden;
  const auto h = static_cast<std::size_t>(hidden);
  m.w1.resize(2 * h);
  m.b1.resize(h);
  m.w2.resize(4 * h);
  m.b2.resize(4);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.8, 0.8);
  for (double& w : m.w1) w = d(rng);
  for (double& w : m.b1) w = d(rng);
  for (double& w : m.w2) w = d(rng);
  for (double& w : m.b2) w = d(rng);
  m.x_mean = {60.0, 75.0};
  m.x_std = {40.0, 45.0};
  m.y_mean = {0.5, 3.0, -1.0, -2.0};
  m.y_std = {0.2, 1.5, 0.4, 0.3};
  return m;
}

std::vector<Sample> random_batch(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> spd(0.0, 150.0);
  std::uniform_real_distribution<double> gain(0.05, 5.0);
  std::uniform_real_distribution<double> lam(-2.5, 0.5);
  std::vector<Sample> batch(n);
  for (Sample& s : batch) {
    s.x = {spd(rng), spd(rng)};
    s.theta.kp = gain(rng);
    s.theta.ki = gain(rng) * 5.0;
    s.theta.lambda_xy = std::pow(10.0, lam(rng));
    s.theta.lambda_sc = std::pow(10.0, lam(rng) - 0.5);
  }
  return batch;
}

}  // namespace

TEST_CASE("backpropagation matches central finite differences") {
  for (const int hidden : {2, 8}) {
    for (const std::uint64_t seed : {11ULL, 22ULL, 33ULL, 44ULL, 55ULL}) {
      MlpModel m = random_model(hidden, seed);
      const auto batch = random_batch(8, seed * 131);
      const auto [loss, grad] = loss_and_gradient(m, batch);
      REQUIRE(loss > 0.0);

      const double h = 1e-5;
      const auto check_block = [&](std::vector<double> MlpModel::* member,
                                   const std::vector<double>& g_analytic) {
        for (std::size_t i = 0; i < (m.*member).size(); ++i) {
          MlpModel plus = m, minus = m;
          (plus.*member)[i] += h;
          (minus.*member)[i] -= h;
          const double fd =
              (loss_only(plus, batch) - loss_only(minus, batch)) / (2.0 * h);
          const double denom =
              std::max({std::abs(g_analytic[i]), std::abs(fd), 1e-8});
          INFO("hidden=" << hidden << " seed=" << seed << " index=" << i);
          REQUIRE(std::abs(g_analytic[i] - fd) / denom < 1e-6);
        }
      };
      check_block(&MlpModel::w1, grad.w1);
      check_block(&MlpModel::b1, grad.b1);
      check_block(&MlpModel::w2, grad.w2);
      check_block(&MlpModel::b2, grad.b2);
    }
  }
}

TEST_CASE("zero weights reduce the forward pass to the denormalized biases") {
  MlpModel m = random_model(4, 99);
  std::fill(m.w1.begin(), m.w1.end(), 0.0);
  std::fill(m.b1.begin(), m.b1.end(), 0.0);
  std::fill(m.w2.begin(), m.w2.end(), 0.0);
  m.b2 = {0.5, 0.4, 0.3, 0.2};

  const ControllerParams out = m.forward(80.0, 120.0);
  CHECK(out.kp == Catch::Approx(0.5 * m.y_std[0] + m.y_mean[0]));
  CHECK(out.ki == Catch::Approx(0.4 * m.y_std[1] + m.y_mean[1]));
  CHECK(out.lambda_xy ==
        Catch::Approx(std::pow(10.0, 0.3 * m.y_std[2] + m.y_mean[2])));
  CHECK(out.lambda_sc ==
        Catch::Approx(std::pow(10.0, 0.2 * m.y_std[3] + m.y_mean[3])));
}

TEST_CASE("forward outputs always respect the tuning bounds") {
  MlpModel m = random_model(8, 7);
  for (double& w : m.w2) w *= 20.0;  // force wild raw outputs
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> spd(-50.0, 400.0);
  const ThetaBounds& b = m.bounds;
  for (int rep = 0; rep < 10000; ++rep) {
    const ControllerParams t = m.forward(spd(rng), spd(rng));
    REQUIRE(t.kp >= b.kp_min);
    REQUIRE(t.kp <= b.kp_max);
    REQUIRE(t.ki >= b.ki_min);
    REQUIRE(t.ki <= b.ki_max);
    REQUIRE(t.lambda_xy >= b.lxy_min);
    REQUIRE(t.lambda_xy <= b.lxy_max);
    REQUIRE(t.lambda_sc >= b.lsc_min);
    REQUIRE(t.lambda_sc <= b.lsc_max);
  }
}

TEST_CASE("perfect fit gives zero loss and zero gradient") {
  MlpModel m = random_model(4, 5);
  // Targets generated by the model itself (inside the bounds, so the
  // round-trip through ControllerParams is lossless).
  std::vector<Sample> batch;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> spd(0.0, 150.0);
  for (int i = 0; i < 10; ++i) {
    Sample s;
    s.x = {spd(rng), spd(rng)};
    s.theta = m.forward(s.x[0], s.x[1]);
    const auto t = regression_target(s.theta);
    const std::array<double, 2> xn = {(s.x[0] - m.x_mean[0]) / m.x_std[0],
                                      (s.x[1] - m.x_mean[1]) / m.x_std[1]};
    const auto yn = m.forward_normalized(xn);
    bool clipped = false;
    for (int o = 0; o < 4; ++o) {
      const double raw = yn[o] * m.y_std[o] + m.y_mean[o];
      if (std::abs(raw - t[o]) > 1e-12) clipped = true;
    }
    if (!clipped) batch.push_back(s);
  }
  REQUIRE(batch.size() >= 3);

  const auto [loss, grad] = loss_and_gradient(m, batch);
  CHECK(loss < 1e-20);
  for (double g : grad.w1) CHECK(std::abs(g) < 1e-12);
  for (double g : grad.w2) CHECK(std::abs(g) < 1e-12);
  for (double g : grad.b1) CHECK(std::abs(g) < 1e-12);
  for (double g : grad.b2) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("duplicating every sample leaves loss and gradient unchanged") {
  const MlpModel m = random_model(4, 400);
  const auto batch = random_batch(12, 401);
  std::vector<Sample> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());

  const auto [l1, g1] = loss_and_gradient(m, batch);
  const auto [l2, g2] = loss_and_gradient(m, doubled);
  CHECK(l1 == Catch::Approx(l2).epsilon(1e-14));
  for (std::size_t i = 0; i < g1.w1.size(); ++i)
    CHECK(g1.w1[i] == Catch::Approx(g2.w1[i]).margin(1e-14));
  for (std::size_t i = 0; i < g1.w2.size(); ++i)
    CHECK(g1.w2[i] == Catch::Approx(g2.w2[i]).margin(1e-14));
}

namespace {

std::vector<DatasetRecord> affine_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> spd(0.0, 150.0);
  std::vector<DatasetRecord> records(n);
  for (DatasetRecord& r : records) {
    r.omega0 = spd(rng);
    r.omega_ref = spd(rng);
    r.theta.kp = 0.3 + 0.002 * r.omega0 + 0.001 * r.omega_ref;
    r.theta.ki = 2.0 + 0.02 * r.omega0 + 0.01 * r.omega_ref;
    r.theta.lambda_xy = std::pow(10.0, -1.0 + 0.003 * r.omega0 - 0.002 * r.omega_ref);
    r.theta.lambda_sc = std::pow(10.0, -2.0 + 0.004 * r.omega_ref);
  }
  return records;
}

}  // namespace

TEST_CASE("training recovers a noiseless affine target") {
  const auto dataset = affine_dataset(200, 77);
  TrainConfig cfg;
  cfg.hidden_sizes = {2, 4, 8};
  cfg.max_epochs = 20000;
  cfg.patience = 2000;
  cfg.seed = 3;

  const auto [model, report] = train(dataset, cfg);

  SECTION("held-out error is far below the output spread") {
    // Per-component RMSE against the generating map on fresh points.
    const auto holdout = affine_dataset(300, 991);
    std::array<double, 4> acc{}, var{};
    std::array<double, 4> mean{};
    for (const auto& r : holdout) {
      const auto t = regression_target(r.theta);
      for (int o = 0; o < 4; ++o) mean[o] += t[o] / holdout.size();
    }
    for (const auto& r : holdout) {
      const ControllerParams pred = model.forward(r.omega0, r.omega_ref);
      const auto t = regression_target(r.theta);
      const auto y = regression_target(pred);
      for (int o = 0; o < 4; ++o) {
        acc[o] += (y[o] - t[o]) * (y[o] - t[o]) / holdout.size();
        var[o] += (t[o] - mean[o]) * (t[o] - mean[o]) / holdout.size();
      }
    }
    for (int o = 0; o < 4; ++o) {
      INFO("component " << o << " rmse=" << std::sqrt(acc[o])
                        << " std=" << std::sqrt(var[o]));
      CHECK(std::sqrt(acc[o]) < 0.01 * std::sqrt(var[o]) + 1e-6);
    }
  }

  SECTION("early stopping respected the patience budget") {
    for (const CandidateReport& c : report.candidates)
      CHECK(c.stopped_epoch - c.best_epoch <= cfg.patience);
  }

  SECTION("report carries one entry per candidate size") {
    REQUIRE(report.candidates.size() == cfg.hidden_sizes.size());
    CHECK(report.n_train + report.n_val + report.n_test == dataset.size());
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto dataset = affine_dataset(60, 15);
  TrainConfig cfg;
  cfg.hidden_sizes = {2, 4};
  cfg.max_epochs = 600;
  cfg.patience = 100;
  cfg.seed = 9;

  const auto [m1, r1] = train(dataset, cfg);
  const auto [m2, r2] = train(dataset, cfg);
  CHECK(r1.selected_hidden == r2.selected_hidden);
  REQUIRE(m1.w1.size() == m2.w1.size());
  for (std::size_t i = 0; i < m1.w1.size(); ++i) REQUIRE(m1.w1[i] == m2.w1[i]);
  for (std::size_t i = 0; i < m1.w2.size(); ++i) REQUIRE(m1.w2[i] == m2.w2[i]);
  for (std::size_t i = 0; i < m1.b1.size(); ++i) REQUIRE(m1.b1[i] == m2.b1[i]);
  for (int i = 0; i < 4; ++i) REQUIRE(m1.b2[i] == m2.b2[i]);
}

TEST_CASE("training refuses undersized datasets") {
  const auto dataset = affine_dataset(9, 1);
  CHECK_THROWS_AS(train(dataset, TrainConfig{}), TrainingError);
}

TEST_CASE("model serialization") {
  const MlpModel m = random_model(8, 4242);
  const auto dir = std::filesystem::temp_directory_path() / "pentadrive_ann_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.txt";
  save_model(m, path);

  SECTION("round-trip is bit-exact on the forward pass") {
    const MlpModel back = load_model(path);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> spd(0.0, 150.0);
    for (int rep = 0; rep < 100; ++rep) {
      const double w0 = spd(rng), wr = spd(rng);
      const ControllerParams a = m.forward(w0, wr);
      const ControllerParams b = back.forward(w0, wr);
      REQUIRE(a.kp == b.kp);
      REQUIRE(a.ki == b.ki);
      REQUIRE(a.lambda_xy == b.lambda_xy);
      REQUIRE(a.lambda_sc == b.lambda_sc);
    }
  }

  SECTION("truncated file is an error, not a partial model") {
    const std::string full = read_text(path);
    for (const double frac : {0.2, 0.6, 0.95}) {
      const std::string cut = full.substr(0, static_cast<std::size_t>(full.size() * frac));
      atomic_write_text(dir / "cut.txt", cut);
      CHECK_THROWS_AS(load_model(dir / "cut.txt"), IoError);
    }
  }

  SECTION("version mismatch is a distinct, explicit error") {
    std::string text = read_text(path);
    text.replace(text.find("v1"), 2, "v9");
    atomic_write_text(dir / "vers.txt", text);
    try {
      load_model(dir / "vers.txt");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("online tuner rate limiting") {
  MlpModel m = random_model(4, 31);

  SECTION("repeated identical inputs converge to the raw forward value") {
    OnlineTuner online(m, 0.1);
    const ControllerParams target = m.forward(50.0, 100.0);
    ControllerParams cur;
    for (int k = 0; k < 60; ++k) cur = online.update(50.0, 100.0);
    CHECK(cur.kp == Catch::Approx(target.kp).margin(1e-9));
    CHECK(cur.ki == Catch::Approx(target.ki).margin(1e-9));
    CHECK(cur.lambda_xy == Catch::Approx(target.lambda_xy).epsilon(1e-9));
    CHECK(cur.lambda_sc == Catch::Approx(target.lambda_sc).epsilon(1e-9));
  }

  SECTION("one call moves each component at most 10% of its range") {
    OnlineTuner online(m, 0.1);
    const ControllerParams first = online.update(10.0, 20.0);  // primes the state
    const ControllerParams second = online.update(140.0, 10.0);
    const ThetaBounds& b = m.bounds;
    CHECK(std::abs(second.kp - first.kp) <= 0.1 * (b.kp_max - b.kp_min) + 1e-12);
    CHECK(std::abs(second.ki - first.ki) <= 0.1 * (b.ki_max - b.ki_min) + 1e-12);
    CHECK(std::abs(std::log10(second.lambda_xy) - std::log10(first.lambda_xy)) <=
          0.1 * (std::log10(b.lxy_max) - std::log10(b.lxy_min)) + 1e-12);
    CHECK(std::abs(std::log10(second.lambda_sc) - std::log10(first.lambda_sc)) <=
          0.1 * (std::log10(b.lsc_max) - std::log10(b.lsc_min)) + 1e-12);
  }

  SECTION("disabled limiter passes the forward value through") {
    OnlineTuner online(m, 0.0);
    online.update(10.0, 20.0);
    const ControllerParams out = online.update(140.0, 10.0);
    const ControllerParams want = m.forward(140.0, 10.0);
    CHECK(out.kp == want.kp);
    CHECK(out.lambda_sc == want.lambda_sc);
  }
}
