#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pentadrive/transforms.hpp"

using namespace pentadrive;

namespace {

// Literal leg-to-phase matrix, kept independent of phase_voltages().
Vec5 reference_phase_voltages(const SwitchState& u, double vdc) {
  const double c = vdc / 5.0;
  Vec5 v{};
  for (int i = 0; i < 5; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 5; ++j) acc += ((i == j) ? 4.0 * c : -c) * u.u[j];
    v[i] = acc;
  }
  return v;
}

}  // namespace

TEST_CASE("switch state enumeration is binary counting, leg 1 least significant") {
  const auto all = enumerate_switch_states();
  REQUIRE(all.size() == 32);
  CHECK(all[0].u == std::array<std::uint8_t, 5>{0, 0, 0, 0, 0});
  CHECK(all[31].u == std::array<std::uint8_t, 5>{1, 1, 1, 1, 1});
  CHECK(all[1].u == std::array<std::uint8_t, 5>{1, 0, 0, 0, 0});
  CHECK(all[16].u == std::array<std::uint8_t, 5>{0, 0, 0, 0, 1});
  for (int k = 0; k < 32; ++k) CHECK(all[k].index() == k);
}

TEST_CASE("phase voltages match the hand-multiplied matrix") {
  const double vdc = 300.0;

  SECTION("single leg on") {
    const auto v = phase_voltages(SwitchState::from_index(1), vdc).v;
    CHECK(v[0] == Catch::Approx(240.0).margin(1e-12));
    for (int i = 1; i < 5; ++i) CHECK(v[i] == Catch::Approx(-60.0).margin(1e-12));
  }

  SECTION("null states produce exactly zero") {
    for (int idx : {0, 31}) {
      const auto v = phase_voltages(SwitchState::from_index(idx), vdc).v;
      for (int i = 0; i < 5; ++i) CHECK(v[i] == 0.0);
    }
  }

  SECTION("all 32 states agree with the reference matrix and sum to zero") {
    for (const auto& u : enumerate_switch_states()) {
      const auto v = phase_voltages(u, vdc).v;
      const auto ref = reference_phase_voltages(u, vdc);
      double sum = 0.0;
      for (int i = 0; i < 5; ++i) {
        CHECK(v[i] == Catch::Approx(ref[i]).margin(1e-9));
        sum += v[i];
      }
      CHECK(sum == 0.0);  // exact with vdc = 300
    }
  }

  SECTION("matrix row sums are zero") {
    const Mat55 t = phase_voltage_matrix(vdc);
    for (int r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (int c = 0; c < 5; ++c) sum += t[r][c];
      CHECK(sum == 0.0);
    }
  }

  SECTION("arbitrary vdc still sums to nearly zero") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> vd(10.0, 700.0);
    for (int rep = 0; rep < 50; ++rep) {
      const double vdc_r = vd(rng);
      const auto u = SwitchState::from_index(rep % 32);
      const auto v = phase_voltages(u, vdc_r).v;
      double sum = 0.0;
      for (double c : v) sum += c;
      CHECK(std::abs(sum) < 1e-12 * vdc_r);
    }
  }
}

TEST_CASE("clarke rows carry the expected harmonics") {
  SECTION("constant vector maps to pure zero sequence") {
    const double c = 3.7;
    const auto r = clarke({c, c, c, c, c});
    CHECK(std::abs(r.alpha) < 1e-12);
    CHECK(std::abs(r.beta) < 1e-12);
    CHECK(std::abs(r.x) < 1e-12);
    CHECK(std::abs(r.y) < 1e-12);
    CHECK(r.z == Catch::Approx(c).margin(1e-12));
  }

  SECTION("first harmonic lands on alpha") {
    Vec5 v;
    for (int k = 0; k < 5; ++k) v[k] = std::cos(k * kPhaseStep);
    const auto r = clarke(v);
    CHECK(r.alpha == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(r.beta) < 1e-12);
    CHECK(std::abs(r.x) < 1e-12);
    CHECK(std::abs(r.y) < 1e-12);
  }

  SECTION("second harmonic lands on x") {
    Vec5 v;
    for (int k = 0; k < 5; ++k) v[k] = std::cos(2.0 * k * kPhaseStep);
    const auto r = clarke(v);
    CHECK(std::abs(r.alpha) < 1e-12);
    CHECK(std::abs(r.beta) < 1e-12);
    CHECK(r.x == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(r.y) < 1e-12);
  }

  SECTION("third harmonic also lands on x (folded alias)") {
    // cos(3k step) has the same samples as cos(2k step) on five phases.
    Vec5 v;
    for (int k = 0; k < 5; ++k) v[k] = std::cos(3.0 * k * kPhaseStep);
    const auto r = clarke(v);
    CHECK(r.x == Catch::Approx(1.0).margin(1e-12));
    CHECK(r.y == Catch::Approx(-0.0).margin(1e-12));
  }
}

TEST_CASE("clarke is linear") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    Vec5 v, w;
    for (int i = 0; i < 5; ++i) {
      v[i] = d(rng);
      w[i] = d(rng);
    }
    const double a = d(rng), b = d(rng);
    Vec5 mix;
    for (int i = 0; i < 5; ++i) mix[i] = a * v[i] + b * w[i];
    const auto rm = clarke(mix);
    const auto rv = clarke(v);
    const auto rw = clarke(w);
    CHECK(rm.alpha == Catch::Approx(a * rv.alpha + b * rw.alpha).margin(1e-12));
    CHECK(rm.beta == Catch::Approx(a * rv.beta + b * rw.beta).margin(1e-12));
    CHECK(rm.x == Catch::Approx(a * rv.x + b * rw.x).margin(1e-12));
    CHECK(rm.y == Catch::Approx(a * rv.y + b * rw.y).margin(1e-12));
    CHECK(rm.z == Catch::Approx(a * rv.z + b * rw.z).margin(1e-12));
  }
}

TEST_CASE("harmonic rows of the decomposition matrix are pairwise orthogonal") {
  const Mat55 m = clarke_matrix();
  for (int r1 = 0; r1 < 4; ++r1) {
    for (int r2 = r1 + 1; r2 < 4; ++r2) {
      double dot = 0.0;
      for (int c = 0; c < 5; ++c) dot += m[r1][c] * m[r2][c];
      INFO("rows " << r1 << " and " << r2);
      CHECK(std::abs(dot) < 1e-12);
    }
  }
}

TEST_CASE("park rotation") {
  SECTION("identity at zero angle") {
    const auto dq = park(AlphaBetaXY{1.0, 0.0, 0.0, 0.0, 0.0}, 0.0);
    CHECK(dq.d == Catch::Approx(1.0).margin(1e-15));
    CHECK(std::abs(dq.q) < 1e-15);
  }

  SECTION("quarter turn maps alpha onto -q") {
    const auto dq = park(AlphaBetaXY{1.0, 0.0, 0.0, 0.0, 0.0},
                         std::numbers::pi / 2.0);
    CHECK(std::abs(dq.d) < 1e-12);
    CHECK(dq.q == Catch::Approx(-1.0).margin(1e-12));
  }

  std::mt19937 rng(13);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  std::uniform_real_distribution<double> ang(-20.0, 20.0);

  SECTION("norm is preserved") {
    for (int rep = 0; rep < 200; ++rep) {
      const AlphaBetaXY ab{d(rng), d(rng), d(rng), d(rng), 0.0};
      const double sigma = ang(rng);
      const auto dq = park(ab, sigma);
      const double n_in = ab.alpha * ab.alpha + ab.beta * ab.beta;
      const double n_out = dq.d * dq.d + dq.q * dq.q;
      CHECK(n_out == Catch::Approx(n_in).epsilon(1e-12));
      CHECK(dq.x == ab.x);
      CHECK(dq.y == ab.y);
    }
  }

  SECTION("inverse park round-trips") {
    for (int rep = 0; rep < 200; ++rep) {
      const DqFrame dq{d(rng), d(rng), d(rng), d(rng)};
      const double sigma = ang(rng);
      const auto back = park(inverse_park(dq, sigma), sigma);
      CHECK(back.d == Catch::Approx(dq.d).margin(1e-12));
      CHECK(back.q == Catch::Approx(dq.q).margin(1e-12));
    }
  }

  SECTION("rotating by sigma then -sigma is the identity") {
    for (int rep = 0; rep < 100; ++rep) {
      const AlphaBetaXY ab{d(rng), d(rng), 0.0, 0.0, 0.0};
      const double sigma = ang(rng);
      const auto once = park(ab, sigma);
      const auto back = park(AlphaBetaXY{once.d, once.q, 0.0, 0.0, 0.0}, -sigma);
      CHECK(back.d == Catch::Approx(ab.alpha).margin(1e-12));
      CHECK(back.q == Catch::Approx(ab.beta).margin(1e-12));
    }
  }
}

TEST_CASE("projected voltage plane has exactly two null vectors") {
  int zero_count = 0, nonzero_count = 0;
  for (const auto& u : enumerate_switch_states()) {
    const auto ab = clarke(phase_voltages(u, 300.0).v);
    const double mag = std::hypot(ab.alpha, ab.beta);
    if (mag < 1e-9)
      ++zero_count;
    else
      ++nonzero_count;
  }
  CHECK(zero_count == 2);
  CHECK(nonzero_count == 30);
}

TEST_CASE("angle wrap lands in [0, 2*pi)") {
  CHECK(wrap_two_pi(0.0) == 0.0);
  CHECK(wrap_two_pi(2.0 * std::numbers::pi) == 0.0);
  CHECK(wrap_two_pi(-1e-9) >= 0.0);
  CHECK(wrap_two_pi(-1e-9) < 2.0 * std::numbers::pi);
  CHECK(wrap_two_pi(7.0) == Catch::Approx(7.0 - 2.0 * std::numbers::pi));
}
