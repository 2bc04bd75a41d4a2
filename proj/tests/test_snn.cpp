#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lanekeep/errors.hpp"
#include "lanekeep/snn.hpp"

using namespace lanekeep;

namespace {

// Alpha-synapse LIF membrane, integrated with classical RK4 (all relative to E_L).
struct Ode {
  double di, i, v;
};

Ode rk4(Ode y, const LifParams& p, double t, double h) {
  auto f = [&](const Ode& s) {
    return Ode{-s.di / p.tau_syn, s.di - s.i / p.tau_syn, -s.v / p.tau_m + (s.i + p.i_e) / p.c_m};
  };
  const int n = static_cast<int>(std::lround(t / h));
  for (int k = 0; k < n; ++k) {
    const Ode k1 = f(y);
    const Ode k2 = f({y.di + 0.5 * h * k1.di, y.i + 0.5 * h * k1.i, y.v + 0.5 * h * k1.v});
    const Ode k3 = f({y.di + 0.5 * h * k2.di, y.i + 0.5 * h * k2.i, y.v + 0.5 * h * k2.v});
    const Ode k4 = f({y.di + h * k3.di, y.i + h * k3.i, y.v + h * k3.v});
    y.di += h / 6.0 * (k1.di + 2 * k2.di + 2 * k3.di + k4.di);
    y.i += h / 6.0 * (k1.i + 2 * k2.i + 2 * k3.i + k4.i);
    y.v += h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  }
  return y;
}

}  // namespace

TEST_CASE("Poisson source") {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) CHECK_FALSE(poisson_step(0.0, 1e-4, rng));
  for (int k = 0; k < 1000; ++k) CHECK(poisson_step(1000.0, 1e-3, rng));
  CHECK_THROWS_AS(poisson_step(2000.0, 1e-3, rng), ConfigError);
  CHECK_THROWS_AS(poisson_step(-1.0, 1e-3, rng), ConfigError);

  const int n = 1000000;
  const double p = 300.0 * 1e-4;
  long hits = 0;
  for (int k = 0; k < n; ++k) hits += poisson_step(300.0, 1e-4, rng);
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(hits - n * p) < 3.0 * sigma);
  // 300 Hz over 50 ms of 0.1 ms ticks averages 15 spikes.
  CHECK(p * 500 == doctest::Approx(15.0));
}

TEST_CASE("IF neuron examples") {
  IfNeuron a{0.6, 1.0};
  CHECK(if_step(a, 0.5));
  CHECK(a.v == 0.0);
  IfNeuron b{0.6, 1.0};
  CHECK_FALSE(if_step(b, -1.0));
  CHECK(b.v == 0.0);

  IfNeuron c{0.0, 1.0};
  std::vector<int> spikes;
  for (int t = 1; t <= 100; ++t) {
    if (if_step(c, 0.25)) spikes.push_back(t);
  }
  REQUIRE(spikes.size() == 25u);
  for (std::size_t k = 0; k < spikes.size(); ++k) CHECK(spikes[k] == 4 * static_cast<int>(k + 1));
}

TEST_CASE("IF rate code counts floor of accumulated input") {
  for (double u : {0.125, 0.25, 0.5, 1.0}) {
    IfNeuron n{0.0, 1.0};
    int count = 0;
    for (int t = 0; t < 1000; ++t) count += if_step(n, u);
    CHECK(count == static_cast<int>(std::floor(1000 * u)));
  }
  // Reset to zero drops the overshoot, so other inputs never exceed the floor.
  for (double u : {0.1, 0.3, 0.37, 0.9}) {
    IfNeuron n{0.0, 1.0};
    int count = 0;
    for (int t = 0; t < 1000; ++t) count += if_step(n, u);
    CHECK(count <= static_cast<int>(std::floor(1000 * u)));
    CHECK(count > 0);
  }
}

TEST_CASE("IF network counts do not depend on input order") {
  Rng rng(2);
  std::uniform_int_distribution<int> q(-8, 8);
  Eigen::MatrixXd w1(6, 9), w2(3, 6);
  for (Eigen::Index r = 0; r < w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w1.cols(); ++c) w1(r, c) = q(rng) / 16.0;
  for (Eigen::Index r = 0; r < w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w2.cols(); ++c) w2(r, c) = q(rng) / 16.0;
  const std::vector<double> x(8, 1.0);  // p = 1: every input spikes every tick
  IfNetwork a({w1, w2}, {});
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd w1p = w1;
  for (int k = 0; k < 8; ++k) w1p.col(k) = w1.col(perm[static_cast<std::size_t>(k)]);
  IfNetwork b({w1p, w2}, {});
  Rng r1(5), r2(99);
  CHECK(a.run_window(x, 50, r1) == b.run_window(x, 50, r2));
}

TEST_CASE("IF network validates shapes") {
  CHECK_THROWS_AS(IfNetwork({Eigen::MatrixXd(3, 4), Eigen::MatrixXd(2, 4)}, {}), ContractError);
  CHECK_THROWS_AS(IfNetwork({Eigen::MatrixXd::Zero(3, 4)}, {2.0, 1000.0, 1.0}), ConfigError);
  IfNetwork net({Eigen::MatrixXd::Zero(3, 4)}, {});
  Rng rng(1);
  CHECK_THROWS_AS(net.run_window(std::vector<double>(4, 0.0), 1, rng), ContractError);
}

TEST_CASE("LIF free decay matches the exponential") {
  const LifParams p;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  n.set_membrane_mv(p, -60.0);
  double worst = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    lif_step(n, p, prop, 0.0);
    const double exact = -70.0 + 10.0 * std::exp(-k * 0.1 / p.tau_m);
    worst = std::max(worst, std::abs(n.membrane_mv(p) - exact));
    if (k == 100) CHECK(n.membrane_mv(p) == doctest::Approx(-66.321).epsilon(1e-5));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("LIF subthreshold response matches an RK4 reference") {
  LifParams p;
  p.i_e = 20.0;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  lif_step(n, p, prop, 300.0);  // kick lands at the end of the first step
  Ode y{n.di, n.i, n.v};
  for (int k = 1; k <= 200; ++k) {
    lif_step(n, p, prop, 0.0);
    y = rk4(y, p, 0.1, 1e-4);
    CHECK(n.v == doctest::Approx(y.v).epsilon(1e-8));
    CHECK(n.i == doctest::Approx(y.i).epsilon(1e-8));
  }
}

TEST_CASE("alpha kernel") {
  CHECK(alpha_current(7.0, 2.0, 2.0) == doctest::Approx(7.0));
  CHECK(alpha_current(7.0, 0.0, 2.0) == 0.0);
  CHECK(alpha_current(7.0, -1.0, 2.0) == 0.0);

  // The exact propagators reproduce the superposition of two shifted kernels.
  const LifParams p;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  n.set_membrane_mv(p, -200.0);  // far from threshold
  for (int k = 0; k < 400; ++k) {
    const double w = (k == 0 || k == 37) ? 50.0 : 0.0;
    lif_step(n, p, prop, w);
    const double t = k * 0.1;
    const double expect = alpha_current(50.0, t, p.tau_syn) + alpha_current(50.0, t - 3.7, p.tau_syn);
    CHECK(n.i == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("refractory period after a kick") {
  const LifParams p;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  n.set_membrane_mv(p, -55.01);
  std::vector<int> spikes;
  for (int k = 0; k < 25; ++k) {
    if (lif_step(n, p, prop, 1e5)) spikes.push_back(k);
  }
  REQUIRE(!spikes.empty());
  for (std::size_t k = 1; k < spikes.size(); ++k) CHECK(spikes[k] - spikes[k - 1] >= 20);
  CHECK(std::count_if(spikes.begin(), spikes.end(), [&](int t) { return t - spikes[0] < 20; }) == 1);
}

TEST_CASE("minimum inter-spike interval under strong random drive") {
  const LifParams p;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 5000.0);
  long last = -1000000;
  long min_isi = 1 << 30;
  long count = 0;
  for (long k = 0; k < 1000000; ++k) {
    if (lif_step(n, p, prop, u(rng))) {
      min_isi = std::min(min_isi, k - last);
      last = k;
      ++count;
    }
  }
  CHECK(count > 1000);
  CHECK(min_isi * 0.1 >= 2.0 - 1e-12);
}

TEST_CASE("steady subthreshold current never fires") {
  LifParams p;
  p.i_e = 0.9 * (p.v_th - p.e_l) * p.c_m / p.tau_m;
  const auto prop = LifPropagators::make(p, 0.1);
  LifNeuron n;
  for (int k = 0; k < 100000; ++k) CHECK_FALSE(lif_step(n, p, prop, 0.0));
  CHECK(n.v == doctest::Approx(p.tau_m / p.c_m * p.i_e).epsilon(1e-9));
}

TEST_CASE("LIF network") {
  LifNetwork::Params params;
  Rng rng(4);
  LifNetwork quiet(32, 2, 200.0, params);
  const auto r0 = quiet.run_window(std::vector<double>(32, 0.0), 50.0, rng);
  CHECK(r0.counts == std::vector<int>{0, 0});

  LifNetwork loud(32, 2, 3000.0, params);
  for (int w = 0; w < 20; ++w) {
    const auto r = loud.run_window(std::vector<double>(32, 300.0), 50.0, rng);
    for (int c : r.counts) CHECK(c <= 25);
  }

  LifNetwork a(32, 2, 800.0, params), b(32, 2, 800.0, params);
  Rng ra(9), rb(9);
  const std::vector<double> rates(32, 200.0);
  for (int w = 0; w < 5; ++w) {
    const auto x = a.run_window(rates, 50.0, ra);
    const auto y = b.run_window(rates, 50.0, rb);
    CHECK(x.trains.output == y.trains.output);
    CHECK(x.trains.input == y.trains.input);
  }

  CHECK_THROWS_AS(a.run_window(rates, 0.05, ra), ConfigError);
  CHECK_THROWS_AS(a.run_window(std::vector<double>(3, 0.0), 50.0, ra), ContractError);
}

TEST_CASE("LIF network input reaches the membrane one tick later") {
  LifNetwork::Params params;
  LifNetwork net(1, 1, 500.0, params);
  Rng rng(1);
  const std::vector<double> rate{10000.0};  // p = 1 at 0.1 ms
  net.run_window(rate, 0.1, rng);
  CHECK(net.neurons()[0].di == 0.0);
  const std::vector<double> none{0.0};
  net.run_window(none, 0.1, rng);
  CHECK(net.neurons()[0].di == doctest::Approx(500.0 * std::exp(1.0) / 2.0));
}

TEST_CASE("snapshots resume bit-identically") {
  LifNetwork::Params params;
  LifNetwork a(8, 2, 900.0, params);
  Rng ra(11);
  const std::vector<double> rates(8, 250.0);
  a.run_window(rates, 20.0, ra);
  auto b = LifNetwork::from_snapshot(a.snapshot());
  Rng rb = ra;
  for (int w = 0; w < 3; ++w) {
    CHECK(a.run_window(rates, 50.0, ra).trains.output == b.run_window(rates, 50.0, rb).trains.output);
  }
  CHECK(a.snapshot() == b.snapshot());
  CHECK_THROWS_AS(LifNetwork::from_snapshot(nlohmann::json{{"format", "x"}}), ConfigError);
}
