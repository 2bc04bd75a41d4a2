#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lanekeep/errors.hpp"
#include "lanekeep/rstdp.hpp"

using namespace lanekeep;

namespace {

struct Spike {
  double t;
  bool post;
};

// Explicit double sum over every pre/post pair; each pair's contribution appears at
// the later of its two spikes and then decays with tau_c.
double all_pairs(const std::vector<Spike>& spikes, double t_end, const PlasticityParams& p) {
  double c = 0.0;
  for (const auto& a : spikes) {
    if (a.post) continue;
    for (const auto& b : spikes) {
      if (!b.post) continue;
      const double dt = b.t - a.t;
      const double w = dt >= 0.0 ? p.a_plus * std::exp(-dt / p.tau_plus) : -p.a_minus * std::exp(dt / p.tau_minus);
      c += p.c1 * w * std::exp(-(t_end - std::max(a.t, b.t)) / p.tau_c);
    }
  }
  return c;
}

double magnitude(const std::vector<Spike>& spikes, const PlasticityParams& p) {
  double m = 0.0;
  for (const auto& a : spikes) {
    if (a.post) continue;
    for (const auto& b : spikes) {
      if (b.post) m += p.c1 * std::max(p.a_plus, p.a_minus);
    }
  }
  return std::max(m, 1.0);
}

std::vector<Spike> random_train(std::mt19937_64& rng, bool on_grid) {
  std::uniform_int_distribution<int> count(0, 50);
  std::uniform_real_distribution<double> t(0.0, 200.0);
  std::bernoulli_distribution post(0.5);
  std::vector<Spike> s(static_cast<std::size_t>(count(rng)));
  for (auto& x : s) {
    x.t = on_grid ? std::round(t(rng) * 10.0) / 10.0 : t(rng);
    x.post = post(rng);
  }
  // Same-instant pre and post spikes are processed pre first.
  std::stable_sort(s.begin(), s.end(), [](const Spike& a, const Spike& b) {
    return a.t < b.t || (a.t == b.t && !a.post && b.post);
  });
  if (on_grid) {
    // One spike per neuron and tick.
    s.erase(std::unique(s.begin(), s.end(), [](const Spike& a, const Spike& b) {
      return a.t == b.t && a.post == b.post;
    }), s.end());
  }
  return s;
}

}  // namespace

TEST_CASE("STDP window") {
  const PlasticityParams p;
  CHECK(stdp_window(0.0, p) == 1.0);
  CHECK(stdp_window(20.0, p) == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(stdp_window(-20.0, p) == doctest::Approx(-0.36788).epsilon(1e-5));
}

TEST_CASE("eligibility from spike pairs") {
  const PlasticityParams p;
  RStdpSynapse lone;
  on_pre_spike(lone, 5.0, p);
  CHECK(lone.c == 0.0);

  RStdpSynapse a;
  on_pre_spike(a, 0.0, p);
  on_post_spike(a, 20.0, p);
  CHECK(a.c == doctest::Approx(std::exp(-1.0) * p.c1).epsilon(1e-12));

  RStdpSynapse b;
  on_post_spike(b, 0.0, p);
  on_pre_spike(b, 20.0, p);
  CHECK(b.c == doctest::Approx(-std::exp(-1.0) * p.c1).epsilon(1e-12));

  RStdpSynapse c;
  on_pre_spike(c, 10.0, p);
  CHECK_THROWS_AS(on_post_spike(c, 5.0, p), ContractError);
}

TEST_CASE("event-driven traces equal the all-pairs sum") {
  std::mt19937_64 rng(21);
  PlasticityParams p;
  p.a_minus = 1.3;
  p.tau_minus = 25.0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto spikes = random_train(rng, false);
    RStdpSynapse s;
    for (const auto& x : spikes) (x.post ? on_post_spike : on_pre_spike)(s, x.t, p);
    DopamineField f;
    decay(s, f, 250.0 - s.t_last, p);
    const double oracle = all_pairs(spikes, 250.0, p);
    CHECK(std::abs(s.c - oracle) <= 1e-9 * magnitude(spikes, p));
  }
}

TEST_CASE("fixed-step plasticity equals the all-pairs sum") {
  std::mt19937_64 rng(22);
  const PlasticityParams p;
  const double dt = 0.1;
  for (int trial = 0; trial < 100; ++trial) {
    const auto spikes = random_train(rng, true);
    RStdpPlasticity plast(1, 1, p, dt);
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(1, 1, 200.0);
    std::size_t next = 0;
    const long ticks = 2100;
    for (long k = 0; k < ticks; ++k) {
      std::vector<int> pre, post;
      while (next < spikes.size() && std::lround(spikes[next].t / dt) == k) {
        (spikes[next].post ? post : pre) = {0};
        ++next;
      }
      plast.on_tick(k, pre, post, w);
    }
    const double t_end = (ticks - 1) * dt;
    CHECK(std::abs(plast.eligibility()(0, 0) - all_pairs(spikes, t_end, p)) <= 1e-9 * magnitude(spikes, p));
    CHECK(w(0, 0) == 200.0);
  }
}

TEST_CASE("decay constants") {
  const PlasticityParams p;
  RStdpSynapse s;
  s.c = 1.0;
  DopamineField f{1.0};
  decay(s, f, 1000.0, p);
  CHECK(s.c == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(f.n == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));

  RStdpSynapse z;
  DopamineField zf;
  decay(z, zf, 200.0, p);
  CHECK(z.c == 0.0);
  CHECK(zf.n == 0.0);

  DopamineField g{1.0};
  RStdpSynapse dummy;
  decay(dummy, g, 200.0, p);
  CHECK(g.n == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("reward injection") {
  DopamineField f{0.3};
  inject_reward(f, 0.0);
  CHECK(f.n == 0.3);
  DopamineField a{0.0}, b{0.0};
  inject_reward(a, 0.002);
  inject_reward(b, 0.001);
  inject_reward(b, 0.001);
  CHECK(a.n == b.n);
}

TEST_CASE("weight update and clipping") {
  const PlasticityParams p;
  RStdpSynapse s;
  s.c = 5.0;
  apply_update(s, DopamineField{0.0}, 0.1, p);
  CHECK(s.w == 200.0);
  s.c = 0.0;
  apply_update(s, DopamineField{7.0}, 0.1, p);
  CHECK(s.w == 200.0);
  s.w = 2999.9;
  s.c = 100.0;
  apply_update(s, DopamineField{1.0}, 0.1, p);
  CHECK(s.w == 3000.0);
  s.w = 1.0;
  s.c = -100.0;
  apply_update(s, DopamineField{1.0}, 0.1, p);
  CHECK(s.w == 0.0);
}

TEST_CASE("weights stay in range under random plasticity") {
  PlasticityParams p;
  RStdpPlasticity plast(4, 2, p, 0.1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 4, 200.0);
  std::mt19937_64 rng(5);
  std::bernoulli_distribution spike(0.05);
  std::normal_distribution<double> reward(0.0, 50.0);
  for (long k = 0; k < 20000; ++k) {
    std::vector<int> pre, post;
    for (int i = 0; i < 4; ++i) if (spike(rng)) pre.push_back(i);
    for (int j = 0; j < 2; ++j) if (spike(rng)) post.push_back(j);
    if (k % 500 == 0) {
      plast.inject_reward(0, reward(rng));
      plast.inject_reward(1, reward(rng));
    }
    plast.on_tick(k, pre, post, w);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.maxCoeff() <= 3000.0);
  }
}

TEST_CASE("negated reward negates the weight change") {
  PlasticityParams p;
  p.w_min = -1e12;
  p.w_max = 1e12;
  auto run = [&](double sign) {
    RStdpPlasticity plast(3, 2, p, 0.1);
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 3, 200.0);
    std::mt19937_64 rng(8);
    std::bernoulli_distribution spike(0.1);
    for (long k = 0; k < 5000; ++k) {
      std::vector<int> pre, post;
      for (int i = 0; i < 3; ++i) if (spike(rng)) pre.push_back(i);
      for (int j = 0; j < 2; ++j) if (spike(rng)) post.push_back(j);
      if (k % 500 == 0) {
        plast.inject_reward(0, sign * 0.01);
        plast.inject_reward(1, -sign * 0.02);
      }
      plast.on_tick(k, pre, post, w);
    }
    return Eigen::MatrixXd(w.array() - 200.0);
  };
  const auto up = run(1.0);
  const auto down = run(-1.0);
  CHECK(up.norm() > 0.0);
  CHECK((up + down).cwiseAbs().maxCoeff() <= 1e-9 * up.cwiseAbs().maxCoeff());
}

TEST_CASE("zero reward leaves weights at their initial value") {
  const PlasticityParams p;
  RStdpPlasticity plast(32, 2, p, 0.1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(2, 32, p.w_init);
  std::mt19937_64 rng(9);
  std::bernoulli_distribution spike(0.1);
  for (long k = 0; k < 30000; ++k) {
    std::vector<int> pre, post;
    for (int i = 0; i < 32; ++i) if (spike(rng)) pre.push_back(i);
    for (int j = 0; j < 2; ++j) if (spike(rng)) post.push_back(j);
    if (k % 500 == 0) {
      plast.inject_reward(0, 0.0);
      plast.inject_reward(1, 0.0);
    }
    plast.on_tick(k, pre, post, w);
  }
  CHECK((w.array() == p.w_init).all());
  CHECK(plast.eligibility().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("eligibility and dopamine decay monotonically without events") {
  const PlasticityParams p;
  RStdpPlasticity plast(2, 1, p, 0.1);
  Eigen::MatrixXd w = Eigen::MatrixXd::Constant(1, 2, 200.0);
  plast.on_tick(0, std::vector<int>{0, 1}, {}, w);
  plast.on_tick(1, {}, std::vector<int>{0}, w);
  plast.inject_reward(0, 0.5);
  double c = std::abs(plast.eligibility()(0, 0));
  double n = plast.dopamine()[0];
  for (long k = 2; k < 3000; ++k) {
    plast.on_tick(k, {}, {}, w);
    CHECK(std::abs(plast.eligibility()(0, 0)) <= c);
    CHECK(plast.dopamine()[0] <= n);
    c = std::abs(plast.eligibility()(0, 0));
    n = plast.dopamine()[0];
  }
}

TEST_CASE("parameter validation") {
  PlasticityParams p;
  p.tau_c = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  PlasticityParams q;
  q.w_init = 4000.0;
  CHECK_THROWS_AS(RStdpPlasticity(1, 1, q, 0.1), ConfigError);
}
