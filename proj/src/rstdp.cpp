#include "lanekeep/rstdp.hpp"

#include <algorithm>
#include <cmath>

#include "lanekeep/errors.hpp"

namespace lanekeep {

void PlasticityParams::validate() const {
  if (!(tau_plus > 0.0 && tau_minus > 0.0 && tau_c > 0.0 && tau_n > 0.0)) {
    throw ConfigError("plasticity time constants must be positive");
  }
  if (!(w_min < w_init && w_init < w_max)) throw ConfigError("need w_min < w_init < w_max");
}

double stdp_window(double dt, const PlasticityParams& p) {
  if (dt >= 0.0) return p.a_plus * std::exp(-dt / p.tau_plus);
  return -p.a_minus * std::exp(dt / p.tau_minus);
}

namespace {

void advance(RStdpSynapse& s, double t, const PlasticityParams& p) {
  if (t < s.t_last) throw ContractError("spike timestamps must be non-decreasing");
  const double dt = t - s.t_last;
  if (dt > 0.0) {
    s.pre_trace *= std::exp(-dt / p.tau_plus);
    s.post_trace *= std::exp(-dt / p.tau_minus);
    s.c *= std::exp(-dt / p.tau_c);
  }
  s.t_last = t;
}

}  // namespace

void on_pre_spike(RStdpSynapse& s, double t, const PlasticityParams& p) {
  advance(s, t, p);
  s.c -= p.a_minus * s.post_trace * p.c1;
  s.pre_trace += 1.0;
}

void on_post_spike(RStdpSynapse& s, double t, const PlasticityParams& p) {
  advance(s, t, p);
  s.c += p.a_plus * s.pre_trace * p.c1;
  s.post_trace += 1.0;
}

void decay(RStdpSynapse& s, DopamineField& field, double dt, const PlasticityParams& p) {
  advance(s, s.t_last + dt, p);
  field.n *= std::exp(-dt / p.tau_n);
}

void inject_reward(DopamineField& field, double reward) { field.n += reward; }

void apply_update(RStdpSynapse& s, const DopamineField& field, double dt, const PlasticityParams& p) {
  s.w = std::clamp(s.w + field.n * s.c * dt, p.w_min, p.w_max);
}

RStdpPlasticity::RStdpPlasticity(int inputs, int outputs, const PlasticityParams& params,
                                 double dt_ms)
    : params_(params),
      dt_ms_(dt_ms),
      decay_pre_(std::exp(-dt_ms / params.tau_plus)),
      decay_post_(std::exp(-dt_ms / params.tau_minus)),
      decay_c_(std::exp(-dt_ms / params.tau_c)),
      decay_n_(std::exp(-dt_ms / params.tau_n)),
      pre_trace_(static_cast<std::size_t>(inputs), 0.0),
      post_trace_(static_cast<std::size_t>(outputs), 0.0),
      c_(Eigen::MatrixXd::Zero(outputs, inputs)),
      n_(static_cast<std::size_t>(outputs), 0.0) {
  params_.validate();
  if (!(dt_ms > 0.0)) throw ConfigError("plasticity step must be positive");
}

void RStdpPlasticity::on_tick(long, std::span<const int> pre, std::span<const int> post,
                              Eigen::MatrixXd& w) {
  for (auto& x : pre_trace_) x *= decay_pre_;
  for (auto& x : post_trace_) x *= decay_post_;
  c_ *= decay_c_;
  for (auto& x : n_) x *= decay_n_;

  const Eigen::Index outs = c_.rows();
  for (int i : pre) {
    for (Eigen::Index j = 0; j < outs; ++j) {
      c_(j, i) -= params_.a_minus * post_trace_[static_cast<std::size_t>(j)] * params_.c1;
    }
    pre_trace_[static_cast<std::size_t>(i)] += 1.0;
  }
  for (int j : post) {
    for (Eigen::Index i = 0; i < c_.cols(); ++i) {
      c_(j, i) += params_.a_plus * pre_trace_[static_cast<std::size_t>(i)] * params_.c1;
    }
    post_trace_[static_cast<std::size_t>(j)] += 1.0;
  }
  for (Eigen::Index j = 0; j < outs; ++j) {
    const double n = n_[static_cast<std::size_t>(j)];
    if (n == 0.0) continue;
    for (Eigen::Index i = 0; i < c_.cols(); ++i) {
      w(j, i) = std::clamp(w(j, i) + n * c_(j, i) * dt_ms_, params_.w_min, params_.w_max);
    }
  }
}

void RStdpPlasticity::inject_reward(int output, double reward) {
  n_.at(static_cast<std::size_t>(output)) += reward;
}

void RStdpPlasticity::reset_traces() {
  std::fill(pre_trace_.begin(), pre_trace_.end(), 0.0);
  std::fill(post_trace_.begin(), post_trace_.end(), 0.0);
  c_.setZero();
  std::fill(n_.begin(), n_.end(), 0.0);
}

}  // namespace lanekeep
