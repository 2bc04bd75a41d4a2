#include "lanekeep/snn.hpp"

#include <cmath>

#include "lanekeep/errors.hpp"

namespace lanekeep {

bool poisson_step(double rate_hz, double dt_s, Rng& rng) {
  const double p = rate_hz * dt_s;
  if (rate_hz < 0.0 || p > 1.0 + 1e-12) {
    throw ConfigError("poisson rate * dt must lie in [0, 1]");
  }
  if (p <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

bool if_step(IfNeuron& n, double weighted_input) {
  n.v += weighted_input;
  if (n.v >= n.threshold) {
    n.v = 0.0;
    return true;
  }
  if (n.v < 0.0) n.v = 0.0;
  return false;
}

IfNetwork::IfNetwork(std::vector<Eigen::MatrixXd> weights, Params params)
    : weights_(std::move(weights)), params_(params) {
  if (weights_.empty()) throw ContractError("IfNetwork needs at least one layer");
  for (std::size_t k = 1; k < weights_.size(); ++k) {
    if (weights_[k].cols() != weights_[k - 1].rows()) {
      throw ContractError("IfNetwork layer dimensions do not chain");
    }
  }
  if (params_.max_rate_hz * params_.dt_ms * 1e-3 > 1.0 + 1e-12) {
    throw ConfigError("IfNetwork: max rate * dt exceeds 1");
  }
  reset();
}

void IfNetwork::reset() {
  v_.clear();
  for (const auto& w : weights_) v_.push_back(Eigen::VectorXd::Zero(w.rows()));
}

std::vector<int> IfNetwork::run_window(std::span<const double> inputs, int ticks, Rng& rng) {
  if (inputs.size() != input_size()) throw ContractError("IfNetwork: input size mismatch");
  const double dt_s = params_.dt_ms * 1e-3;
  std::vector<int> counts(output_size(), 0);
  Eigen::VectorXd drive;
  std::vector<int> active;
  active.reserve(inputs.size() + 1);
  for (int t = 0; t < ticks; ++t) {
    active.clear();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (poisson_step(inputs[i] * params_.max_rate_hz, dt_s, rng)) active.push_back(static_cast<int>(i));
    }
    active.push_back(static_cast<int>(inputs.size()));  // bias source
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const auto& w = weights_[k];
      drive = Eigen::VectorXd::Zero(w.rows());
      for (int j : active) drive += w.col(j);
      active.clear();
      auto& v = v_[k];
      for (Eigen::Index n = 0; n < v.size(); ++n) {
        IfNeuron neuron{v[n], params_.threshold};
        if (if_step(neuron, drive[n])) active.push_back(static_cast<int>(n));
        v[n] = neuron.v;
      }
    }
    for (int j : active) ++counts[static_cast<std::size_t>(j)];
  }
  return counts;
}

LifPropagators LifPropagators::make(const LifParams& p, double h) {
  if (!(h > 0.0) || !(p.tau_m > 0.0) || !(p.tau_syn > 0.0) || !(p.c_m > 0.0)) {
    throw ConfigError("LIF parameters and step must be positive");
  }
  if (std::abs(p.tau_m - p.tau_syn) < 1e-12) {
    throw ConfigError("LIF: tau_m == tau_syn is not supported");
  }
  LifPropagators out;
  out.h = h;
  out.p11 = std::exp(-h / p.tau_syn);
  out.p22 = out.p11;
  out.p21 = h * out.p11;
  out.p33 = std::exp(-h / p.tau_m);
  out.p30 = p.tau_m / p.c_m * (1.0 - out.p33);
  const double beta = 1.0 / p.tau_m - 1.0 / p.tau_syn;
  const double ebh = std::exp(beta * h);
  out.p32 = (out.p11 - out.p33) / (beta * p.c_m);
  out.p31 = out.p33 / p.c_m * (h * ebh / beta - (ebh - 1.0) / (beta * beta));
  out.refractory_steps = static_cast<int>(std::lround(p.t_ref / h));
  out.spike_scale = std::exp(1.0) / p.tau_syn;
  return out;
}

bool lif_step(LifNeuron& n, const LifParams& p, const LifPropagators& prop, double arriving_weight) {
  if (n.refractory == 0) {
    n.v = prop.p30 * p.i_e + prop.p31 * n.di + prop.p32 * n.i + prop.p33 * n.v;
  } else {
    --n.refractory;
  }
  n.i = prop.p21 * n.di + prop.p22 * n.i;
  n.di *= prop.p11;
  n.di += prop.spike_scale * arriving_weight;
  if (n.v >= p.v_th - p.e_l) {
    n.refractory = prop.refractory_steps;
    n.v = p.v_reset - p.e_l;
    return true;
  }
  return false;
}

double alpha_current(double w, double t, double tau) {
  if (t < 0.0) return 0.0;
  return w * (t / tau) * std::exp(1.0 - t / tau);
}

LifNetwork::LifNetwork(int inputs, int outputs, double initial_weight, Params params)
    : LifNetwork(Eigen::MatrixXd::Constant(outputs, inputs, initial_weight), params) {}

LifNetwork::LifNetwork(Eigen::MatrixXd weights, Params params)
    : weights_(std::move(weights)),
      params_(params),
      prop_(LifPropagators::make(params.neuron, params.dt_ms)),
      neurons_(static_cast<std::size_t>(weights_.rows())) {
  if (params_.delay_ticks < 1) throw ConfigError("synaptic delay must be at least one tick");
  delay_line_.assign(static_cast<std::size_t>(params_.delay_ticks + 1),
                     std::vector<double>(static_cast<std::size_t>(weights_.rows()), 0.0));
}

WindowResult LifNetwork::run_window(std::span<const double> rates, double window_ms, Rng& rng,
                                    TickObserver* observer) {
  if (static_cast<Eigen::Index>(rates.size()) != weights_.cols()) {
    throw ContractError("LifNetwork: rate vector size mismatch");
  }
  const double ticks_d = window_ms / params_.dt_ms;
  const long ticks = std::lround(ticks_d);
  if (ticks <= 0 || std::abs(ticks_d - static_cast<double>(ticks)) > 1e-9) {
    throw ConfigError("window must be a positive multiple of dt");
  }
  const double dt_s = params_.dt_ms * 1e-3;
  const auto n_in = static_cast<std::size_t>(weights_.cols());
  const auto n_out = static_cast<std::size_t>(weights_.rows());
  const std::size_t ring = delay_line_.size();

  WindowResult out;
  out.counts.assign(n_out, 0);
  out.trains.input.resize(n_in);
  out.trains.output.resize(n_out);
  std::vector<int> pre;
  std::vector<int> post;
  for (long k = 0; k < ticks; ++k, ++tick_) {
    pre.clear();
    post.clear();
    for (std::size_t i = 0; i < n_in; ++i) {
      if (poisson_step(rates[i], dt_s, rng)) {
        pre.push_back(static_cast<int>(i));
        out.trains.input[i].push_back(tick_);
      }
    }
    // Spikes emitted now arrive delay_ticks later.
    auto& later = delay_line_[static_cast<std::size_t>(tick_ + params_.delay_ticks) % ring];
    for (int i : pre) {
      for (std::size_t j = 0; j < n_out; ++j) later[j] += weights_(static_cast<Eigen::Index>(j), i);
    }
    auto& now = delay_line_[static_cast<std::size_t>(tick_) % ring];
    for (std::size_t j = 0; j < n_out; ++j) {
      if (lif_step(neurons_[j], params_.neuron, prop_, now[j])) {
        post.push_back(static_cast<int>(j));
        out.trains.output[j].push_back(tick_);
        ++out.counts[j];
      }
      now[j] = 0.0;
    }
    if (observer != nullptr) observer->on_tick(tick_, pre, post, weights_);
  }
  return out;
}

nlohmann::json LifNetwork::snapshot() const {
  nlohmann::json doc;
  doc["format"] = "lanekeep-snn/1";
  doc["inputs"] = inputs();
  doc["outputs"] = outputs();
  doc["dt_ms"] = params_.dt_ms;
  doc["delay_ticks"] = params_.delay_ticks;
  const auto& p = params_.neuron;
  doc["neuron"] = {{"tau_m", p.tau_m}, {"c_m", p.c_m},       {"tau_syn", p.tau_syn},
                   {"t_ref", p.t_ref}, {"e_l", p.e_l},       {"v_reset", p.v_reset},
                   {"v_th", p.v_th},   {"i_e", p.i_e}};
  auto& w = doc["weights"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    std::vector<double> row(weights_.row(r).begin(), weights_.row(r).end());
    w.push_back(row);
  }
  auto& st = doc["state"] = nlohmann::json::array();
  for (const auto& n : neurons_) st.push_back({n.v, n.di, n.i, n.refractory});
  doc["tick"] = tick_;
  doc["pending"] = delay_line_;
  return doc;
}

LifNetwork LifNetwork::from_snapshot(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "lanekeep-snn/1") throw ConfigError("not a lanekeep-snn/1 snapshot");
    Params params;
    params.dt_ms = doc.at("dt_ms");
    params.delay_ticks = doc.at("delay_ticks");
    const auto& n = doc.at("neuron");
    params.neuron = {n.at("tau_m"), n.at("c_m"), n.at("tau_syn"), n.at("t_ref"),
                     n.at("e_l"),   n.at("v_reset"), n.at("v_th"), n.at("i_e")};
    const int rows = doc.at("outputs");
    const int cols = doc.at("inputs");
    Eigen::MatrixXd w(rows, cols);
    const auto& jw = doc.at("weights");
    if (static_cast<int>(jw.size()) != rows) throw ConfigError("snapshot weight rows mismatch");
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(jw[r].size()) != cols) throw ConfigError("snapshot weight cols mismatch");
      for (int c = 0; c < cols; ++c) w(r, c) = jw[r][c];
    }
    LifNetwork net(std::move(w), params);
    if (doc.contains("state")) {
      const auto& st = doc.at("state");
      if (static_cast<int>(st.size()) != rows) throw ConfigError("snapshot state size mismatch");
      for (int r = 0; r < rows; ++r) {
        auto& ne = net.neurons_[static_cast<std::size_t>(r)];
        ne.v = st[r][0];
        ne.di = st[r][1];
        ne.i = st[r][2];
        ne.refractory = st[r][3];
      }
      net.tick_ = doc.at("tick");
      auto pending = doc.at("pending").get<std::vector<std::vector<double>>>();
      if (pending.size() != net.delay_line_.size()) throw ConfigError("snapshot delay line mismatch");
      net.delay_line_ = std::move(pending);
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network snapshot: ") + e.what());
  }
}

}  // namespace lanekeep
