#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lanekeep {

using Rng = std::mt19937_64;

/// Bernoulli draw with p = rate * dt. Throws ConfigError when p > 1 or rate < 0.
bool poisson_step(double rate_hz, double dt_s, Rng& rng);

// ---------------------------------------------------------------------------
// Integrate-and-fire (dimensionless, transfer path)

struct IfNeuron {
  double v{0.0};
  double threshold{1.0};
};

/// v += input; spike and reset to 0 at threshold; negative v floors at 0.
bool if_step(IfNeuron& n, double weighted_input);

/// Feed-forward IF network driven by Poisson inputs plus an always-on bias source.
/// weights[k] is out x in; the first layer has one extra trailing column for the bias.
class IfNetwork {
public:
  struct Params {
    double dt_ms{1.0};
    double max_rate_hz{1000.0};
    double threshold{1.0};
  };

  IfNetwork(std::vector<Eigen::MatrixXd> weights, Params params);

  /// Steps the network for `ticks` ticks. Input values in [0, 1] are rates as a
  /// fraction of max_rate_hz. Returns output spike counts. Membrane state persists.
  std::vector<int> run_window(std::span<const double> inputs, int ticks, Rng& rng);

  void reset();
  std::size_t input_size() const { return static_cast<std::size_t>(weights_.front().cols()) - 1; }
  std::size_t output_size() const { return static_cast<std::size_t>(weights_.back().rows()); }
  const std::vector<Eigen::VectorXd>& potentials() const { return v_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const Params& params() const { return params_; }

private:
  std::vector<Eigen::MatrixXd> weights_;
  Params params_;
  std::vector<Eigen::VectorXd> v_;
};

// ---------------------------------------------------------------------------
// Leaky integrate-and-fire with alpha-shaped currents (R-STDP path)

struct LifParams {
  double tau_m{10.0};     // ms
  double c_m{250.0};      // pF
  double tau_syn{2.0};    // ms
  double t_ref{2.0};      // ms
  double e_l{-70.0};      // mV
  double v_reset{-70.0};  // mV
  double v_th{-55.0};     // mV
  double i_e{0.0};        // pA
};

/// Exact propagators of the linear subthreshold dynamics over one step h (ms).
struct LifPropagators {
  double h{};
  double p11{};  // current derivative state decay, e^{-h/tau_syn}
  double p21{};  // derivative -> current
  double p22{};  // current decay
  double p30{};  // constant current -> V
  double p31{};  // derivative state -> V
  double p32{};  // current -> V
  double p33{};  // membrane decay, e^{-h/tau_m}
  int refractory_steps{};
  double spike_scale{};  // e / tau_syn: derivative jump per unit weight

  static LifPropagators make(const LifParams& p, double h_ms);
};

struct LifNeuron {
  double v{0.0};   // relative to E_L
  double di{0.0};  // derivative state of the alpha current
  double i{0.0};   // synaptic current, pA
  int refractory{0};

  double membrane_mv(const LifParams& p) const { return v + p.e_l; }
  void set_membrane_mv(const LifParams& p, double mv) { v = mv - p.e_l; }
};

/// One step. `arriving_weight` is the summed weight (pA) of spikes arriving this tick.
bool lif_step(LifNeuron& n, const LifParams& p, const LifPropagators& prop, double arriving_weight);

/// Closed-form alpha kernel: w * (t / tau) * e^{1 - t/tau}; zero for t < 0.
double alpha_current(double w, double t_ms, double tau_syn_ms);

/// Receives per-tick spike lists during run_window; may edit the weights.
class TickObserver {
public:
  virtual ~TickObserver() = default;
  virtual void on_tick(long tick, std::span<const int> pre, std::span<const int> post,
                       Eigen::MatrixXd& weights) = 0;
};

struct SpikeTrains {
  std::vector<std::vector<long>> input;   // tick indices per input neuron
  std::vector<std::vector<long>> output;  // tick indices per output neuron
};

struct WindowResult {
  std::vector<int> counts;  // per output neuron
  SpikeTrains trains;
};

/// Poisson inputs all-to-all onto LIF outputs, one-tick synaptic delay.
class LifNetwork {
public:
  struct Params {
    LifParams neuron;
    double dt_ms{0.1};
    int delay_ticks{1};
  };

  LifNetwork(int inputs, int outputs, double initial_weight, Params params);
  LifNetwork(Eigen::MatrixXd weights, Params params);

  /// Runs window_ms / dt ticks. Throws ConfigError if the window is not a multiple of dt.
  WindowResult run_window(std::span<const double> rates_hz, double window_ms, Rng& rng,
                          TickObserver* observer = nullptr);

  int inputs() const { return static_cast<int>(weights_.cols()); }
  int outputs() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::MatrixXd& weights() { return weights_; }
  const std::vector<LifNeuron>& neurons() const { return neurons_; }
  const Params& params() const { return params_; }
  long tick() const { return tick_; }

  nlohmann::json snapshot() const;
  static LifNetwork from_snapshot(const nlohmann::json& doc);

private:
  Eigen::MatrixXd weights_;  // outputs x inputs
  Params params_;
  LifPropagators prop_;
  std::vector<LifNeuron> neurons_;
  std::vector<std::vector<double>> delay_line_;  // ring of arriving weight per output
  long tick_{0};
};

}  // namespace lanekeep
