#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lanekeep/snn.hpp"

namespace lanekeep {

struct PlasticityParams {
  double a_plus{1.0};
  double a_minus{1.0};
  double tau_plus{20.0};    // ms
  double tau_minus{20.0};   // ms
  double tau_c{1000.0};     // ms
  double tau_n{200.0};      // ms
  double w_min{0.0};
  double w_max{3000.0};
  double w_init{200.0};
  double c_r{0.01};
  double c1{1.0};

  /// Throws ConfigError on non-positive time constants or w_init outside (w_min, w_max).
  void validate() const;
};

/// Pair window W(dt), dt = t_post - t_pre in ms. dt = 0 counts as potentiation.
double stdp_window(double dt_ms, const PlasticityParams& p);

/// Single synapse with lazily decayed state. Times are in ms and must not decrease;
/// a pre and a post spike at the same instant are passed pre first.
struct RStdpSynapse {
  double w{200.0};
  double c{0.0};
  double pre_trace{0.0};
  double post_trace{0.0};
  double t_last{0.0};
};

struct DopamineField {
  double n{0.0};
};

void on_pre_spike(RStdpSynapse& s, double t_ms, const PlasticityParams& p);
void on_post_spike(RStdpSynapse& s, double t_ms, const PlasticityParams& p);

/// Exponential decay of traces, eligibility and dopamine over dt_ms.
void decay(RStdpSynapse& s, DopamineField& field, double dt_ms, const PlasticityParams& p);

void inject_reward(DopamineField& field, double reward);

/// w += n * c * dt, clipped to [w_min, w_max].
void apply_update(RStdpSynapse& s, const DopamineField& field, double dt_ms,
                  const PlasticityParams& p);

/// Fixed-step R-STDP for every synapse of a LifNetwork, one dopamine field per output.
class RStdpPlasticity : public TickObserver {
public:
  RStdpPlasticity(int inputs, int outputs, const PlasticityParams& params, double dt_ms);

  void on_tick(long tick, std::span<const int> pre, std::span<const int> post,
               Eigen::MatrixXd& weights) override;

  void inject_reward(int output, double reward);
  void reset_traces();

  const Eigen::MatrixXd& eligibility() const { return c_; }
  const std::vector<double>& dopamine() const { return n_; }
  const PlasticityParams& params() const { return params_; }

private:
  PlasticityParams params_;
  double dt_ms_;
  double decay_pre_;
  double decay_post_;
  double decay_c_;
  double decay_n_;
  std::vector<double> pre_trace_;
  std::vector<double> post_trace_;
  Eigen::MatrixXd c_;  // outputs x inputs
  std::vector<double> n_;
};

}  // namespace lanekeep
