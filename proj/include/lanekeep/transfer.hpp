#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lanekeep/controllers.hpp"
#include "lanekeep/dqn.hpp"
#include "lanekeep/mlp.hpp"
#include "lanekeep/snn.hpp"

namespace lanekeep {

struct DatasetOptions {
  /// Samples in the last `tail_fraction` of the archive are drawn `tail_weight` times as often.
  double tail_fraction{0.5};
  double tail_weight{2.0};
};

/// Archived states labeled by a frozen Q network. inputs is (512 + 1) x N: scaled
/// counts followed by the constant bias feature 1.
struct StateActionDataset {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
  std::vector<double> weights;
  int i_max{};

  std::size_t size() const { return labels.size(); }
  std::array<std::size_t, 3> label_histogram() const;
};

StateActionDataset build_dataset(const StateArchive& archive, const DenseNet& q,
                                 const DatasetOptions& options = {});

struct ClassifierParams {
  int hidden{200};
  double learning_rate{1e-4};
  int batch_size{50};
  int steps{10000};
  double holdout_fraction{0.1};
  std::size_t min_samples{1000};
};

struct ClassifierResult {
  DenseNet net;
  double train_accuracy{};
  double heldout_accuracy{};
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> heldout_indices;
};

/// 513-200-3 ReLU network without hidden biases, softmax cross-entropy, Adam.
ClassifierResult train_classifier(const StateActionDataset& data, const ClassifierParams& params,
                                  std::uint64_t seed);

double accuracy(const DenseNet& net, const StateActionDataset& data,
                const std::vector<std::size_t>& indices);

/// Per layer, divides every incoming weight by the largest positive incoming sum.
/// Throws DegenerateNetworkError if a layer has no positive weight at all.
DenseNet normalize_model(const DenseNet& net);

/// Largest sum of positive incoming weights over the neurons of each layer.
std::vector<double> max_positive_input(const DenseNet& net);

IfNetwork make_if_network(const DenseNet& normalized, const IfNetwork::Params& params = {});

struct ActionTraces {
  std::array<double, 3> z{};
  double decay{0.5};

  /// z <- decay * z + spikes; returns the argmax (lowest index on ties).
  int update(const std::vector<int>& spikes);
  int action() const;
};

struct SnnControlParams {
  IfNetwork::Params network;
  int window_ticks{10};
  double trace_decay{0.5};
  int frames_per_state{10};
  double v_straight{1.0};
  double v_turn{0.25};
  CropBand band;
};

/// Reads one spiking decision per 50 ms frame through action traces.
class SnnController : public Controller {
public:
  SnnController(const DenseNet& normalized, int i_max, const SnnControlParams& params,
                std::uint64_t seed);

  MotorCommand step(const EventFrame& frame) override;
  std::string kind() const override { return "dqn-snn"; }

  /// Frame counts scaled by i_max / frames_per_state, clamped to [0, 1].
  std::vector<double> scale_frame(const EventFrame& frame) const;
  int control_step(const EventFrame& frame);

  const ActionTraces& traces() const { return traces_; }
  IfNetwork& network() { return net_; }

private:
  SnnControlParams params_;
  double scale_;
  IfNetwork net_;
  ActionTraces traces_;
  Rng rng_;
};

/// One decision for a held state from a freshly reset network, read the way the
/// controller reads it: `windows` windows of `ticks` ticks feed the action traces, and
/// the decision is argmax of trace plus residual output potential.
int spiking_decision(IfNetwork& net, const std::vector<double>& inputs, int ticks, int windows,
                     double trace_decay, Rng& rng);

/// Fraction of the given dataset samples on which the spiking decision matches the
/// classifier. Each state is held for frames_per_state windows of window_ticks.
double snn_agreement(const DenseNet& classifier, const DenseNet& normalized,
                     const StateActionDataset& data, const std::vector<std::size_t>& indices,
                     const SnnControlParams& params, std::uint64_t seed);

/// Acts every `frames_per_action` frames from the condensed queue (greedy, frozen).
class DqnController : public Controller {
public:
  DqnController(DenseNet q, const DqnParams& params);

  MotorCommand step(const EventFrame& frame) override;
  std::string kind() const override { return "dqn"; }

private:
  DenseNet q_;
  DqnParams params_;
  FrameQueue queue_;
  int frames_{0};
  MotorCommand current_{};
  bool started_{false};
};

}  // namespace lanekeep
