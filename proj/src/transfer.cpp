#include "lanekeep/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lanekeep/errors.hpp"

namespace lanekeep {

std::array<std::size_t, 3> StateActionDataset::label_histogram() const {
  std::array<std::size_t, 3> h{};
  for (int y : labels) ++h[static_cast<std::size_t>(y)];
  return h;
}

StateActionDataset build_dataset(const StateArchive& archive, const DenseNet& q,
                                 const DatasetOptions& options) {
  if (archive.empty()) throw ConfigError("cannot build a dataset from an empty archive");
  const auto cells = archive.at(0).counts.size();
  if (static_cast<Eigen::Index>(cells) != q.input_size()) {
    throw ContractError("archive state size does not match the Q network input");
  }
  StateActionDataset data;
  int i_max = 0;
  for (const auto& e : archive.entries()) {
    for (auto c : e.counts) i_max = std::max(i_max, static_cast<int>(c));
  }
  data.i_max = i_max;
  const auto n = static_cast<Eigen::Index>(archive.size());
  data.inputs.resize(static_cast<Eigen::Index>(cells) + 1, n);
  data.labels.resize(archive.size());
  data.weights.resize(archive.size());
  const auto tail_start = static_cast<std::size_t>(
      std::floor(static_cast<double>(archive.size()) * (1.0 - options.tail_fraction)));
  std::vector<int> counts(cells);
  Eigen::VectorXd binary(static_cast<Eigen::Index>(cells));
  for (std::size_t k = 0; k < archive.size(); ++k) {
    const auto& e = archive.at(k);
    std::copy(e.counts.begin(), e.counts.end(), counts.begin());
    for (std::size_t i = 0; i < cells; ++i) binary[static_cast<Eigen::Index>(i)] = counts[i] > 0 ? 1.0 : 0.0;
    data.labels[k] = argmax(q.forward(binary));
    const auto col = static_cast<Eigen::Index>(k);
    if (i_max > 0) {
      const auto scaled = dataset_scale(counts, i_max);
      for (std::size_t i = 0; i < cells; ++i) data.inputs(static_cast<Eigen::Index>(i), col) = scaled[i];
    } else {
      data.inputs.col(col).setZero();
    }
    data.inputs(static_cast<Eigen::Index>(cells), col) = 1.0;
    data.weights[k] = k >= tail_start ? options.tail_weight : 1.0;
  }
  return data;
}

double accuracy(const DenseNet& net, const StateActionDataset& data,
                const std::vector<std::size_t>& indices) {
  if (indices.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto i : indices) {
    if (argmax(net.forward(data.inputs.col(static_cast<Eigen::Index>(i)))) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

ClassifierResult train_classifier(const StateActionDataset& data, const ClassifierParams& params,
                                  std::uint64_t seed) {
  if (data.size() < params.min_samples) {
    throw ConfigError("dataset too small for classifier training (" + std::to_string(data.size()) + ")");
  }
  if (params.batch_size < 1 || params.steps < 0) throw ConfigError("bad classifier training parameters");
  Rng rng(seed);
  ClassifierResult out;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto held = static_cast<std::size_t>(std::round(params.holdout_fraction * static_cast<double>(data.size())));
  out.heldout_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  out.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(out.heldout_indices.begin(), out.heldout_indices.end());
  std::sort(out.train_indices.begin(), out.train_indices.end());

  out.net = DenseNet::make("classifier-512-200-3", static_cast<int>(data.inputs.rows()),
                           {{params.hidden, false, Activation::relu},
                            {kActionCount, false, Activation::identity}},
                           rng);
  Adam adam(out.net, AdamParams{params.learning_rate});
  std::vector<double> w;
  w.reserve(out.train_indices.size());
  for (auto i : out.train_indices) w.push_back(data.weights.empty() ? 1.0 : data.weights[i]);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  Batch batch;
  batch.inputs.resize(data.inputs.rows(), params.batch_size);
  batch.labels.resize(static_cast<std::size_t>(params.batch_size));
  for (int step = 0; step < params.steps; ++step) {
    for (int b = 0; b < params.batch_size; ++b) {
      const auto i = out.train_indices[pick(rng)];
      batch.inputs.col(b) = data.inputs.col(static_cast<Eigen::Index>(i));
      batch.labels[static_cast<std::size_t>(b)] = data.labels[i];
    }
    train_step_adam(out.net, adam, batch, LossKind::cross_entropy);
  }
  out.train_accuracy = accuracy(out.net, data, out.train_indices);
  out.heldout_accuracy = accuracy(out.net, data, out.heldout_indices);
  return out;
}

std::vector<double> max_positive_input(const DenseNet& net) {
  std::vector<double> out;
  for (const auto& l : net.layers()) out.push_back(l.w.cwiseMax(0.0).rowwise().sum().maxCoeff());
  return out;
}

DenseNet normalize_model(const DenseNet& net) {
  DenseNet out = net;
  for (auto& l : out.layers()) {
    if (l.has_bias) throw ContractError("normalize_model expects bias-free layers (bias as an input feature)");
    const double m = l.w.cwiseMax(0.0).rowwise().sum().maxCoeff();
    if (!(m > 0.0)) throw DegenerateNetworkError("layer without positive incoming weights");
    l.w /= m;
  }
  return out;
}

IfNetwork make_if_network(const DenseNet& normalized, const IfNetwork::Params& params) {
  std::vector<Eigen::MatrixXd> w;
  for (const auto& l : normalized.layers()) w.push_back(l.w);
  return IfNetwork(std::move(w), params);
}

int ActionTraces::update(const std::vector<int>& spikes) {
  for (std::size_t a = 0; a < z.size(); ++a) z[a] = decay * z[a] + spikes.at(a);
  return action();
}

int ActionTraces::action() const {
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

SnnController::SnnController(const DenseNet& normalized, int i_max, const SnnControlParams& params,
                             std::uint64_t seed)
    : params_(params),
      scale_(static_cast<double>(i_max) / params.frames_per_state),
      net_(make_if_network(normalized, params.network)),
      rng_(seed) {
  if (i_max < 1 || params.frames_per_state < 1) throw ConfigError("runtime scale needs i_max >= 1");
  traces_.decay = params.trace_decay;
}

std::vector<double> SnnController::scale_frame(const EventFrame& frame) const {
  const auto state = condense_dqn_state(std::span<const EventFrame>(&frame, 1), params_.band);
  std::vector<double> out(state.grid.counts.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(1.0, state.grid.counts[i] / scale_);
  return out;
}

int SnnController::control_step(const EventFrame& frame) {
  const auto inputs = scale_frame(frame);
  return traces_.update(net_.run_window(inputs, params_.window_ticks, rng_));
}

MotorCommand SnnController::step(const EventFrame& frame) {
  return action_to_motors(control_step(frame), params_.v_straight, params_.v_turn);
}

int spiking_decision(IfNetwork& net, const std::vector<double>& inputs, int ticks, int windows,
                     double trace_decay, Rng& rng) {
  if (windows < 1) throw ConfigError("at least one window per decision");
  net.reset();
  ActionTraces traces;
  traces.decay = trace_decay;
  for (int k = 0; k < windows; ++k) traces.update(net.run_window(inputs, ticks, rng));
  const auto& v = net.potentials().back();
  Eigen::VectorXd score(static_cast<Eigen::Index>(traces.z.size()));
  for (std::size_t a = 0; a < traces.z.size(); ++a) {
    score[static_cast<Eigen::Index>(a)] = traces.z[a] + v[static_cast<Eigen::Index>(a)];
  }
  return argmax(score);
}

double snn_agreement(const DenseNet& classifier, const DenseNet& normalized,
                     const StateActionDataset& data, const std::vector<std::size_t>& indices,
                     const SnnControlParams& params, std::uint64_t seed) {
  if (indices.empty()) return 0.0;
  auto net = make_if_network(normalized, params.network);
  Rng rng(seed);
  std::size_t same = 0;
  const auto n_in = static_cast<std::size_t>(data.inputs.rows()) - 1;
  std::vector<double> inputs(n_in);
  for (auto i : indices) {
    const auto col = data.inputs.col(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < n_in; ++k) inputs[k] = col[static_cast<Eigen::Index>(k)];
    const int a = spiking_decision(net, inputs, params.window_ticks, params.frames_per_state,
                                   params.trace_decay, rng);
    if (a == argmax(classifier.forward(col))) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(indices.size());
}

DqnController::DqnController(DenseNet q, const DqnParams& params) : q_(std::move(q)), params_(params) {}

MotorCommand DqnController::step(const EventFrame& frame) {
  if (!started_) {
    started_ = true;
    const BinaryState zeros(static_cast<std::size_t>(q_.input_size()), 0);
    current_ = action_to_motors(argmax(q_.forward(state_vector(zeros))), params_.v_straight, params_.v_turn);
    return current_;
  }
  queue_.push(frame);
  if (++frames_ == params_.frames_per_action) {
    frames_ = 0;
    const auto s = condense_dqn_state(queue_, params_.band).binary;
    current_ = action_to_motors(argmax(q_.forward(state_vector(s))), params_.v_straight, params_.v_turn);
  }
  return current_;
}

}  // namespace lanekeep
