#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lanekeep/snn.hpp"

namespace lanekeep {

enum class Activation { relu, identity };

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // size out when has_bias, else empty
  bool has_bias{true};
  Activation activation{Activation::relu};

  Eigen::Index inputs() const { return w.cols(); }
  Eigen::Index outputs() const { return w.rows(); }
};

struct LayerSpec {
  int outputs{};
  bool bias{true};
  Activation activation{Activation::relu};
};

/// Dense feed-forward network. Batches are column-major: one sample per column.
class DenseNet {
public:
  DenseNet() = default;
  DenseNet(std::string tag, std::vector<DenseLayer> layers);

  /// He-uniform weights, zero biases.
  static DenseNet make(std::string tag, int inputs, const std::vector<LayerSpec>& layers, Rng& rng);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  /// Pre-activations and activations per layer; acts[0] is the input.
  void forward_cached(const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& pre,
                      std::vector<Eigen::MatrixXd>& acts) const;

  const std::string& tag() const { return tag_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  Eigen::Index input_size() const { return layers_.front().inputs(); }
  Eigen::Index output_size() const { return layers_.back().outputs(); }
  bool same_shape(const DenseNet& other) const;

private:
  std::string tag_;
  std::vector<DenseLayer> layers_;
};

/// Lowest index among the maxima.
int argmax(const Eigen::VectorXd& v);

enum class LossKind { mse, cross_entropy };

/// mse: L = mean over samples of sum_k mask * (y - t)^2 / 2 (mask empty = all ones).
/// cross_entropy: L = mean of -log softmax(y)[label].
struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::MatrixXd mask;
  std::vector<int> labels;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

double batch_loss(const DenseNet& net, const Batch& batch, LossKind loss);
double compute_gradients(const DenseNet& net, const Batch& batch, LossKind loss, Gradients& grads);

struct AdamParams {
  double lr{1e-4};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};
};

class Adam {
public:
  Adam() = default;
  Adam(const DenseNet& net, AdamParams params);

  void apply(DenseNet& net, const Gradients& grads);

  const AdamParams& params() const { return params_; }
  long step() const { return t_; }
  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& doc, const DenseNet& net);

private:
  AdamParams params_;
  long t_{0};
  std::vector<Eigen::MatrixXd> mw_, vw_;
  std::vector<Eigen::VectorXd> mb_, vb_;
};

/// One Adam step. Returns the loss before the update; throws DivergenceError if it is not finite.
double train_step_adam(DenseNet& net, Adam& adam, const Batch& batch, LossKind loss);

/// target <- tau * online + (1 - tau) * target for every parameter.
void soft_update(DenseNet& target, const DenseNet& online, double tau);

nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& doc);

/// Checkpoint document: network, optional optimizer state and free-form metadata.
void save_checkpoint(const std::filesystem::path& path, const DenseNet& net,
                     const Adam* adam = nullptr, const nlohmann::json& meta = {});
DenseNet load_checkpoint(const std::filesystem::path& path, std::optional<Adam>* adam = nullptr,
                         nlohmann::json* meta = nullptr);

}  // namespace lanekeep
