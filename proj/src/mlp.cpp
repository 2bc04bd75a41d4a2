#include "lanekeep/mlp.hpp"

#include <cmath>
#include <fstream>

#include "lanekeep/errors.hpp"

namespace lanekeep {

namespace {

void activate(Eigen::MatrixXd& m, Activation a) {
  if (a == Activation::relu) m = m.cwiseMax(0.0);
}

Eigen::MatrixXd affine(const DenseLayer& l, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = l.w * x;
  if (l.has_bias) z.colwise() += l.b;
  return z;
}

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation: " + s);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows) throw ConfigError("matrix row count mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.begin(), v.end());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size) {
  if (static_cast<Eigen::Index>(j.size()) != size) throw ConfigError("vector size mismatch");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

DenseNet::DenseNet(std::string tag, std::vector<DenseLayer> layers)
    : tag_(std::move(tag)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractError("DenseNet needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (k > 0 && l.inputs() != layers_[k - 1].outputs()) {
      throw ContractError("DenseNet layer dimensions do not chain");
    }
    if (l.has_bias && l.b.size() != l.outputs()) throw ContractError("DenseNet bias size mismatch");
    if (!l.has_bias && l.b.size() != 0) throw ContractError("DenseNet: bias given on a bias-free layer");
  }
}

DenseNet DenseNet::make(std::string tag, int inputs, const std::vector<LayerSpec>& specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  int fan_in = inputs;
  for (const auto& s : specs) {
    DenseLayer l;
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    l.w.resize(s.outputs, fan_in);
    for (Eigen::Index c = 0; c < l.w.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.w.rows(); ++r) l.w(r, c) = u(rng);
    }
    l.has_bias = s.bias;
    if (s.bias) l.b = Eigen::VectorXd::Zero(s.outputs);
    l.activation = s.activation;
    layers.push_back(std::move(l));
    fan_in = s.outputs;
  }
  return DenseNet(std::move(tag), std::move(layers));
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& x) const {
  return forward_batch(x);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_size()) throw ContractError("DenseNet: input dimension mismatch");
  Eigen::MatrixXd a = x;
  for (const auto& l : layers_) {
    a = affine(l, a);
    activate(a, l.activation);
  }
  return a;
}

void DenseNet::forward_cached(const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& pre,
                              std::vector<Eigen::MatrixXd>& acts) const {
  if (x.rows() != input_size()) throw ContractError("DenseNet: input dimension mismatch");
  pre.resize(layers_.size());
  acts.resize(layers_.size() + 1);
  acts[0] = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    pre[k] = affine(layers_[k], acts[k]);
    acts[k + 1] = pre[k];
    activate(acts[k + 1], layers_[k].activation);
  }
}

bool DenseNet::same_shape(const DenseNet& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& a = layers_[k];
    const auto& b = o.layers_[k];
    if (a.w.rows() != b.w.rows() || a.w.cols() != b.w.cols() || a.has_bias != b.has_bias ||
        a.activation != b.activation) {
      return false;
    }
  }
  return true;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

void check_batch(const DenseNet& net, const Batch& batch, LossKind loss) {
  const auto n = batch.inputs.cols();
  if (n == 0) throw ContractError("empty batch");
  if (batch.inputs.rows() != net.input_size()) throw ContractError("batch input dimension mismatch");
  if (loss == LossKind::mse) {
    if (batch.targets.rows() != net.output_size() || batch.targets.cols() != n) {
      throw ContractError("batch target shape mismatch");
    }
    if (batch.mask.size() != 0 && (batch.mask.rows() != batch.targets.rows() || batch.mask.cols() != n)) {
      throw ContractError("batch mask shape mismatch");
    }
  } else {
    if (static_cast<Eigen::Index>(batch.labels.size()) != n) throw ContractError("label count mismatch");
    for (int y : batch.labels) {
      if (y < 0 || y >= net.output_size()) throw ContractError("label out of range");
    }
  }
}

// Loss value and dL/d(output pre-activation), already divided by the batch size.
double loss_and_delta(const Eigen::MatrixXd& out, const Batch& batch, LossKind loss,
                      Eigen::MatrixXd* delta) {
  const double n = static_cast<double>(out.cols());
  if (loss == LossKind::mse) {
    Eigen::MatrixXd diff = out - batch.targets;
    if (batch.mask.size() != 0) diff = diff.cwiseProduct(batch.mask);
    if (delta != nullptr) *delta = diff / n;
    return 0.5 * diff.squaredNorm() / n;
  }
  double total = 0.0;
  if (delta != nullptr) delta->resize(out.rows(), out.cols());
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double m = out.col(c).maxCoeff();
    Eigen::VectorXd e = (out.col(c).array() - m).exp();
    const double z = e.sum();
    const int y = batch.labels[static_cast<std::size_t>(c)];
    total += -(out(y, c) - m - std::log(z));
    if (delta != nullptr) {
      delta->col(c) = e / z;
      (*delta)(y, c) -= 1.0;
    }
  }
  if (delta != nullptr) *delta /= n;
  return total / n;
}

}  // namespace

double batch_loss(const DenseNet& net, const Batch& batch, LossKind loss) {
  check_batch(net, batch, loss);
  return loss_and_delta(net.forward_batch(batch.inputs), batch, loss, nullptr);
}

double compute_gradients(const DenseNet& net, const Batch& batch, LossKind loss, Gradients& g) {
  check_batch(net, batch, loss);
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> acts;
  net.forward_cached(batch.inputs, pre, acts);
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  Eigen::MatrixXd delta;
  const double value = loss_and_delta(acts.back(), batch, loss, &delta);
  g.w.resize(depth);
  g.b.resize(depth);
  for (std::size_t k = depth; k-- > 0;) {
    if (layers[k].activation == Activation::relu) {
      delta = delta.cwiseProduct((pre[k].array() > 0.0).cast<double>().matrix());
    }
    g.w[k] = delta * acts[k].transpose();
    if (layers[k].has_bias) {
      g.b[k] = delta.rowwise().sum();
    } else {
      g.b[k].resize(0);
    }
    if (k > 0) delta = layers[k].w.transpose() * delta;
  }
  return value;
}

Adam::Adam(const DenseNet& net, AdamParams params) : params_(params) {
  for (const auto& l : net.layers()) {
    mw_.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    vw_.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    mb_.push_back(Eigen::VectorXd::Zero(l.b.size()));
    vb_.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
}

void Adam::apply(DenseNet& net, const Gradients& g) {
  auto& layers = net.layers();
  if (layers.size() != mw_.size() || g.w.size() != mw_.size()) {
    throw ContractError("Adam: network shape does not match optimizer state");
  }
  ++t_;
  const double b1 = params_.beta1;
  const double b2 = params_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = params_.lr;
  const double eps = params_.epsilon;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    mw_[k] = b1 * mw_[k] + (1.0 - b1) * g.w[k];
    vw_[k] = b2 * vw_[k] + (1.0 - b2) * g.w[k].cwiseProduct(g.w[k]);
    layers[k].w.array() -= lr * (mw_[k].array() / c1) / ((vw_[k].array() / c2).sqrt() + eps);
    if (layers[k].has_bias) {
      mb_[k] = b1 * mb_[k] + (1.0 - b1) * g.b[k];
      vb_[k] = b2 * vb_[k] + (1.0 - b2) * g.b[k].cwiseProduct(g.b[k]);
      layers[k].b.array() -= lr * (mb_[k].array() / c1) / ((vb_[k].array() / c2).sqrt() + eps);
    }
  }
}

nlohmann::json Adam::to_json() const {
  nlohmann::json doc;
  doc["lr"] = params_.lr;
  doc["beta1"] = params_.beta1;
  doc["beta2"] = params_.beta2;
  doc["epsilon"] = params_.epsilon;
  doc["step"] = t_;
  auto& layers = doc["moments"] = nlohmann::json::array();
  for (std::size_t k = 0; k < mw_.size(); ++k) {
    layers.push_back({{"mw", matrix_to_json(mw_[k])},
                      {"vw", matrix_to_json(vw_[k])},
                      {"mb", vector_to_json(mb_[k])},
                      {"vb", vector_to_json(vb_[k])}});
  }
  return doc;
}

Adam Adam::from_json(const nlohmann::json& doc, const DenseNet& net) {
  AdamParams p{doc.at("lr"), doc.at("beta1"), doc.at("beta2"), doc.at("epsilon")};
  Adam adam(net, p);
  adam.t_ = doc.at("step");
  const auto& moments = doc.at("moments");
  if (moments.size() != net.layers().size()) throw ConfigError("optimizer layer count mismatch");
  for (std::size_t k = 0; k < moments.size(); ++k) {
    const auto& l = net.layers()[k];
    adam.mw_[k] = matrix_from_json(moments[k].at("mw"), l.w.rows(), l.w.cols());
    adam.vw_[k] = matrix_from_json(moments[k].at("vw"), l.w.rows(), l.w.cols());
    adam.mb_[k] = vector_from_json(moments[k].at("mb"), l.b.size());
    adam.vb_[k] = vector_from_json(moments[k].at("vb"), l.b.size());
  }
  return adam;
}

double train_step_adam(DenseNet& net, Adam& adam, const Batch& batch, LossKind loss) {
  Gradients g;
  const double value = compute_gradients(net, batch, loss, g);
  if (!std::isfinite(value)) throw DivergenceError("non-finite training loss");
  adam.apply(net, g);
  return value;
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
  if (!target.same_shape(online)) throw ContractError("soft_update: architecture mismatch");
  if (tau < 0.0 || tau > 1.0) throw ContractError("soft_update: tau outside [0, 1]");
  auto& t = target.layers();
  const auto& o = online.layers();
  for (std::size_t k = 0; k < t.size(); ++k) {
    t[k].w = tau * o[k].w + (1.0 - tau) * t[k].w;
    if (t[k].has_bias) t[k].b = tau * o[k].b + (1.0 - tau) * t[k].b;
  }
}

nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json doc;
  doc["tag"] = net.tag();
  doc["inputs"] = net.input_size();
  auto& layers = doc["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json jl;
    jl["outputs"] = l.outputs();
    jl["activation"] = to_string(l.activation);
    jl["weights"] = matrix_to_json(l.w);
    jl["bias"] = l.has_bias ? vector_to_json(l.b) : nlohmann::json(nullptr);
    layers.push_back(std::move(jl));
  }
  return doc;
}

DenseNet net_from_json(const nlohmann::json& doc) {
  std::vector<DenseLayer> layers;
  Eigen::Index fan_in = doc.at("inputs").get<Eigen::Index>();
  for (const auto& jl : doc.at("layers")) {
    DenseLayer l;
    const auto outs = jl.at("outputs").get<Eigen::Index>();
    l.activation = activation_from(jl.at("activation").get<std::string>());
    l.w = matrix_from_json(jl.at("weights"), outs, fan_in);
    l.has_bias = !jl.at("bias").is_null();
    if (l.has_bias) l.b = vector_from_json(jl.at("bias"), outs);
    layers.push_back(std::move(l));
    fan_in = outs;
  }
  return DenseNet(doc.at("tag").get<std::string>(), std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const DenseNet& net, const Adam* adam,
                     const nlohmann::json& meta) {
  nlohmann::json doc;
  doc["format"] = "lanekeep-mlp/1";
  doc["network"] = net_to_json(net);
  if (adam != nullptr) doc["optimizer"] = adam->to_json();
  if (!meta.is_null()) doc["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
  out << doc.dump() << '\n';
}

DenseNet load_checkpoint(const std::filesystem::path& path, std::optional<Adam>* adam,
                         nlohmann::json* meta) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint: " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.at("format") != "lanekeep-mlp/1") throw ConfigError("not a lanekeep-mlp/1 checkpoint");
    auto net = net_from_json(doc.at("network"));
    if (meta != nullptr) *meta = doc.contains("meta") ? doc.at("meta") : nlohmann::json();
    if (adam != nullptr) {
      if (doc.contains("optimizer")) {
        *adam = Adam::from_json(doc.at("optimizer"), net);
      } else {
        adam->reset();
      }
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace lanekeep
