#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lanekeep/errors.hpp"
#include "lanekeep/mlp.hpp"

using namespace lanekeep;

namespace {

DenseNet small_net(Rng& rng, bool bias) {
  auto net = DenseNet::make("t", 8, {{4, bias, Activation::relu}, {3, bias, Activation::identity}}, rng);
  // Non-zero biases so their gradients are exercised too.
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = g(rng);
  }
  return net;
}

Batch random_batch(Rng& rng, int n, LossKind loss) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, 2);
  std::bernoulli_distribution m(0.5);
  Batch b;
  b.inputs = Eigen::MatrixXd::NullaryExpr(8, n, [&] { return g(rng); });
  if (loss == LossKind::mse) {
    b.targets = Eigen::MatrixXd::NullaryExpr(3, n, [&] { return g(rng); });
    b.mask = Eigen::MatrixXd::NullaryExpr(3, n, [&] { return m(rng) ? 1.0 : 0.0; });
  } else {
    for (int i = 0; i < n; ++i) b.labels.push_back(lab(rng));
  }
  return b;
}

// Largest relative error between analytic and central-difference gradients.
double gradient_error(DenseNet net, const Batch& batch, LossKind loss) {
  Gradients g;
  compute_gradients(net, batch, loss, g);
  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = batch_loss(net, batch, loss);
    param = keep - h;
    const double down = batch_loss(net, batch, loss);
    param = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  };
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    auto& l = net.layers()[k];
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) probe(l.w(r, c), g.w[k](r, c));
    for (Eigen::Index r = 0; r < l.b.size(); ++r) probe(l.b[r], g.b[k][r]);
  }
  return worst;
}

}  // namespace

TEST_CASE("forward examples") {
  Rng rng(1);
  auto net = DenseNet::make("z", 4, {{5, true, Activation::relu}, {2, true, Activation::identity}}, rng);
  CHECK(net.forward(Eigen::VectorXd::Zero(4)).isZero(0.0));

  DenseLayer one{Eigen::MatrixXd::Constant(1, 1, 2.0), {}, false, Activation::relu};
  DenseNet lin("one", {one});
  CHECK(lin.forward(Eigen::VectorXd::Constant(1, 3.0))[0] == 6.0);

  DenseLayer pass{Eigen::MatrixXd::Constant(1, 1, 1.0), {}, false, Activation::relu};
  DenseNet relu("relu", {pass});
  CHECK(relu.forward(Eigen::VectorXd::Constant(1, -1.0))[0] == 0.0);

  CHECK_THROWS_AS(DenseNet("bad", {DenseLayer{Eigen::MatrixXd(2, 3), {}, false}, DenseLayer{Eigen::MatrixXd(2, 4), {}, false}}),
                  ContractError);
}

TEST_CASE("He-uniform initialization bounds") {
  Rng rng(2);
  auto net = DenseNet::make("h", 512, {{200, true, Activation::relu}, {3, true, Activation::identity}}, rng);
  const double bound = std::sqrt(6.0 / 512.0);
  CHECK(net.layers()[0].w.cwiseAbs().maxCoeff() <= bound);
  CHECK(net.layers()[0].w.cwiseAbs().maxCoeff() > 0.9 * bound);
  CHECK(net.layers()[0].b.isZero(0.0));
}

TEST_CASE("argmax prefers the lowest index on ties") {
  Eigen::VectorXd v(3);
  v << 0.5, 0.5, 0.1;
  CHECK(argmax(v) == 0);
  v << 0.1, 0.9, 0.3;
  CHECK(argmax(v) == 1);
}

TEST_CASE("hand gradient of a squared error") {
  DenseLayer l{Eigen::MatrixXd::Constant(1, 1, 1.0), {}, false, Activation::identity};
  DenseNet net("h", {l});
  Batch b;
  b.inputs = Eigen::MatrixXd::Constant(1, 1, 2.0);
  b.targets = Eigen::MatrixXd::Constant(1, 1, 0.0);
  Gradients g;
  CHECK(compute_gradients(net, b, LossKind::mse, g) == 2.0);
  CHECK(g.w[0](0, 0) == 4.0);
}

TEST_CASE("gradients match central differences") {
  Rng rng(3);
  for (LossKind loss : {LossKind::mse, LossKind::cross_entropy}) {
    for (bool bias : {true, false}) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto net = small_net(rng, bias);
        const auto batch = random_batch(rng, 6, loss);
        CHECK(gradient_error(net, batch, loss) < 1e-4);
      }
    }
  }
}

TEST_CASE("repeated steps on one sample settle") {
  Rng rng(4);
  auto net = small_net(rng, true);
  Adam adam(net, {1e-3});
  const auto batch = random_batch(rng, 1, LossKind::cross_entropy);
  std::vector<double> losses;
  for (int k = 0; k < 200; ++k) losses.push_back(train_step_adam(net, adam, batch, LossKind::cross_entropy));
  for (std::size_t k = 11; k < losses.size(); ++k) CHECK(losses[k] <= losses[k - 1] + 1e-12);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("first Adam step moves each parameter by lr") {
  DenseLayer l{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, 0.0), true, Activation::identity};
  DenseNet net("a", {l});
  Adam adam(net, {0.01});
  Batch b;
  b.inputs = Eigen::MatrixXd::Constant(1, 1, 2.0);
  b.targets = Eigen::MatrixXd::Constant(1, 1, 0.0);
  train_step_adam(net, adam, b, LossKind::mse);
  // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
  CHECK(net.layers()[0].w(0, 0) == doctest::Approx(1.0 - 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(net.layers()[0].b[0] == doctest::Approx(-0.01 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("Adam with zero learning rate changes nothing") {
  Rng rng(5);
  auto net = small_net(rng, true);
  const auto before = net;
  Adam adam(net, {0.0});
  const auto batch = random_batch(rng, 4, LossKind::mse);
  for (int k = 0; k < 10; ++k) train_step_adam(net, adam, batch, LossKind::mse);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    CHECK(net.layers()[k].w == before.layers()[k].w);
    CHECK(net.layers()[k].b == before.layers()[k].b);
  }
}

TEST_CASE("non-finite loss raises") {
  Rng rng(6);
  auto net = small_net(rng, true);
  Adam adam(net, {});
  auto batch = random_batch(rng, 2, LossKind::mse);
  batch.targets(0, 0) = std::numeric_limits<double>::infinity();
  batch.mask.setOnes();
  CHECK_THROWS_AS(train_step_adam(net, adam, batch, LossKind::mse), DivergenceError);
}

TEST_CASE("soft update") {
  DenseLayer one{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, 1.0), true, Activation::identity};
  DenseLayer zero{Eigen::MatrixXd::Constant(1, 1, 0.0), Eigen::VectorXd::Constant(1, 0.0), true, Activation::identity};
  const DenseNet online("o", {one});
  DenseNet t("t", {zero});
  soft_update(t, online, 0.001);
  CHECK(t.layers()[0].w(0, 0) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(t.layers()[0].b[0] == doctest::Approx(0.001).epsilon(1e-15));

  Rng rng(7);
  const auto a = small_net(rng, true);
  auto b = small_net(rng, true);
  const auto b0 = b;
  soft_update(b, a, 0.0);
  CHECK(b.layers()[0].w == b0.layers()[0].w);
  soft_update(b, a, 1.0);
  CHECK(b.layers()[1].w == a.layers()[1].w);

  auto twice = b0;
  auto once = b0;
  soft_update(twice, a, 0.3);
  soft_update(twice, a, 0.3);
  soft_update(once, a, 1.0 - 0.7 * 0.7);
  CHECK((twice.layers()[0].w - once.layers()[0].w).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(soft_update(b, a, 1.5), ContractError);
  CHECK_THROWS_AS(soft_update(t, a, 0.5), ContractError);
}

TEST_CASE("bias-free ReLU networks are positively homogeneous") {
  Rng rng(8);
  auto net = DenseNet::make("p", 512, {{200, false, Activation::relu}, {3, false, Activation::relu}}, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(512, [&] { return u(rng); });
  for (double alpha : {0.0, 0.5, 3.0}) {
    CHECK((net.forward(alpha * x) - alpha * net.forward(x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  Rng rng(9);
  auto net = small_net(rng, true);
  Adam adam(net, {1e-3});
  const auto batch = random_batch(rng, 4, LossKind::mse);
  for (int k = 0; k < 3; ++k) train_step_adam(net, adam, batch, LossKind::mse);
  const auto path = std::filesystem::temp_directory_path() / "lanekeep_mlp_ckpt.json";
  save_checkpoint(path, net, &adam, {{"note", 5}});
  std::optional<Adam> restored;
  nlohmann::json meta;
  auto back = load_checkpoint(path, &restored, &meta);
  CHECK(meta.at("note") == 5);
  REQUIRE(restored.has_value());
  CHECK(restored->step() == 3);
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    CHECK(back.layers()[k].w == net.layers()[k].w);
    CHECK(back.layers()[k].b == net.layers()[k].b);
  }
  // Both copies continue identically.
  train_step_adam(net, adam, batch, LossKind::mse);
  train_step_adam(back, *restored, batch, LossKind::mse);
  CHECK(back.layers()[0].w == net.layers()[0].w);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), ConfigError);
}
