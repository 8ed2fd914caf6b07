#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "doq/learn.hpp"
#include "doq/rng.hpp"

using namespace doq;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Two well-separated Gaussian blobs; any consistent trainer must split them.
LabeledDataset two_blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset data;
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double cx = cls ? 10.0 : 0.0;
    data.features.push_back({cx + rng.normal(), cx + rng.normal()});
    data.labels.push_back(cls);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 10 == 8) {
      data.val_idx.push_back(i);
    } else if (i % 10 == 9) {
      data.test_idx.push_back(i);
    } else {
      data.train_idx.push_back(i);
    }
  }
  return data;
}

}  // namespace

TEST_CASE("mlp_init: determinism, zero biases, fan-in bound") {
  const MlpClassifier a = mlp_init({4, 20, 20, 3}, 77);
  const MlpClassifier b = mlp_init({4, 20, 20, 3}, 77);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);

  for (const auto& bias : a.biases) {
    for (double v : bias) CHECK(v == 0.0);
  }
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    const double bound = std::sqrt(3.0) / std::sqrt(static_cast<double>(a.layer_sizes[l]));
    for (double w : a.weights[l]) CHECK(std::fabs(w) <= bound);
  }

  CHECK_THROWS_AS(mlp_init({4, 3}, 1), std::invalid_argument);      // no hidden layer
  CHECK_THROWS_AS(mlp_init({4, 20, 1}, 1), std::invalid_argument);  // single class
}

TEST_CASE("mlp_forward: uniform scores at zero parameters") {
  MlpClassifier net = mlp_init({3, 5, 4}, 1);
  for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
  const auto scores = mlp_forward(net, {0.3, -1.0, 2.0});
  REQUIRE(scores.size() == 4);
  for (double s : scores) CHECK(s == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("mlp_forward reproduces a hand-unrolled 2-2-2 network") {
  MlpClassifier net;
  net.layer_sizes = {2, 2, 2};
  net.weights = {{0.1, -0.2, 0.3, 0.4}, {0.2, -0.1, -0.3, 0.25}};
  net.biases = {{0.05, -0.05}, {0.0, 0.1}};

  const std::vector<double> x{0.7, -1.2};
  const double h0 = sig(0.05 + 0.1 * 0.7 + (-0.2) * (-1.2));
  const double h1 = sig(-0.05 + 0.3 * 0.7 + 0.4 * (-1.2));
  const double z0 = 0.0 + 0.2 * h0 + (-0.1) * h1;
  const double z1 = 0.1 + (-0.3) * h0 + 0.25 * h1;
  const double zmax = std::max(z0, z1);
  const double e0 = std::exp(z0 - zmax);
  const double e1 = std::exp(z1 - zmax);

  const auto scores = mlp_forward(net, x);
  CHECK(scores[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(scores[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));

  CHECK_THROWS_AS(mlp_forward(net, {1.0}), std::invalid_argument);
}

TEST_CASE("softmax scores are a probability vector for random inputs") {
  const MlpClassifier net = mlp_init({6, 20, 20, 5}, 99);
  Rng rng(4);
  for (int rep = 0; rep < 10000; ++rep) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal() * 10.0;
    const auto scores = mlp_forward(net, x);
    double sum = 0.0;
    for (double s : scores) {
      CHECK(s > 0.0);
      CHECK(s < 1.0);
      sum += s;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("training separates well-separated blobs and decreases the loss") {
  const LabeledDataset data = two_blobs(1000, 3);
  MlpClassifier net = mlp_init({2, 8, 2}, 21);
  TrainConfig cfg;
  cfg.max_epochs = 200;
    cfg.patience = 200;
  const TrainReport report = mlp_train(net, data, cfg);
  CHECK(report.train_accuracy == 1.0);
  CHECK(report.test_accuracy == 1.0);

  // a single epoch already lowers the training loss at a sane learning rate
  MlpClassifier fresh = mlp_init({2, 8, 2}, 21);
  TrainConfig one = cfg;
  one.max_epochs = 2;
  one.patience = 2;
  const TrainReport two_epochs = mlp_train(fresh, data, one);
  REQUIRE(two_epochs.loss_curve.size() == 2);
  CHECK(two_epochs.loss_curve[1] < two_epochs.loss_curve[0]);
}

TEST_CASE("training is bitwise deterministic under a fixed config") {
  const LabeledDataset data = two_blobs(400, 8);
  TrainConfig cfg;
  cfg.max_epochs = 60;
    cfg.patience = 30;

  MlpClassifier a = mlp_init({2, 6, 2}, 5);
  MlpClassifier b = mlp_init({2, 6, 2}, 5);
  const TrainReport ra = mlp_train(a, data, cfg);
  const TrainReport rb = mlp_train(b, data, cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
  CHECK(ra.loss_curve == rb.loss_curve);
  CHECK(ra.epochs_run == rb.epochs_run);
}

TEST_CASE("early stopping restores the best-validation parameters") {
  const LabeledDataset data = two_blobs(600, 12);
  MlpClassifier net = mlp_init({2, 6, 2}, 31);
  TrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.learning_rate = 0.8;  // deliberately coarse initial step so validation wobbles
  cfg.patience = 10;
  const TrainReport report = mlp_train(net, data, cfg);
  REQUIRE(!report.val_loss_curve.empty());
  double best = report.val_loss_curve[0];
  for (double v : report.val_loss_curve) best = std::min(best, v);
  CHECK(report.best_val_loss == doctest::Approx(best).epsilon(1e-15));
}

TEST_CASE("standardization is fit on the train split only") {
  LabeledDataset data;
  // train features around 0, validation around 100: the stored moments must
  // reflect the train rows alone
  data.features = {{0.0}, {2.0}, {100.0}, {104.0}};
  data.labels = {0, 1, 0, 1};
  data.train_idx = {0, 1};
  data.val_idx = {2, 3};
  MlpClassifier net = mlp_init({1, 4, 2}, 2);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  mlp_train(net, data, cfg);
  REQUIRE(net.feature_mean.size() == 1);
  CHECK(net.feature_mean[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(net.feature_std[0] == doctest::Approx(1.0).epsilon(1e-15));  // std of {0,2}
}

TEST_CASE("empty train split is rejected") {
  LabeledDataset data;
  data.features = {{1.0}};
  data.labels = {0};
  data.val_idx = {0};
  MlpClassifier net = mlp_init({1, 3, 2}, 1);
  CHECK_THROWS_AS(mlp_train(net, data, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("a non-finite loss raises a training error carrying the epoch") {
  LabeledDataset data;
  data.features = {{std::numeric_limits<double>::quiet_NaN()}, {1.0}};
  data.labels = {0, 1};
  data.train_idx = {0, 1};
  MlpClassifier net = mlp_init({1, 3, 2}, 1);
  TrainConfig cfg;
  cfg.standardize = false;
  try {
    mlp_train(net, data, cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.epoch == 0);
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("analytic gradients match finite differences on random small nets") {
  Rng rng(1001);
  for (int rep = 0; rep < 5; ++rep) {
    const MlpClassifier net = mlp_init({3, 4, 3}, 100 + static_cast<std::uint64_t>(rep));
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int i = 0; i < 8; ++i) {
      xs.push_back({rng.normal(), rng.normal(), rng.normal()});
      ys.push_back(static_cast<int>(rng.below(3)));
    }
    CHECK(mlp_gradient_check(net, xs, ys) < 1e-6);

    // doubling the inputs must still agree with the recomputed oracle
    auto scaled = xs;
    for (auto& x : scaled) {
      for (double& v : x) v *= 2.0;
    }
    CHECK(mlp_gradient_check(net, scaled, ys) < 1e-6);
  }
}

TEST_CASE("zero network with a class-balanced batch has symmetric bias gradients") {
  MlpClassifier net = mlp_init({2, 3, 2}, 9);
  for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
  const std::vector<std::vector<double>> xs{{1.0, -1.0}, {1.0, -1.0}};
  const std::vector<int> ys{0, 1};

  // with uniform scores and balanced labels, perturbing either output bias
  // moves the loss identically
  const auto loss_with_bias = [&](std::size_t cls, double delta) {
    MlpClassifier probe = net;
    probe.biases.back()[cls] += delta;
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto p = mlp_forward(probe, xs[i]);
      loss -= std::log(p[static_cast<std::size_t>(ys[i])]);
    }
    return loss / static_cast<double>(xs.size());
  };
  const double h = 1e-5;
  const double g0 = (loss_with_bias(0, h) - loss_with_bias(0, -h)) / (2.0 * h);
  const double g1 = (loss_with_bias(1, h) - loss_with_bias(1, -h)) / (2.0 * h);
  CHECK(std::fabs(g0 - g1) < 1e-10);
  CHECK(mlp_gradient_check(net, xs, ys) < 1e-6);
}

TEST_CASE("model files round-trip bit-exactly") {
  const LabeledDataset data = two_blobs(300, 40);
  MlpClassifier net = mlp_init({2, 5, 2}, 6);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  mlp_train(net, data, cfg);

  std::stringstream file;
  save_mlp(net, file);
  const MlpClassifier loaded = load_mlp(file);
  CHECK(loaded.layer_sizes == net.layer_sizes);
  CHECK(loaded.weights == net.weights);
  CHECK(loaded.biases == net.biases);
  CHECK(loaded.feature_mean == net.feature_mean);
  CHECK(loaded.feature_std == net.feature_std);

  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::vector<double> x{rng.normal() * 5.0, rng.normal() * 5.0};
    CHECK(mlp_forward(net, x) == mlp_forward(loaded, x));
  }

  // the quantizer wrapper picks the forward-pass argmax
  const NnQuantizer q = make_nn_quantizer(net);
  for (int rep = 0; rep < 50; ++rep) {
    const std::vector<double> x{rng.normal() * 5.0, rng.normal() * 5.0};
    const auto scores = mlp_forward(net, x);
    const int direct = scores[0] >= scores[1] ? 0 : 1;
    CHECK(quantize(DecisionalQuantizer{q}, Parameter{x}) == direct);
  }
}
