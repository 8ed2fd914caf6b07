#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "doq/quantizer.hpp"

namespace doq {

// ---------------------------------------------------------------------------
// Feedforward classifier built from scratch: logistic hidden layers, softmax
// output. Approximates a decisional quantizer when only utility realizations
// (through exhaustive labels) are available.
// ---------------------------------------------------------------------------

struct MlpClassifier {
  std::vector<int> layer_sizes;              // input, hidden..., n_classes
  std::vector<std::vector<double>> weights;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> biases;   // per layer, length out
  std::vector<double> feature_mean;          // empty when standardization is off
  std::vector<double> feature_std;

  int input_dim() const { return layer_sizes.front(); }
  int n_classes() const { return layer_sizes.back(); }
};

/// Weights uniform on +-sqrt(3)/sqrt(fan_in), biases zero, deterministic
/// given the seed. Requires at least one hidden layer and >= 2 classes.
MlpClassifier mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Softmax class scores (positive, summing to 1). Standardization stored in
/// the net is applied first; pre-activations are max-subtracted before the
/// softmax exponentials.
std::vector<double> mlp_forward(const MlpClassifier& net, const std::vector<double>& x);

struct TrainConfig {
  int max_epochs = 2000;
  double learning_rate = 0.05;  // initial per-parameter step of the resilient update
  int patience = 50;  // early stopping on validation loss
  std::uint64_t seed = 0;
  bool standardize = true;  // fit mean/std on the train split only
};

struct TrainReport {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_curve;      // train cross-entropy per epoch
  std::vector<double> val_loss_curve;  // empty when there is no validation split
  int epochs_run = 0;
  double best_val_loss = 0.0;
};

/// Full-batch training on the softmax cross-entropy with resilient
/// backpropagation (iRprop-): per-parameter steps that grow 1.2x while the
/// batch gradient keeps its sign and halve on a sign flip. Stops max_epochs
/// epochs in, or earlier when the validation loss has not improved for
/// `patience` epochs; the best-validation parameters are restored either
/// way. Deterministic: single-threaded, fixed evaluation order. Throws
/// TrainingError when the loss turns non-finite.
TrainReport mlp_train(MlpClassifier& net, const LabeledDataset& data,
                      const TrainConfig& cfg);

struct TrainingError : std::runtime_error {
  int epoch;
  explicit TrainingError(const std::string& msg, int epoch_idx);
};

/// Max relative disagreement between analytic gradients and central finite
/// differences (step 1e-5) of the batch loss, over every parameter. Meant
/// for small networks.
double mlp_gradient_check(const MlpClassifier& net,
                          const std::vector<std::vector<double>>& xs,
                          const std::vector<int>& ys);

/// Wraps a trained network as a decisional quantizer.
NnQuantizer make_nn_quantizer(MlpClassifier net);

/// Plain-text serialization, 17 significant digits throughout, so a
/// save/load round trip reproduces every double bit-exactly.
void save_mlp(const MlpClassifier& net, std::ostream& os);
MlpClassifier load_mlp(std::istream& is);

}  // namespace doq
