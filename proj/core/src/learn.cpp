#include "doq/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>

#include "doq/rng.hpp"

namespace doq {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Row-major batch workspace; reused across epochs.
struct Batch {
  std::size_t n = 0;
  std::vector<std::vector<double>> acts;  // acts[0] = standardized input, acts[L] = probs
};

void standardize_rows(const MlpClassifier& net, const std::vector<std::vector<double>>& xs,
                      const std::vector<std::size_t>& idx, std::vector<double>& out) {
  const std::size_t d = static_cast<std::size_t>(net.input_dim());
  out.resize(idx.size() * d);
  const bool std_on = !net.feature_mean.empty();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& x = xs[idx[r]];
    if (x.size() != d) fail("mlp: feature dimension mismatch");
    for (std::size_t i = 0; i < d; ++i) {
      out[r * d + i] = std_on ? (x[i] - net.feature_mean[i]) / net.feature_std[i] : x[i];
    }
  }
}

// Forward pass over the whole batch. Hidden layers: logistic of the affine
// pre-activation. Output layer: softmax with max subtraction.
void forward_batch(const MlpClassifier& net, Batch& b) {
  const std::size_t layers = net.weights.size();
  b.acts.resize(layers + 1);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(net.layer_sizes[l]);
    const std::size_t out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
    const std::vector<double>& a = b.acts[l];
    std::vector<double>& z = b.acts[l + 1];
    z.assign(b.n * out, 0.0);
    const double* w = net.weights[l].data();
    const double* bias = net.biases[l].data();
    for (std::size_t r = 0; r < b.n; ++r) {
      const double* ar = a.data() + r * in;
      double* zr = z.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w + o * in;
        // four independent accumulators; explicit reassociation keeps the
        // sum order fixed while letting the compiler vectorize it
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t i = 0;
        for (; i + 4 <= in; i += 4) {
          s0 += wo[i] * ar[i];
          s1 += wo[i + 1] * ar[i + 1];
          s2 += wo[i + 2] * ar[i + 2];
          s3 += wo[i + 3] * ar[i + 3];
        }
        double s = bias[o] + ((s0 + s1) + (s2 + s3));
        for (; i < in; ++i) s += wo[i] * ar[i];
        zr[o] = s;
      }
      if (l + 1 < layers) {
        for (std::size_t o = 0; o < out; ++o) zr[o] = 1.0 / (1.0 + std::exp(-zr[o]));
      } else {
        double zmax = zr[0];
        for (std::size_t o = 1; o < out; ++o) zmax = std::max(zmax, zr[o]);
        double sum = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          zr[o] = std::exp(zr[o] - zmax);
          sum += zr[o];
        }
        for (std::size_t o = 0; o < out; ++o) zr[o] /= sum;
      }
    }
  }
}

double mean_cross_entropy(const Batch& b, const std::vector<int>& labels,
                          const std::vector<std::size_t>& idx, std::size_t n_classes) {
  const std::vector<double>& probs = b.acts.back();
  double loss = 0.0;
  for (std::size_t r = 0; r < b.n; ++r) {
    const int y = labels[idx[r]];
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) fail("mlp: label out of range");
    const double p = std::max(probs[r * n_classes + static_cast<std::size_t>(y)], 1e-300);
    loss -= std::log(p);
  }
  return loss / static_cast<double>(b.n);
}

double accuracy_of(const Batch& b, const std::vector<int>& labels,
                   const std::vector<std::size_t>& idx, std::size_t n_classes) {
  if (b.n == 0) return 0.0;
  const std::vector<double>& probs = b.acts.back();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < b.n; ++r) {
    const double* pr = probs.data() + r * n_classes;
    std::size_t best = 0;
    for (std::size_t o = 1; o < n_classes; ++o) {
      if (pr[o] > pr[best]) best = o;
    }
    if (static_cast<int>(best) == labels[idx[r]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(b.n);
}

// Backpropagation of the mean cross-entropy over the batch. grads_w/grads_b
// mirror the weight/bias layout.
void backward_batch(const MlpClassifier& net, const Batch& b, const std::vector<int>& labels,
                    const std::vector<std::size_t>& idx,
                    std::vector<std::vector<double>>& grads_w,
                    std::vector<std::vector<double>>& grads_b) {
  const std::size_t layers = net.weights.size();
  const std::size_t n_classes = static_cast<std::size_t>(net.n_classes());
  const double inv_n = 1.0 / static_cast<double>(b.n);

  std::vector<double> delta = b.acts.back();  // starts as softmax probs
  for (std::size_t r = 0; r < b.n; ++r) {
    delta[r * n_classes + static_cast<std::size_t>(labels[idx[r]])] -= 1.0;
  }
  for (double& v : delta) v *= inv_n;

  grads_w.resize(layers);
  grads_b.resize(layers);
  for (std::size_t li = layers; li-- > 0;) {
    const std::size_t in = static_cast<std::size_t>(net.layer_sizes[li]);
    const std::size_t out = static_cast<std::size_t>(net.layer_sizes[li + 1]);
    const std::vector<double>& a = b.acts[li];
    grads_w[li].assign(in * out, 0.0);
    grads_b[li].assign(out, 0.0);
    double* gw = grads_w[li].data();
    double* gb = grads_b[li].data();
    for (std::size_t r = 0; r < b.n; ++r) {
      const double* dr = delta.data() + r * out;
      const double* ar = a.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += d * ar[i];
      }
    }
    if (li == 0) break;

    std::vector<double> prev(b.n * in, 0.0);
    const double* w = net.weights[li].data();
    for (std::size_t r = 0; r < b.n; ++r) {
      const double* dr = delta.data() + r * out;
      double* pr = prev.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const double* wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) pr[i] += d * wo[i];
      }
      const double* ar = a.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) pr[i] *= ar[i] * (1.0 - ar[i]);  // logistic'
    }
    delta = std::move(prev);
  }
}

}  // namespace

TrainingError::TrainingError(const std::string& msg, int epoch_idx)
    : std::runtime_error(msg), epoch(epoch_idx) {}

MlpClassifier mlp_init(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 3) fail("mlp_init: need input, at least one hidden, and output layer");
  for (int s : layer_sizes) {
    if (s < 1) fail("mlp_init: layer sizes must be >= 1");
  }
  if (layer_sizes.back() < 2) fail("mlp_init: output size must be >= 2");

  MlpClassifier net;
  net.layer_sizes = layer_sizes;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = static_cast<std::size_t>(layer_sizes[l]);
    const std::size_t out = static_cast<std::size_t>(layer_sizes[l + 1]);
    const double bound = std::sqrt(3.0) / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(out, 0.0);
  }
  return net;
}

std::vector<double> mlp_forward(const MlpClassifier& net, const std::vector<double>& x) {
  Batch b;
  b.n = 1;
  b.acts.assign(1, {});
  const std::size_t d = static_cast<std::size_t>(net.input_dim());
  if (x.size() != d) fail("mlp_forward: input dimension mismatch");
  b.acts[0].resize(d);
  const bool std_on = !net.feature_mean.empty();
  for (std::size_t i = 0; i < d; ++i) {
    b.acts[0][i] = std_on ? (x[i] - net.feature_mean[i]) / net.feature_std[i] : x[i];
  }
  forward_batch(net, b);
  return b.acts.back();
}

TrainReport mlp_train(MlpClassifier& net, const LabeledDataset& data, const TrainConfig& cfg) {
  if (data.train_idx.empty()) fail("mlp_train: empty train split");
  if (cfg.max_epochs < 1) fail("mlp_train: max_epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) fail("mlp_train: learning_rate must be > 0");
  if (cfg.patience < 0 || cfg.patience > cfg.max_epochs) {
    fail("mlp_train: patience must be in [0, max_epochs]");
  }
  const std::size_t n_classes = static_cast<std::size_t>(net.n_classes());
  for (std::size_t t : data.train_idx) {
    if (data.labels[t] < 0 || static_cast<std::size_t>(data.labels[t]) >= n_classes) {
      fail("mlp_train: train label out of range");
    }
  }

  // Standardization is fit on the train split only and stored in the net, so
  // inference applies the identical transform.
  const std::size_t d = static_cast<std::size_t>(net.input_dim());
  if (cfg.standardize) {
    net.feature_mean.assign(d, 0.0);
    net.feature_std.assign(d, 0.0);
    for (std::size_t t : data.train_idx) {
      for (std::size_t i = 0; i < d; ++i) net.feature_mean[i] += data.features[t][i];
    }
    for (double& m : net.feature_mean) m /= static_cast<double>(data.train_idx.size());
    for (std::size_t t : data.train_idx) {
      for (std::size_t i = 0; i < d; ++i) {
        const double dev = data.features[t][i] - net.feature_mean[i];
        net.feature_std[i] += dev * dev;
      }
    }
    for (double& s : net.feature_std) {
      s = std::sqrt(s / static_cast<double>(data.train_idx.size()));
      if (!(s > 1e-12)) s = 1.0;  // constant feature
    }
  } else {
    net.feature_mean.clear();
    net.feature_std.clear();
  }

  Batch train, val;
  train.n = data.train_idx.size();
  train.acts.assign(1, {});
  standardize_rows(net, data.features, data.train_idx, train.acts[0]);
  const bool has_val = !data.val_idx.empty();
  if (has_val) {
    val.n = data.val_idx.size();
    val.acts.assign(1, {});
    standardize_rows(net, data.features, data.val_idx, val.acts[0]);
  }

  TrainReport report;

  // Resilient update state: a per-parameter step that grows 1.2x while the
  // gradient sign holds and halves on a sign flip, whose update is skipped
  // (iRprop-). Only gradient signs enter the weight update, which is what
  // lets batch training punch through the flat majority-class plateau these
  // label sets open with.
  const double step_grow = 1.2, step_shrink = 0.5;
  const double step_min = 1e-12, step_max = 1.0;
  std::vector<std::vector<double>> step_w(net.weights.size()), step_b(net.biases.size());
  std::vector<std::vector<double>> prev_gw(net.weights.size()), prev_gb(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    step_w[l].assign(net.weights[l].size(), cfg.learning_rate);
    step_b[l].assign(net.biases[l].size(), cfg.learning_rate);
    prev_gw[l].assign(net.weights[l].size(), 0.0);
    prev_gb[l].assign(net.biases[l].size(), 0.0);
  }
  const auto rprop_update = [&](double* w, double* step, double* gprev, const double* g,
                                std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const double signal = g[i] * gprev[i];
      if (signal > 0.0) {
        step[i] = std::min(step[i] * step_grow, step_max);
        w[i] -= step[i] * (g[i] > 0.0 ? 1.0 : -1.0);
        gprev[i] = g[i];
      } else if (signal < 0.0) {
        step[i] = std::max(step[i] * step_shrink, step_min);
        gprev[i] = 0.0;
      } else {
        if (g[i] > 0.0) {
          w[i] -= step[i];
        } else if (g[i] < 0.0) {
          w[i] += step[i];
        }
        gprev[i] = g[i];
      }
    }
  };

  std::vector<std::vector<double>> best_w = net.weights, best_b = net.biases;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::vector<double>> gw, gb;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    forward_batch(net, train);
    const double loss = mean_cross_entropy(train, data.labels, data.train_idx, n_classes);
    if (!std::isfinite(loss)) {
      throw TrainingError("mlp_train: loss diverged at epoch " + std::to_string(epoch), epoch);
    }
    report.loss_curve.push_back(loss);
    report.epochs_run = epoch + 1;

    backward_batch(net, train, data.labels, data.train_idx, gw, gb);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      rprop_update(net.weights[l].data(), step_w[l].data(), prev_gw[l].data(), gw[l].data(),
                   net.weights[l].size());
      rprop_update(net.biases[l].data(), step_b[l].data(), prev_gb[l].data(), gb[l].data(),
                   net.biases[l].size());
    }

    const Batch& monitor = has_val ? val : train;
    const std::vector<std::size_t>& monitor_idx = has_val ? data.val_idx : data.train_idx;
    forward_batch(net, const_cast<Batch&>(monitor));
    const double monitored = mean_cross_entropy(monitor, data.labels, monitor_idx, n_classes);
    if (has_val) report.val_loss_curve.push_back(monitored);
    if (monitored < best_val) {
      best_val = monitored;
      best_w = net.weights;
      best_b = net.biases;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }

  net.weights = std::move(best_w);  // never worse than any epoch's best
  net.biases = std::move(best_b);
  report.best_val_loss = best_val;

  forward_batch(net, train);
  report.train_accuracy = accuracy_of(train, data.labels, data.train_idx, n_classes);
  if (has_val) {
    forward_batch(net, val);
    report.val_accuracy = accuracy_of(val, data.labels, data.val_idx, n_classes);
  }
  if (!data.test_idx.empty()) {
    Batch test;
    test.n = data.test_idx.size();
    test.acts.assign(1, {});
    standardize_rows(net, data.features, data.test_idx, test.acts[0]);
    forward_batch(net, test);
    report.test_accuracy = accuracy_of(test, data.labels, data.test_idx, n_classes);
  }
  return report;
}

double mlp_gradient_check(const MlpClassifier& net, const std::vector<std::vector<double>>& xs,
                          const std::vector<int>& ys) {
  if (xs.empty() || xs.size() != ys.size()) fail("mlp_gradient_check: bad batch");
  const std::size_t n_classes = static_cast<std::size_t>(net.n_classes());

  std::vector<std::size_t> idx(xs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  const auto batch_loss = [&](const MlpClassifier& m) {
    Batch b;
    b.n = xs.size();
    b.acts.assign(1, {});
    standardize_rows(m, xs, idx, b.acts[0]);
    forward_batch(m, b);
    return mean_cross_entropy(b, ys, idx, n_classes);
  };

  Batch b;
  b.n = xs.size();
  b.acts.assign(1, {});
  standardize_rows(net, xs, idx, b.acts[0]);
  forward_batch(net, b);
  std::vector<std::vector<double>> gw, gb;
  backward_batch(net, b, ys, idx, gw, gb);

  const double h = 1e-5;
  double worst = 0.0;
  MlpClassifier probe = net;
  const auto check_param = [&](double* slot, double analytic) {
    const double saved = *slot;
    *slot = saved + h;
    const double lp = batch_loss(probe);
    *slot = saved - h;
    const double lm = batch_loss(probe);
    *slot = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  };
  for (std::size_t l = 0; l < probe.weights.size(); ++l) {
    for (std::size_t i = 0; i < probe.weights[l].size(); ++i) {
      check_param(&probe.weights[l][i], gw[l][i]);
    }
    for (std::size_t i = 0; i < probe.biases[l].size(); ++i) {
      check_param(&probe.biases[l][i], gb[l][i]);
    }
  }
  return worst;
}

NnQuantizer make_nn_quantizer(MlpClassifier net) {
  NnQuantizer q;
  q.n_classes = net.n_classes();
  auto shared = std::make_shared<const MlpClassifier>(std::move(net));
  q.score = [shared](const std::vector<double>& x) { return mlp_forward(*shared, x); };
  return q;
}

void save_mlp(const MlpClassifier& net, std::ostream& os) {
  os << "doq-mlp 1\n";
  os << "layer_sizes " << net.layer_sizes.size();
  for (int s : net.layer_sizes) os << ' ' << s;
  os << '\n';
  os << "standardized " << (net.feature_mean.empty() ? 0 : 1) << '\n';
  if (!net.feature_mean.empty()) {
    os << "feature_mean";
    for (double v : net.feature_mean) os << ' ' << fmt17(v);
    os << "\nfeature_std";
    for (double v : net.feature_std) os << ' ' << fmt17(v);
    os << '\n';
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    os << "layer " << l << '\n';
    const std::size_t in = static_cast<std::size_t>(net.layer_sizes[l]);
    const std::size_t out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) {
        os << (i ? " " : "") << fmt17(net.weights[l][o * in + i]);
      }
      os << '\n';
    }
    for (std::size_t o = 0; o < out; ++o) os << (o ? " " : "") << fmt17(net.biases[l][o]);
    os << '\n';
  }
  os << "end\n";
}

MlpClassifier load_mlp(std::istream& is) {
  const auto expect = [&](const std::string& token) {
    std::string got;
    if (!(is >> got) || got != token) {
      throw std::runtime_error("load_mlp: malformed model file (expected '" + token + "')");
    }
  };
  expect("doq-mlp");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("load_mlp: unsupported version");

  expect("layer_sizes");
  std::size_t count = 0;
  is >> count;
  if (count < 3 || count > 64) throw std::runtime_error("load_mlp: bad layer count");
  MlpClassifier net;
  net.layer_sizes.resize(count);
  for (auto& s : net.layer_sizes) is >> s;

  expect("standardized");
  int std_on = 0;
  is >> std_on;
  if (std_on) {
    const std::size_t d = static_cast<std::size_t>(net.layer_sizes.front());
    expect("feature_mean");
    net.feature_mean.resize(d);
    for (auto& v : net.feature_mean) is >> v;
    expect("feature_std");
    net.feature_std.resize(d);
    for (auto& v : net.feature_std) is >> v;
  }
  for (std::size_t l = 0; l + 1 < count; ++l) {
    expect("layer");
    std::size_t li = 0;
    is >> li;
    if (li != l) throw std::runtime_error("load_mlp: layer index mismatch");
    const std::size_t in = static_cast<std::size_t>(net.layer_sizes[l]);
    const std::size_t out = static_cast<std::size_t>(net.layer_sizes[l + 1]);
    std::vector<double> w(in * out);
    for (auto& v : w) is >> v;
    std::vector<double> b(out);
    for (auto& v : b) is >> v;
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  expect("end");
  if (!is) throw std::runtime_error("load_mlp: truncated model file");
  return net;
}

}  // namespace doq
