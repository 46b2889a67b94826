#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bbx/dataset.hpp"
#include "bbx/errors.hpp"
#include "bbx/model.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.05;
};

inline double cross_entropy(const ProbabilityVector& p, int y) {
  return -std::log(std::max(p[y], 1e-300));
}

namespace detail {

// Gradient buffers mirroring the weight arrays, flat per array.
struct Gradients {
  std::vector<std::vector<double>> by_array;

  explicit Gradients(const ModelWeights& w) {
    by_array.reserve(w.arrays.size());
    for (const auto& a : w.arrays) by_array.emplace_back(a.values.size(), 0.0);
  }
  void reset() {
    for (auto& g : by_array) std::fill(g.begin(), g.end(), 0.0);
  }
};

inline int array_index(const ModelWeights& w, const std::string& name) {
  for (std::size_t i = 0; i < w.arrays.size(); ++i)
    if (w.arrays[i].name == name) return static_cast<int>(i);
  throw ParamError("no weight array named " + name);
}

// Accumulates d(loss)/d(params) for one example into `grads`; returns the
// sample loss. Softmax cross-entropy head, rectifier hidden layers.
inline double backward_example(const ModelWeights& w, const Image& x, int y, Gradients& grads) {
  const Architecture& arch = w.arch;
  ForwardTrace t = forward_trace(w, x);
  const ProbabilityVector p = softmax(t.logits);
  const double loss = cross_entropy(p, y);

  std::vector<double> dlogits(p.begin(), p.end());
  dlogits[y] -= 1.0;

  auto dense_backward = [&](const std::string& prefix, const std::vector<double>& input,
                            const std::vector<double>& dout) {
    const int wi = array_index(w, prefix + ".weight");
    const int bi = array_index(w, prefix + ".bias");
    const auto& weight = w.arrays[wi];
    const int rows = weight.shape[0];
    const int cols = weight.shape[1];
    std::vector<double> dinput(cols, 0.0);
    for (int r = 0; r < rows; ++r) {
      grads.by_array[bi][r] += dout[r];
      const double* wrow = &weight.values[static_cast<std::size_t>(r) * cols];
      double* grow = &grads.by_array[wi][static_cast<std::size_t>(r) * cols];
      for (int c = 0; c < cols; ++c) {
        grow[c] += dout[r] * input[c];
        dinput[c] += dout[r] * wrow[c];
      }
    }
    return dinput;
  };

  switch (arch.kind) {
    case ArchKind::Linear:
      dense_backward("head", t.dense_inputs[0], dlogits);
      break;
    case ArchKind::Mlp: {
      std::vector<double> grad = dense_backward("head", t.dense_inputs.back(), dlogits);
      for (int i = static_cast<int>(arch.hidden.size()) - 1; i >= 0; --i) {
        for (std::size_t j = 0; j < grad.size(); ++j)
          if (t.dense_pre[i][j] <= 0.0) grad[j] = 0.0;
        grad = dense_backward("layer" + std::to_string(i), t.dense_inputs[i], grad);
      }
      break;
    }
    case ArchKind::Cnn: {
      std::vector<double> dpool = dense_backward("head", t.dense_inputs[0], dlogits);
      const int ch = arch.conv_h(), cw = arch.conv_w();
      std::vector<double> dconv(t.conv_pre.size(), 0.0);
      for (std::size_t i = 0; i < dpool.size(); ++i) {
        const int src = t.pool_argmax[i];
        if (t.conv_pre[src] > 0.0) dconv[src] += dpool[i];  // rectifier gate
      }
      const int ki = array_index(w, "conv.kernel");
      const int bi = array_index(w, "conv.bias");
      for (int f = 0; f < arch.conv_filters; ++f) {
        double* gk = &grads.by_array[ki][static_cast<std::size_t>(f) * 9 * arch.input_channels];
        for (int yy = 0; yy < ch; ++yy)
          for (int xx = 0; xx < cw; ++xx) {
            const double g = dconv[(static_cast<std::size_t>(f) * ch + yy) * cw + xx];
            if (g == 0.0) continue;
            grads.by_array[bi][f] += g;
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                for (int c = 0; c < arch.input_channels; ++c)
                  gk[(ky * 3 + kx) * arch.input_channels + c] += g * x.at(yy + ky, xx + kx, c);
          }
      }
      break;
    }
  }
  return loss;
}

}  // namespace detail

inline double mean_loss(const ModelWeights& w, const LabeledDataset& data) {
  if (data.images.empty()) throw EmptyDatasetError("mean_loss: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.images.size(); ++i)
    total += cross_entropy(forward_proba(w, data.images[i]), data.labels[i]);
  return total / static_cast<double>(data.images.size());
}

inline double accuracy(const ModelWeights& w, const LabeledDataset& data) {
  if (data.images.empty()) throw EmptyDatasetError("accuracy: empty dataset");
  long correct = 0;
  for (std::size_t i = 0; i < data.images.size(); ++i)
    if (argmax_label(forward_proba(w, data.images[i])) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

// Continues minibatch SGD on cross-entropy from the given weights, in place.
// One shuffle draw per epoch; update is the batch-mean gradient. Does not
// snap to float32 so callers can keep training.
inline void train_more(ModelWeights& w, const LabeledDataset& data, const TrainConfig& cfg,
                       RngStream& rng) {
  data.validate();
  if (data.images.empty()) throw EmptyDatasetError("train_more: empty dataset");
  if (data.class_count > w.arch.classes)
    throw ParamError("train_more: dataset has more classes than the model head");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.learning_rate < 0)
    throw ParamError("train_more: bad training configuration");

  std::vector<std::size_t> order(data.images.size());
  std::iota(order.begin(), order.end(), 0);
  detail::Gradients grads(w);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      grads.reset();
      for (std::size_t i = start; i < stop; ++i)
        detail::backward_example(w, data.images[order[i]], data.labels[order[i]], grads);
      const double step = cfg.learning_rate / static_cast<double>(stop - start);
      for (std::size_t a = 0; a < w.arrays.size(); ++a)
        for (std::size_t j = 0; j < grads.by_array[a].size(); ++j)
          w.arrays[a].values[j] -= step * grads.by_array[a][j];
    }
  }
}

// Fresh seeded training run: Glorot init, SGD, float32-snapped result.
inline ModelWeights train_sgd(const Architecture& arch, const LabeledDataset& data,
                              const TrainConfig& cfg, RngStream& rng) {
  ModelWeights w = init_weights(arch, rng);
  train_more(w, data, cfg, rng);
  snap_to_f32(w);
  return w;
}

// Max relative mismatch between analytic gradients and central finite
// differences (step 1e-4) on `samples` randomly chosen parameters of the
// single-example loss at (x, y).
inline double gradient_check(const ModelWeights& w, const Image& x, int y, RngStream& rng,
                             int samples = 100) {
  detail::Gradients analytic(w);
  detail::backward_example(w, x, y, analytic);

  std::size_t total = 0;
  for (const auto& a : w.arrays) total += a.values.size();
  const double h = 1e-4;
  double worst = 0.0;
  ModelWeights probe = w;
  for (int s = 0; s < samples; ++s) {
    std::size_t flat = rng.uniform_below(total);
    std::size_t ai = 0;
    while (flat >= probe.arrays[ai].values.size()) {
      flat -= probe.arrays[ai].values.size();
      ++ai;
    }
    double& param = probe.arrays[ai].values[flat];
    const double saved = param;
    param = saved + h;
    const double up = cross_entropy(forward_proba(probe, x), y);
    param = saved - h;
    const double down = cross_entropy(forward_proba(probe, x), y);
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double ga = analytic.by_array[ai][flat];
    const double err = std::fabs(fd - ga) / std::max(std::fabs(fd) + std::fabs(ga), 1e-6);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace bbx
