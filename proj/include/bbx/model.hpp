#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

// Built-in toy targets. Rectifier activations throughout, softmax head.
enum class ArchKind { Linear, Mlp, Cnn };

inline const char* arch_kind_name(ArchKind k) {
  switch (k) {
    case ArchKind::Linear: return "linear";
    case ArchKind::Mlp: return "mlp";
    case ArchKind::Cnn: return "cnn";
  }
  return "?";
}

struct Architecture {
  ArchKind kind = ArchKind::Linear;
  int input_height = 0;
  int input_width = 0;
  int input_channels = 0;
  int classes = 0;
  std::vector<int> hidden;  // mlp only; one entry per hidden layer
  int conv_filters = 0;     // cnn only; kernels are 3x3 valid, pool 2x2

  int input_size() const { return input_height * input_width * input_channels; }

  // Post-convolution and post-pool map sizes for the cnn head.
  int conv_h() const { return input_height - 2; }
  int conv_w() const { return input_width - 2; }
  int pool_h() const { return conv_h() / 2; }
  int pool_w() const { return conv_w() / 2; }
  int head_inputs() const {
    switch (kind) {
      case ArchKind::Linear: return input_size();
      case ArchKind::Mlp: return hidden.back();
      case ArchKind::Cnn: return conv_filters * pool_h() * pool_w();
    }
    return 0;
  }

  void validate() const {
    if (input_height <= 0 || input_width <= 0 ||
        (input_channels != 1 && input_channels != 3))
      throw ShapeError("architecture: bad input shape");
    if (classes < 2) throw ParamError("architecture: need at least 2 classes");
    if (kind == ArchKind::Mlp) {
      if (hidden.empty()) throw ParamError("mlp: need at least one hidden layer");
      for (int h : hidden)
        if (h <= 0) throw ParamError("mlp: hidden sizes must be positive");
    }
    if (kind == ArchKind::Cnn) {
      if (conv_filters <= 0) throw ParamError("cnn: need at least one filter");
      if (conv_h() < 2 || conv_w() < 2)
        throw ShapeError("cnn: input too small for 3x3 valid conv + 2x2 pool");
    }
  }

  static Architecture linear(int h, int w, int c, int classes) {
    Architecture a{ArchKind::Linear, h, w, c, classes, {}, 0};
    a.validate();
    return a;
  }
  static Architecture mlp(int h, int w, int c, int classes, std::vector<int> hidden) {
    Architecture a{ArchKind::Mlp, h, w, c, classes, std::move(hidden), 0};
    a.validate();
    return a;
  }
  static Architecture cnn(int h, int w, int c, int classes, int filters) {
    Architecture a{ArchKind::Cnn, h, w, c, classes, {}, filters};
    a.validate();
    return a;
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

// Ordered named arrays plus the architecture that gives them meaning.
// Values are kept on the float32 grid after init/training so the weight
// file round-trips bit-exactly.
struct ModelWeights {
  Architecture arch;
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return a;
    throw ParamError("no weight array named " + name);
  }
  NamedArray& array(const std::string& name) {
    return const_cast<NamedArray&>(static_cast<const ModelWeights*>(this)->array(name));
  }

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

inline void snap_to_f32(ModelWeights& w) {
  for (auto& arr : w.arrays)
    for (double& v : arr.values) v = static_cast<double>(static_cast<float>(v));
}

// Glorot-uniform layer weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
inline ModelWeights init_weights(const Architecture& arch, RngStream& rng) {
  arch.validate();
  ModelWeights w;
  w.arch = arch;
  auto dense = [&](const std::string& prefix, int out, int in) {
    const double bound = std::sqrt(6.0 / (in + out));
    NamedArray weight{prefix + ".weight", {out, in}, {}};
    weight.values.resize(static_cast<std::size_t>(out) * in);
    for (double& v : weight.values) v = (2.0 * rng.uniform() - 1.0) * bound;
    w.arrays.push_back(std::move(weight));
    w.arrays.push_back(NamedArray{prefix + ".bias", {out}, std::vector<double>(out, 0.0)});
  };
  switch (arch.kind) {
    case ArchKind::Linear:
      dense("head", arch.classes, arch.input_size());
      break;
    case ArchKind::Mlp: {
      int in = arch.input_size();
      for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
        dense("layer" + std::to_string(i), arch.hidden[i], in);
        in = arch.hidden[i];
      }
      dense("head", arch.classes, in);
      break;
    }
    case ArchKind::Cnn: {
      const int fan_in = 9 * arch.input_channels;
      const int fan_out = 9 * arch.conv_filters;
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      NamedArray kernel{"conv.kernel", {arch.conv_filters, 3, 3, arch.input_channels}, {}};
      kernel.values.resize(kernel.count());
      for (double& v : kernel.values) v = (2.0 * rng.uniform() - 1.0) * bound;
      w.arrays.push_back(std::move(kernel));
      w.arrays.push_back(
          NamedArray{"conv.bias", {arch.conv_filters}, std::vector<double>(arch.conv_filters, 0.0)});
      dense("head", arch.classes, arch.head_inputs());
      break;
    }
  }
  snap_to_f32(w);
  return w;
}

inline ProbabilityVector softmax(const std::vector<double>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  ProbabilityVector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - peak);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

namespace detail {

// Per-layer activations kept around for backpropagation.
struct ForwardTrace {
  std::vector<std::vector<double>> dense_inputs;   // input to each dense layer
  std::vector<std::vector<double>> dense_pre;      // pre-activation of hidden layers
  std::vector<double> conv_pre;                    // [F, ch, cw] pre-activation
  std::vector<int> pool_argmax;                    // flat conv index per pooled cell
  std::vector<double> logits;
};

inline void dense_apply(const NamedArray& weight, const NamedArray& bias,
                        const std::vector<double>& in, std::vector<double>& out) {
  const int rows = weight.shape[0];
  const int cols = weight.shape[1];
  out.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = bias.values[r];
    const double* wrow = &weight.values[static_cast<std::size_t>(r) * cols];
    for (int c = 0; c < cols; ++c) acc += wrow[c] * in[c];
    out[r] = acc;
  }
}

inline ForwardTrace forward_trace(const ModelWeights& w, const Image& x) {
  const Architecture& arch = w.arch;
  ForwardTrace t;
  switch (arch.kind) {
    case ArchKind::Linear: {
      if (static_cast<int>(x.size()) != arch.input_size())
        throw ShapeError("linear_forward: image size does not match weight matrix");
      t.dense_inputs.push_back(x.data);
      dense_apply(w.array("head.weight"), w.array("head.bias"), x.data, t.logits);
      break;
    }
    case ArchKind::Mlp: {
      if (static_cast<int>(x.size()) != arch.input_size())
        throw ShapeError("mlp_forward: image size does not match weight matrix");
      std::vector<double> act = x.data;
      for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
        t.dense_inputs.push_back(act);
        std::vector<double> pre;
        const std::string prefix = "layer" + std::to_string(i);
        dense_apply(w.array(prefix + ".weight"), w.array(prefix + ".bias"), act, pre);
        t.dense_pre.push_back(pre);
        act.resize(pre.size());
        for (std::size_t j = 0; j < pre.size(); ++j) act[j] = std::max(0.0, pre[j]);
      }
      t.dense_inputs.push_back(act);
      dense_apply(w.array("head.weight"), w.array("head.bias"), act, t.logits);
      break;
    }
    case ArchKind::Cnn: {
      if (!x.same_shape(arch.input_height, arch.input_width, arch.input_channels))
        throw ShapeError("cnn_forward: image dims incompatible with architecture");
      const int F = arch.conv_filters;
      const int ch = arch.conv_h(), cw = arch.conv_w();
      const auto& kernel = w.array("conv.kernel");
      const auto& kbias = w.array("conv.bias");
      t.conv_pre.assign(static_cast<std::size_t>(F) * ch * cw, 0.0);
      for (int f = 0; f < F; ++f) {
        const double* kf = &kernel.values[static_cast<std::size_t>(f) * 9 * arch.input_channels];
        for (int y = 0; y < ch; ++y)
          for (int xx = 0; xx < cw; ++xx) {
            double acc = kbias.values[f];
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                for (int c = 0; c < arch.input_channels; ++c)
                  acc += kf[(ky * 3 + kx) * arch.input_channels + c] *
                         x.at(y + ky, xx + kx, c);
            t.conv_pre[(static_cast<std::size_t>(f) * ch + y) * cw + xx] = acc;
          }
      }
      const int ph = arch.pool_h(), pw = arch.pool_w();
      std::vector<double> pooled(static_cast<std::size_t>(F) * ph * pw);
      t.pool_argmax.assign(pooled.size(), -1);
      for (int f = 0; f < F; ++f)
        for (int py = 0; py < ph; ++py)
          for (int px = 0; px < pw; ++px) {
            double best = -1.0;
            int best_idx = -1;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int idx = (f * ch + (2 * py + dy)) * cw + (2 * px + dx);
                const double v = std::max(0.0, t.conv_pre[idx]);
                if (best_idx < 0 || v > best) {  // first-in-scan-order tie break
                  best = v;
                  best_idx = idx;
                }
              }
            pooled[(static_cast<std::size_t>(f) * ph + py) * pw + px] = best;
            t.pool_argmax[(static_cast<std::size_t>(f) * ph + py) * pw + px] = best_idx;
          }
      t.dense_inputs.push_back(std::move(pooled));
      dense_apply(w.array("head.weight"), w.array("head.bias"), t.dense_inputs.back(), t.logits);
      break;
    }
  }
  return t;
}

}  // namespace detail

inline std::vector<double> forward_logits(const ModelWeights& w, const Image& x) {
  return detail::forward_trace(w, x).logits;
}

inline ProbabilityVector forward_proba(const ModelWeights& w, const Image& x) {
  return softmax(forward_logits(w, x));
}

inline ProbabilityVector linear_forward(const ModelWeights& w, const Image& x) {
  if (w.arch.kind != ArchKind::Linear) throw ParamError("linear_forward: not a linear model");
  return forward_proba(w, x);
}
inline ProbabilityVector mlp_forward(const ModelWeights& w, const Image& x) {
  if (w.arch.kind != ArchKind::Mlp) throw ParamError("mlp_forward: not an mlp model");
  return forward_proba(w, x);
}
inline ProbabilityVector cnn_forward(const ModelWeights& w, const Image& x) {
  if (w.arch.kind != ArchKind::Cnn) throw ParamError("cnn_forward: not a cnn model");
  return forward_proba(w, x);
}

// Oracle over trained weights. Forward passes are pure, so one instance
// may serve concurrent readers.
class ModelOracle final : public Oracle {
 public:
  explicit ModelOracle(const ModelWeights& w) : weights_(w) {}
  explicit ModelOracle(ModelWeights&&) = delete;  // keeps only a reference

  ProbabilityVector predict_proba(const Image& x) override {
    return forward_proba(weights_, x);
  }
  int num_classes() const override { return weights_.arch.classes; }

  const ModelWeights& weights() const { return weights_; }

 private:
  const ModelWeights& weights_;
};

}  // namespace bbx
