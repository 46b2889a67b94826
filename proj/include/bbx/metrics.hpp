#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "bbx/attacks/common.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"

namespace bbx {

struct MetricRecord {
  double noise_rate = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  std::optional<double> mc;
  std::optional<double> confidence;
  double elapsed_seconds = 0.0;
  long long queries_used = 0;
  bool success = false;
};

namespace detail {

// Grayscale plane (channel mean) with an inclusive prefix-sum view so any
// rectangular window's first and second moments come out in O(1).
struct SsimPlane {
  int h = 0, w = 0;
  std::vector<double> g;

  explicit SsimPlane(const Image& x) : h(x.height), w(x.width), g(x.height * x.width) {
    for (int y = 0; y < h; ++y)
      for (int xcol = 0; xcol < w; ++xcol) {
        double s = 0.0;
        for (int ch = 0; ch < x.channels; ++ch) s += x.at(y, xcol, ch);
        g[y * w + xcol] = s / x.channels;
      }
  }
};

struct PrefixSums {
  int h = 0, w = 0;
  std::vector<double> s;  // (h+1) x (w+1), zero border

  PrefixSums(const SsimPlane& a, const SsimPlane& b, int term)
      : h(a.h), w(a.w), s((a.h + 1) * (a.w + 1), 0.0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double va = a.g[y * w + x];
        const double vb = b.g[y * w + x];
        double v = 0.0;
        switch (term) {
          case 0: v = va; break;
          case 1: v = vb; break;
          case 2: v = va * va; break;
          case 3: v = vb * vb; break;
          default: v = va * vb; break;
        }
        s[(y + 1) * (w + 1) + (x + 1)] =
            v + s[y * (w + 1) + (x + 1)] + s[(y + 1) * (w + 1) + x] - s[y * (w + 1) + x];
      }
  }

  double window(int y0, int x0, int hh, int ww) const {
    return s[(y0 + hh) * (w + 1) + (x0 + ww)] - s[y0 * (w + 1) + (x0 + ww)] -
           s[(y0 + hh) * (w + 1) + x0] + s[y0 * (w + 1) + x0];
  }
};

inline double ssim_window(double sa, double sb, double saa, double sbb, double sab, double n) {
  constexpr double kC1 = 0.01 * 0.01;  // (0.01·L)^2 with L=1
  constexpr double kC2 = 0.03 * 0.03;
  const double mu_a = sa / n;
  const double mu_b = sb / n;
  const double var_a = saa / n - mu_a * mu_a;  // population variance
  const double var_b = sbb / n - mu_b * mu_b;
  const double cov = sab / n - mu_a * mu_b;
  return ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
}

}  // namespace detail

// Mean local SSIM over 8x8 sliding windows (stride 1, uniform weights);
// multichannel inputs are reduced to their channel mean first. Images smaller
// than the window fall back to one global window.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("ssim: images must share a shape");
  const detail::SsimPlane pa(a), pb(b);
  const detail::PrefixSums sa(pa, pb, 0), sb(pa, pb, 1), saa(pa, pb, 2), sbb(pa, pb, 3),
      sab(pa, pb, 4);

  const int win = 8;
  const int wh = std::min(win, pa.h);
  const int ww = std::min(win, pa.w);
  const double n = static_cast<double>(wh) * ww;
  double total = 0.0;
  long long windows = 0;
  for (int y0 = 0; y0 + wh <= pa.h; ++y0)
    for (int x0 = 0; x0 + ww <= pa.w; ++x0) {
      total += detail::ssim_window(sa.window(y0, x0, wh, ww), sb.window(y0, x0, wh, ww),
                                   saa.window(y0, x0, wh, ww), sbb.window(y0, x0, wh, ww),
                                   sab.window(y0, x0, wh, ww), n);
      ++windows;
    }
  return total / static_cast<double>(windows);
}

inline double noise_rate(const Image& a, const Image& b) { return 1.0 - ssim(a, b); }

// Probability the oracle puts on its own (wrong) prediction; absent when the
// oracle is label-only or actually classifies x_adv correctly.
inline std::optional<double> misclassification_confidence(Oracle& oracle, const Image& x_adv,
                                                          int y_true) {
  if (!oracle.has_probabilities()) return std::nullopt;
  const ProbabilityVector p = oracle.predict_proba(x_adv);
  const int label = argmax_label(p);
  if (label == y_true) return std::nullopt;
  return p[label];
}

// Probability mass on the predicted class; absent for label-only oracles.
inline std::optional<double> confidence_score(Oracle& oracle, const Image& x) {
  if (!oracle.has_probabilities()) return std::nullopt;
  const ProbabilityVector p = oracle.predict_proba(x);
  return p[argmax_label(p)];
}

inline double attack_success_rate(const std::vector<AttackOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInputError("attack_success_rate: no outcomes");
  long long wins = 0;
  for (const auto& o : outcomes) wins += o.success ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(outcomes.size());
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline MeanStd summarize(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInputError("summarize: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

inline std::string format_mean_std(const MeanStd& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f±%.3f", s.mean, s.std);
  return buf;
}

}  // namespace bbx
