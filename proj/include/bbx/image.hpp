#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/rng.hpp"

namespace bbx {

// H x W x C grid of intensities in [0,1], row-major (row, column, channel).
// Immutable by convention once handed to an oracle or attack.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t size() const { return data.size(); }

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }

  bool same_shape(int h, int w, int c) const {
    return height == h && width == w && channels == c;
  }
  bool same_shape(const Image& other) const {
    return same_shape(other.height, other.width, other.channels);
  }

  bool valid() const {
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3)) return false;
    if (data.size() != static_cast<std::size_t>(height) * width * channels) return false;
    for (double v : data)
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    return true;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.height == b.height && a.width == b.width && a.channels == b.channels &&
           a.data == b.data;
  }
};

// Elementwise delta over an image grid; unbounded until clipped.
struct Perturbation {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Perturbation() = default;
  Perturbation(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  static Perturbation zeros_like(const Image& x) {
    return Perturbation(x.height, x.width, x.channels);
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& x) const {
    return height == x.height && width == x.width && channels == x.channels;
  }
};

enum class DistanceMetric { L2, Linf };

inline double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// x + sigma, clipped into [0,1]. Leaves x untouched.
inline Image add_perturbation(const Image& x, const Perturbation& sigma) {
  if (!sigma.same_shape(x))
    throw ShapeError("add_perturbation: perturbation shape does not match image");
  Image out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = clip01(out.data[i] + sigma.data[i]);
  return out;
}

inline double distance(const Image& a, const Image& b, DistanceMetric m) {
  if (!a.same_shape(b)) throw ShapeError("distance: image shapes differ");
  if (m == DistanceMetric::L2) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double d = a.data[i] - b.data[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  }
  double maxabs = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    maxabs = std::max(maxabs, std::fabs(a.data[i] - b.data[i]));
  return maxabs;
}

inline double l2_distance(const Image& a, const Image& b) {
  return distance(a, b, DistanceMetric::L2);
}
inline double linf_distance(const Image& a, const Image& b) {
  return distance(a, b, DistanceMetric::Linf);
}

// I.i.d. standard normal deltas; deterministic for a given stream.
inline Perturbation random_gaussian_perturbation(int h, int w, int c, RngStream& rng) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3))
    throw ShapeError("random_gaussian_perturbation: invalid shape");
  Perturbation p(h, w, c);
  for (double& v : p.data) v = rng.normal();
  return p;
}

inline Perturbation random_gaussian_perturbation(const Image& like, RngStream& rng) {
  return random_gaussian_perturbation(like.height, like.width, like.channels, rng);
}

}  // namespace bbx
