#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"
#include "bbx/rng.hpp"

namespace bbx {

struct LabeledDataset {
  std::vector<Image> images;  // uniform shape
  std::vector<int> labels;    // each < class_count
  int class_count = 0;
  std::string provenance;

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.size() != labels.size())
      throw FormatError("dataset: image/label count mismatch");
    if (class_count < 2) throw ParamError("dataset: class_count must be >= 2");
    for (int l : labels)
      if (l < 0 || l >= class_count) throw FormatError("dataset: label out of range");
    for (std::size_t i = 1; i < images.size(); ++i)
      if (!images[i].same_shape(images[0])) throw ShapeError("dataset: mixed image shapes");
  }
};

namespace detail {

// Orthonormal class templates: the K lowest 2-D DCT basis functions in
// zigzag order, replicated across channels. Low frequencies keep the
// patterns spatially smooth, orthonormality makes separability provable.
inline std::vector<std::vector<double>> dct_templates(int K, int h, int w, int c) {
  std::vector<std::pair<int, int>> freqs;
  for (int s = 0; s <= h + w - 2 && static_cast<int>(freqs.size()) < K; ++s)
    for (int u = 0; u <= s && static_cast<int>(freqs.size()) < K; ++u) {
      const int v = s - u;
      if (u < h && v < w) freqs.emplace_back(u, v);
    }
  std::vector<std::vector<double>> out;
  const double chan_norm = 1.0 / std::sqrt(static_cast<double>(c));
  for (const auto& [u, v] : freqs) {
    std::vector<double> t(static_cast<std::size_t>(h) * w * c);
    const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
    const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double val = au * av *
                           std::cos((2 * y + 1) * u * std::numbers::pi / (2.0 * h)) *
                           std::cos((2 * x + 1) * v * std::numbers::pi / (2.0 * w));
        for (int ch = 0; ch < c; ++ch)
          t[(static_cast<std::size_t>(y) * w + x) * c + ch] = val * chan_norm;
      }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

// Seeded synthetic classes: per class a scaled orthonormal template, samples
// are clip(template*0.5 + 0.5 + N(0, sigma)). Template scale is the minimum
// that yields an inter-class mean distance of 10*noise_sigma, so a nearest-
// template classifier is correct with overwhelming probability while class
// margins stay small enough for desk-scale attacks to work against.
inline LabeledDataset generate_synthetic(int K, int n_per_class, int h, int w, int c,
                                         double noise_sigma, std::uint64_t seed) {
  if (K < 2) throw ParamError("generate_synthetic: K must be >= 2");
  if (n_per_class < 1) throw ParamError("generate_synthetic: n_per_class must be >= 1");
  if (h <= 0 || w <= 0 || (c != 1 && c != 3))
    throw ShapeError("generate_synthetic: invalid image shape");
  if (static_cast<long long>(h) * w * c < K)
    throw ParamError("generate_synthetic: need h*w*c >= K for orthogonal templates");
  if (noise_sigma < 0) throw ParamError("generate_synthetic: negative noise_sigma");

  auto templates = detail::dct_templates(K, h, w, c);
  double max_abs = 0.0;
  for (const auto& t : templates)
    for (double v : t) max_abs = std::max(max_abs, std::fabs(v));

  // Means are template*0.5 + 0.5; orthonormal templates sit sqrt(2) apart,
  // so scale s gives inter-mean distance s/sqrt(2).
  double scale = noise_sigma > 0 ? 10.0 * noise_sigma * std::numbers::sqrt2 : 1.0;
  if (noise_sigma == 0) scale = std::min(1.0, 1.0 / max_abs);
  if (scale * max_abs > 1.0 + 1e-12)
    throw ParamError("generate_synthetic: margin 10*noise_sigma infeasible in [0,1] intensities");

  RngStream rng(seed);
  LabeledDataset ds;
  ds.class_count = K;
  ds.provenance = "synthetic";
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n_per_class; ++i) {
      Image img(h, w, c);
      for (std::size_t j = 0; j < img.data.size(); ++j)
        img.data[j] = clip01(templates[k][j] * scale * 0.5 + 0.5 + noise_sigma * rng.normal());
      ds.images.push_back(std::move(img));
      ds.labels.push_back(k);
    }
  }
  return ds;
}

// Class means of a synthetic dataset, for nearest-template oracles in tests.
inline std::vector<Image> class_means(const LabeledDataset& ds) {
  ds.validate();
  if (ds.images.empty()) throw EmptyDatasetError("class_means: empty dataset");
  std::vector<Image> means(ds.class_count,
                           Image(ds.images[0].height, ds.images[0].width, ds.images[0].channels));
  std::vector<int> counts(ds.class_count, 0);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    ++counts[ds.labels[i]];
    for (std::size_t j = 0; j < ds.images[i].data.size(); ++j)
      means[ds.labels[i]].data[j] += ds.images[i].data[j];
  }
  for (int k = 0; k < ds.class_count; ++k) {
    if (counts[k] == 0) continue;
    for (double& v : means[k].data) v /= counts[k];
  }
  return means;
}

// Keeps images every oracle labels correctly, then the first n_per_class of
// each class in dataset order. Mirrors the balanced, all-models-correct
// selection rule used for evaluation sets.
inline LabeledDataset select_evaluation_set(const LabeledDataset& data,
                                            const std::vector<Oracle*>& oracles,
                                            int n_per_class) {
  data.validate();
  if (oracles.empty()) throw ParamError("select_evaluation_set: no oracles given");
  if (n_per_class < 1) throw ParamError("select_evaluation_set: n_per_class must be >= 1");

  LabeledDataset out;
  out.class_count = data.class_count;
  out.provenance = data.provenance + "/eval";
  std::vector<int> taken(data.class_count, 0);
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const int y = data.labels[i];
    if (taken[y] >= n_per_class) continue;
    bool all_correct = true;
    for (Oracle* o : oracles)
      if (o->predict_label(data.images[i]) != y) {
        all_correct = false;
        break;
      }
    if (!all_correct) continue;
    out.images.push_back(data.images[i]);
    out.labels.push_back(y);
    ++taken[y];
  }
  for (int k = 0; k < data.class_count; ++k)
    if (taken[k] < n_per_class)
      throw SelectionError("select_evaluation_set: class " + std::to_string(k) + " has only " +
                               std::to_string(taken[k]) + " of " + std::to_string(n_per_class) +
                               " qualifying images",
                           k);
  return out;
}

}  // namespace bbx
