#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/jpeg.hpp"
#include "bbx/oracle.hpp"

namespace bbx {

struct BitSqueeze {
  int depth = 4;
};
struct MedianSmooth {
  int kernel = 2;
};
struct Jpeg {
  int quality = 75;
};

using DefenseSpec = std::variant<BitSqueeze, MedianSmooth, Jpeg>;

inline std::string defense_name(const DefenseSpec& spec) {
  if (const auto* b = std::get_if<BitSqueeze>(&spec))
    return "bit_squeeze:" + std::to_string(b->depth);
  if (const auto* m = std::get_if<MedianSmooth>(&spec))
    return "median:" + std::to_string(m->kernel);
  return "jpeg:" + std::to_string(std::get<Jpeg>(spec).quality);
}

// Inverse of defense_name: "median:2", "jpeg:75", "bit_squeeze:4".
inline DefenseSpec defense_from_name(const std::string& name) {
  const std::size_t colon = name.find(':');
  if (colon == std::string::npos)
    throw FormatError("defense '" + name + "': expected kind:parameter");
  const std::string kind = name.substr(0, colon);
  int value = 0;
  try {
    std::size_t used = 0;
    value = std::stoi(name.substr(colon + 1), &used);
    if (used != name.size() - colon - 1) throw std::invalid_argument(name);
  } catch (const std::exception&) {
    throw FormatError("defense '" + name + "': parameter must be an integer");
  }
  if (kind == "bit_squeeze") return BitSqueeze{value};
  if (kind == "median") return MedianSmooth{value};
  if (kind == "jpeg") return Jpeg{value};
  throw FormatError("defense '" + name + "': unknown kind '" + kind + "'");
}

// Per element: round(v·(2^i−1)) / (2^i−1), round-half-up. Idempotent, and
// each channel ends up with at most 2^i distinct values.
inline Image bit_squeeze(const Image& x, int depth) {
  if (depth < 1 || depth > 7) throw ParamError("bit_squeeze: depth must lie in 1..7");
  const double m = static_cast<double>((1 << depth) - 1);
  Image out = x;
  for (auto& v : out.data) v = std::floor(v * m + 0.5) / m;
  return out;
}

namespace detail {

// Symmetric reflection (edge value included): -1 -> 0, -2 -> 1, n -> n-1.
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace detail

// Per channel, each output pixel is the median of the k x k window whose
// reference cell sits at offset floor((k-1)/2); even windows take the lower
// median and the edges reflect.
inline Image median_smooth(const Image& x, int k) {
  if (k < 2) throw ParamError("median_smooth: kernel must be at least 2");
  if (k > std::min(x.height, x.width))
    throw ParamError("median_smooth: kernel exceeds image dimensions");
  const int anchor = (k - 1) / 2;
  Image out = x;
  std::vector<double> window(static_cast<std::size_t>(k) * k);
  for (int ch = 0; ch < x.channels; ++ch)
    for (int y = 0; y < x.height; ++y)
      for (int xcol = 0; xcol < x.width; ++xcol) {
        std::size_t n = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) {
            const int yy = detail::reflect_index(y - anchor + dy, x.height);
            const int xx = detail::reflect_index(xcol - anchor + dx, x.width);
            window[n++] = x.at(yy, xx, ch);
          }
        const std::size_t mid = (n - 1) / 2;  // lower median for even counts
        std::nth_element(window.begin(), window.begin() + mid, window.begin() + n);
        out.at(y, xcol, ch) = window[mid];
      }
  return out;
}

inline Image apply_defense(const Image& x, const DefenseSpec& spec) {
  if (const auto* b = std::get_if<BitSqueeze>(&spec)) return bit_squeeze(x, b->depth);
  if (const auto* m = std::get_if<MedianSmooth>(&spec)) return median_smooth(x, m->kernel);
  return jpeg_filter(x, std::get<Jpeg>(spec).quality);
}

// Preprocessor wrapper: every prediction first runs the defense. Query
// counting is unchanged; wrap this in a CountingOracle to meter it.
class DefendedOracle final : public Oracle {
 public:
  DefendedOracle(Oracle& inner, DefenseSpec spec) : inner_(inner), spec_(std::move(spec)) {}

  ProbabilityVector predict_proba(const Image& x) override {
    return inner_.predict_proba(apply_defense(x, spec_));
  }
  int predict_label(const Image& x) override {
    return inner_.predict_label(apply_defense(x, spec_));
  }
  bool has_probabilities() const override { return inner_.has_probabilities(); }
  int num_classes() const override { return inner_.num_classes(); }

 private:
  Oracle& inner_;
  DefenseSpec spec_;
};

}  // namespace bbx
