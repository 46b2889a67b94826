#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"

namespace bbx {
namespace detail {

// ITU-T T.81 Annex K example quantization tables, row-major.
inline constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kChromaTable = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

// Quality scaling: S = 5000/q below 50, else 200-2q; entries floor-scaled
// then clamped into 1..255 so nothing ever divides by zero.
inline std::array<double, 64> scaled_table(const std::array<int, 64>& base, int quality) {
  const double s = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<double, 64> out{};
  for (int i = 0; i < 64; ++i) {
    const double t = std::floor((base[i] * s + 50.0) / 100.0);
    out[i] = std::clamp(t, 1.0, 255.0);
  }
  return out;
}

// Orthonormal 8x8 DCT-II basis: row u holds c(u)·cos((2x+1)uπ/16).
inline const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> a = [] {
    std::array<double, 64> m{};
    const double pi = std::acos(-1.0);
    for (int u = 0; u < 8; ++u) {
      const double c = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) m[u * 8 + x] = c * std::cos((2 * x + 1) * u * pi / 16.0);
    }
    return m;
  }();
  return a;
}

// One 8x8 block round trip at 8-bit scale: forward DCT, quantize, dequantize,
// inverse DCT. In-place on a level-shifted block.
inline void jpeg_block(std::array<double, 64>& f, const std::array<double, 64>& q) {
  const auto& a = dct_basis();
  std::array<double, 64> tmp{}, coef{};
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += a[u * 8 + k] * f[k * 8 + x];
      tmp[u * 8 + x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[u * 8 + k] * a[v * 8 + k];
      coef[u * 8 + v] = s;
    }
  for (int i = 0; i < 64; ++i)
    coef[i] = std::floor(coef[i] / q[i] + 0.5) * q[i];  // round half up, dequantize
  for (int x = 0; x < 8; ++x)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += a[k * 8 + x] * coef[k * 8 + v];
      tmp[x * 8 + v] = s;
    }
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[x * 8 + k] * a[k * 8 + y];
      f[x * 8 + y] = s;
    }
}

// Plane round trip; the plane holds 8-bit-scale values, shape padded h x w.
inline void jpeg_plane(std::vector<double>& plane, int h, int w, const std::array<double, 64>& q) {
  std::array<double, 64> block{};
  for (int by = 0; by < h; by += 8)
    for (int bx = 0; bx < w; bx += 8) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) block[y * 8 + x] = plane[(by + y) * w + (bx + x)] - 128.0;
      jpeg_block(block, q);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) plane[(by + y) * w + (bx + x)] = block[y * 8 + x] + 128.0;
    }
}

}  // namespace detail

// In-memory JPEG round trip: BT.601 full-range YCbCr, per-channel 8x8 DCT
// with Annex-K tables at the given quality, no chroma subsampling, no entropy
// coding (it would not change any pixel). Channels run at 8-bit scale so the
// integer tables quantize as they do in a real codec; the unit-domain level
// shift of 0.5 corresponds to the 128 used here. Images whose sides are not
// multiples of 8 are edge-padded for the transform and cropped after.
inline Image jpeg_filter(const Image& x, int quality) {
  if (quality < 1 || quality > 100) throw ParamError("jpeg_filter: quality must lie in 1..100");
  if (x.channels != 1 && x.channels != 3)
    throw ParamError("jpeg_filter: needs a 1- or 3-channel image");

  const int ph = (x.height + 7) / 8 * 8;
  const int pw = (x.width + 7) / 8 * 8;
  const int planes = x.channels;

  // Color transform at 8-bit scale, edge-replicated to the padded shape.
  std::vector<std::vector<double>> ycc(planes, std::vector<double>(ph * pw));
  for (int y = 0; y < ph; ++y)
    for (int xcol = 0; xcol < pw; ++xcol) {
      const int sy = std::min(y, x.height - 1);
      const int sx = std::min(xcol, x.width - 1);
      if (planes == 1) {
        ycc[0][y * pw + xcol] = x.at(sy, sx, 0) * 255.0;
      } else {
        const double r = x.at(sy, sx, 0) * 255.0;
        const double g = x.at(sy, sx, 1) * 255.0;
        const double b = x.at(sy, sx, 2) * 255.0;
        ycc[0][y * pw + xcol] = 0.299 * r + 0.587 * g + 0.114 * b;
        ycc[1][y * pw + xcol] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
        ycc[2][y * pw + xcol] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
      }
    }

  const auto luma = detail::scaled_table(detail::kLumaTable, quality);
  const auto chroma = detail::scaled_table(detail::kChromaTable, quality);
  for (int p = 0; p < planes; ++p)
    detail::jpeg_plane(ycc[p], ph, pw, p == 0 ? luma : chroma);

  Image out = x;
  for (int y = 0; y < x.height; ++y)
    for (int xcol = 0; xcol < x.width; ++xcol) {
      if (planes == 1) {
        out.at(y, xcol, 0) = clip01(ycc[0][y * pw + xcol] / 255.0);
      } else {
        const double yy = ycc[0][y * pw + xcol];
        const double cb = ycc[1][y * pw + xcol] - 128.0;
        const double cr = ycc[2][y * pw + xcol] - 128.0;
        out.at(y, xcol, 0) = clip01((yy + 1.402 * cr) / 255.0);
        out.at(y, xcol, 1) = clip01((yy - 0.344136 * cb - 0.714136 * cr) / 255.0);
        out.at(y, xcol, 2) = clip01((yy + 1.772 * cb) / 255.0);
      }
    }
  return out;
}

}  // namespace bbx
