#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "bbx/dataset.hpp"
#include "bbx/errors.hpp"

namespace bbx {

// CIFAR-10 binary record: 1 label byte then 3072 pixel bytes, channel-planar
// (1024 red, 1024 green, 1024 blue), each plane row-major 32x32.
inline LabeledDataset decode_cifar10_binary(const std::string& buf, const std::string& origin) {
  constexpr std::size_t kRecord = 3073;
  constexpr int kSide = 32;
  if (buf.empty()) throw EmptyDatasetError("cifar10: empty file: " + origin);
  if (buf.size() % kRecord != 0)
    throw FormatError("cifar10: length " + std::to_string(buf.size()) +
                          " is not a multiple of 3073",
                      static_cast<long long>(buf.size() - buf.size() % kRecord));

  LabeledDataset data;
  data.class_count = 10;
  data.provenance = "cifar10:" + origin;
  const std::size_t records = buf.size() / kRecord;
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * kRecord;
    const int label = static_cast<unsigned char>(buf[base]);
    if (label > 9)
      throw FormatError("cifar10: label byte " + std::to_string(label) + " out of range",
                        static_cast<long long>(base));
    Image x(kSide, kSide, 3);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < kSide; ++y)
        for (int xcol = 0; xcol < kSide; ++xcol) {
          const std::size_t src = base + 1 + static_cast<std::size_t>(ch) * 1024 + y * kSide + xcol;
          x.at(y, xcol, ch) = static_cast<unsigned char>(buf[src]) / 255.0;
        }
    data.images.push_back(std::move(x));
    data.labels.push_back(label);
  }
  data.validate();
  return data;
}

inline LabeledDataset load_cifar10_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for reading: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_cifar10_binary(buf, path);
}

}  // namespace bbx
