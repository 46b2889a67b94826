#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bbx/dataset.hpp"
#include "bbx/errors.hpp"
#include "bbx/image.hpp"

namespace bbx {

inline std::string encode_ppm(const Image& x) {
  if (x.channels != 3) throw ShapeError("ppm: P6 requires a 3-channel image");
  if (!x.valid()) throw PreconditionError("ppm: image violates the [0,1] invariant");
  std::string out = "P6\n" + std::to_string(x.width) + " " + std::to_string(x.height) + "\n255\n";
  out.reserve(out.size() + x.data.size());
  for (double v : x.data)
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5))));
  return out;
}

namespace detail {

// Reads one whitespace-delimited header token, skipping '#' comments.
inline std::string ppm_token(const std::string& buf, std::size_t& at) {
  while (at < buf.size()) {
    const unsigned char c = static_cast<unsigned char>(buf[at]);
    if (c == '#') {
      while (at < buf.size() && buf[at] != '\n') ++at;
    } else if (std::isspace(c)) {
      ++at;
    } else {
      break;
    }
  }
  const std::size_t start = at;
  while (at < buf.size() && !std::isspace(static_cast<unsigned char>(buf[at])) && buf[at] != '#')
    ++at;
  if (at == start)
    throw FormatError("ppm: truncated header", static_cast<long long>(start));
  return buf.substr(start, at - start);
}

inline int ppm_int(const std::string& buf, std::size_t& at, const char* what) {
  const std::size_t start = at;
  const std::string tok = ppm_token(buf, at);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError(std::string("ppm: bad ") + what + " '" + tok + "'",
                      static_cast<long long>(start));
  }
}

}  // namespace detail

inline Image decode_ppm(const std::string& buf) {
  std::size_t at = 0;
  const std::string magic = detail::ppm_token(buf, at);
  if (magic != "P6") throw FormatError("ppm: bad magic '" + magic + "'", 0);
  const int width = detail::ppm_int(buf, at, "width");
  const int height = detail::ppm_int(buf, at, "height");
  const std::size_t maxval_at = at;
  const int maxval = detail::ppm_int(buf, at, "maxval");
  if (maxval != 255)
    throw FormatError("ppm: unsupported maxval " + std::to_string(maxval),
                      static_cast<long long>(maxval_at));
  if (width == 0 || height == 0) throw FormatError("ppm: zero image dimension", 0);
  if (at >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[at])))
    throw FormatError("ppm: missing whitespace before pixel data", static_cast<long long>(at));
  ++at;  // exactly one whitespace byte separates header and payload

  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (buf.size() - at < need)
    throw FormatError("ppm: truncated pixel data", static_cast<long long>(buf.size()));
  Image x(height, width, 3);
  for (std::size_t i = 0; i < need; ++i)
    x.data[i] = static_cast<unsigned char>(buf[at + i]) / 255.0;
  return x;
}

inline void write_ppm(const Image& x, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  const std::string buf = encode_ppm(x);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("short write: " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for reading: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(buf);
}

// Directory convention: <root>/<class_index>/<name>.ppm. Class directories
// must be consecutive integers starting at 0; files load in name order.
inline LabeledDataset load_ppm_directory(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw FormatError("ppm dataset: not a directory: " + root);

  std::vector<int> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(),
                                     [](unsigned char c) { return std::isdigit(c); }))
      throw FormatError("ppm dataset: non-numeric class directory '" + name + "'");
    classes.push_back(std::stoi(name));
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw EmptyDatasetError("ppm dataset: no class directories under " + root);
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] != static_cast<int>(i))
      throw FormatError("ppm dataset: class directories must be 0..K-1, missing " +
                        std::to_string(i));

  LabeledDataset data;
  data.class_count = static_cast<int>(classes.size());
  data.provenance = "ppm:" + root;
  for (int k : classes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / std::to_string(k)))
      if (entry.is_regular_file() && entry.path().extension() == ".ppm")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      data.images.push_back(read_ppm(f.string()));
      data.labels.push_back(k);
    }
  }
  if (data.images.empty()) throw EmptyDatasetError("ppm dataset: no .ppm files under " + root);
  data.validate();
  return data;
}

}  // namespace bbx
