#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbx/errors.hpp"
#include "bbx/model.hpp"

namespace bbx {

// Weight file layout ("BBFW"):
//   bytes 0..3   magic "BBFW"
//   byte  4      format version (1)
//   bytes 5..8   u32 little-endian header length N
//   bytes 9..9+N UTF-8 JSON header: architecture descriptor plus ordered
//                array names/shapes/dtype ("f32")
//   then         raw little-endian float32 values in header order
// Round-trips are bit-exact because weights are kept on the float32 grid.

inline nlohmann::json arch_to_json(const Architecture& a) {
  nlohmann::json j{{"kind", arch_kind_name(a.kind)},
                   {"input", {a.input_height, a.input_width, a.input_channels}},
                   {"classes", a.classes}};
  if (a.kind == ArchKind::Mlp) j["hidden"] = a.hidden;
  if (a.kind == ArchKind::Cnn) j["conv_filters"] = a.conv_filters;
  return j;
}

inline Architecture arch_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const auto input = j.at("input").get<std::vector<int>>();
  if (input.size() != 3) throw FormatError("architecture header: input must be [h,w,c]");
  const int classes = j.at("classes").get<int>();
  if (kind == "linear") return Architecture::linear(input[0], input[1], input[2], classes);
  if (kind == "mlp")
    return Architecture::mlp(input[0], input[1], input[2], classes,
                             j.at("hidden").get<std::vector<int>>());
  if (kind == "cnn")
    return Architecture::cnn(input[0], input[1], input[2], classes,
                             j.at("conv_filters").get<int>());
  throw FormatError("architecture header: unknown kind '" + kind + "'");
}

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32le(std::string& out, float f) {
  put_u32le(out, std::bit_cast<std::uint32_t>(f));
}

inline std::uint32_t get_u32le(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_weights(const ModelWeights& w) {
  nlohmann::json header;
  header["arch"] = arch_to_json(w.arch);
  header["arrays"] = nlohmann::json::array();
  for (const auto& a : w.arrays)
    header["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"dtype", "f32"}});
  const std::string header_text = header.dump();

  std::string out = "BBFW";
  out.push_back('\x01');
  detail::put_u32le(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& a : w.arrays)
    for (double v : a.values) detail::put_f32le(out, static_cast<float>(v));
  return out;
}

inline ModelWeights decode_weights(const std::string& buf) {
  if (buf.size() < 4 || buf.compare(0, 4, "BBFW") != 0)
    throw FormatError("weight file: bad magic", 0);
  if (buf.size() < 5) throw FormatError("weight file: missing version byte", 4);
  if (buf[4] != '\x01')
    throw FormatError("weight file: unsupported version " + std::to_string(buf[4]), 4);
  if (buf.size() < 9) throw FormatError("weight file: truncated header length", 5);
  const std::uint32_t header_len = detail::get_u32le(buf, 5);
  if (buf.size() < 9 + static_cast<std::size_t>(header_len))
    throw FormatError("weight file: truncated header", 9);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(9, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file: header is not valid JSON: ") + e.what(), 9);
  }

  ModelWeights w;
  std::size_t at = 9 + header_len;
  try {
    w.arch = arch_from_json(header.at("arch"));
    for (const auto& entry : header.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<int>>();
      if (entry.at("dtype").get<std::string>() != "f32")
        throw FormatError("weight file: unsupported dtype", 9);
      for (int d : a.shape)
        if (d <= 0) throw FormatError("weight file: non-positive shape entry", 9);
      const std::size_t n = a.count();
      if (buf.size() < at + 4 * n)
        throw FormatError("weight file: array '" + a.name +
                              "' payload shorter than its declared shape product",
                          static_cast<long long>(buf.size()));
      a.values.resize(n);
      for (std::size_t i = 0; i < n; ++i, at += 4) {
        const float f = std::bit_cast<float>(detail::get_u32le(buf, at));
        if (!std::isfinite(f))
          throw FormatError("weight file: non-finite value in array '" + a.name + "'",
                            static_cast<long long>(at));
        a.values[i] = static_cast<double>(f);
      }
      w.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file: bad header field: ") + e.what(), 9);
  }
  if (at != buf.size())
    throw FormatError("weight file: trailing bytes after declared arrays",
                      static_cast<long long>(at));

  // Header must describe exactly the arrays the architecture calls for.
  RngStream probe_rng(0);
  const ModelWeights expect = init_weights(w.arch, probe_rng);
  if (expect.arrays.size() != w.arrays.size())
    throw FormatError("weight file: array list does not match architecture", 9);
  for (std::size_t i = 0; i < w.arrays.size(); ++i)
    if (expect.arrays[i].name != w.arrays[i].name || expect.arrays[i].shape != w.arrays[i].shape)
      throw FormatError("weight file: array '" + w.arrays[i].name +
                            "' does not match the architecture descriptor",
                        9);
  return w;
}

inline void save_weights(const ModelWeights& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  const std::string buf = encode_weights(w);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("short write: " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for reading: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(buf);
}

}  // namespace bbx
