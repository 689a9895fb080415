#pragma once

// MTBW weight file:
//   magic "MTBW", version u32 LE, tensor count u32 LE;
//   per tensor (lexicographic name order):
//     name length u16 LE, UTF-8 name, rank u8, dims u32 LE each,
//     payload float32 LE values (row-major);
//   trailing UTF-8 JSON object {"group_of": {...}, "layer_of": {...}}
//   serialized compactly with sorted keys, running to end of file.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtbias/error.hpp"
#include "mtbias/tensor.hpp"

namespace mtbias {

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<uint32_t>(v));
}

struct ByteReader {
  std::string_view buf;
  size_t pos = 0;
  std::string source;  // for error messages

  [[noreturn]] void fail(const std::string& msg) const {
    throw schema_error(source + ": " + msg + " (at byte " + std::to_string(pos) + ")");
  }

  void need(size_t n, const char* what) {
    if (pos + n > buf.size()) fail(std::string("truncated file while reading ") + what);
  }

  uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<uint8_t>(buf[pos++]);
  }

  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return v;
  }

  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)])) << (8 * i);
    pos += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s(buf.substr(pos, n));
    pos += n;
    return s;
  }

  std::string_view rest() const { return buf.substr(pos); }
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw schema_error(path + ": cannot open file");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error(path + ": cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw error(path + ": write failed");
}

}  // namespace detail

inline constexpr uint32_t kWeightFormatVersion = 1;

inline std::string weights_to_bytes(const WeightSet& ws) {
  ws.validate();
  std::string out;
  out += "MTBW";
  detail::put_u32(out, kWeightFormatVersion);
  detail::put_u32(out, static_cast<uint32_t>(ws.params.size()));
  for (const auto& [name, t] : ws.params) {
    if (name.size() > 0xffff) throw error("tensor name too long: " + name);
    detail::put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    if (t.shape.size() > 0xff) throw error("tensor rank too large: " + name);
    out.push_back(static_cast<char>(t.shape.size()));
    for (uint32_t d : t.shape) detail::put_u32(out, d);
    for (float v : t.data) detail::put_f32(out, v);
  }
  nlohmann::json maps;
  auto& groups = maps["group_of"] = nlohmann::json::object();
  auto& layers = maps["layer_of"] = nlohmann::json::object();
  for (const auto& [name, g] : ws.group_of) groups[name] = to_string(g);
  for (const auto& [name, l] : ws.layer_of) layers[name] = l;
  out += maps.dump();
  return out;
}

inline WeightSet weights_from_bytes(std::string_view bytes, const std::string& source) {
  detail::ByteReader r{bytes, 0, source};
  if (r.bytes(4, "magic") != "MTBW") throw schema_error(source + ": malformed header (bad magic)");
  uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion)
    throw schema_error(source + ": unsupported weight format version " + std::to_string(version));
  uint32_t count = r.u32("tensor count");

  WeightSet ws;
  std::string prev_name;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = r.u16("name length");
    std::string name = r.bytes(name_len, "tensor name");
    if (name.empty()) r.fail("empty tensor name");
    if (i > 0 && !(prev_name < name))
      throw schema_error(source + ": tensors not in lexicographic name order ('" + name + "' after '" + prev_name + "')");
    prev_name = name;
    uint8_t rank = r.u8("rank");
    if (rank == 0) throw schema_error(source + ": tensor '" + name + "' has rank 0");
    std::vector<uint32_t> shape(rank);
    for (auto& d : shape) {
      d = r.u32("dimension");
      if (d == 0) throw schema_error(source + ": tensor '" + name + "' has a zero dimension");
    }
    uint64_t numel = 1;
    for (uint32_t d : shape) numel *= d;
    if (numel * 4 > r.rest().size())
      throw schema_error(source + ": tensor '" + name + "' declares more elements than the payload holds");
    std::vector<float> data(static_cast<size_t>(numel));
    for (auto& v : data) {
      v = r.f32("value");
      if (!std::isfinite(v))
        throw schema_error(source + ": tensor '" + name + "' contains a non-finite value");
    }
    ws.params.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }

  nlohmann::json maps;
  try {
    maps = nlohmann::json::parse(r.rest());
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(source + ": bad trailing layer/group JSON: " + e.what());
  }
  if (!maps.is_object() || !maps.contains("group_of") || !maps.contains("layer_of"))
    throw schema_error(source + ": trailing JSON must hold group_of and layer_of objects");
  for (auto& [name, g] : maps["group_of"].items()) {
    if (!ws.params.count(name))
      throw schema_error(source + ": group map names unknown tensor '" + name + "'");
    ws.group_of[name] = param_group_from_string(g.get<std::string>());
  }
  for (auto& [name, l] : maps["layer_of"].items()) {
    if (!ws.params.count(name))
      throw schema_error(source + ": layer map names unknown tensor '" + name + "'");
    ws.layer_of[name] = l.get<std::string>();
  }
  try {
    ws.validate();
  } catch (const error& e) {
    throw schema_error(source + ": " + e.what());
  }
  return ws;
}

inline void save_weights(const WeightSet& ws, const std::string& path) {
  detail::write_file_bytes(path, weights_to_bytes(ws));
}

inline WeightSet load_weights(const std::string& path) {
  return weights_from_bytes(detail::read_file_bytes(path), path);
}

}  // namespace mtbias
