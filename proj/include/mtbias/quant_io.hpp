#pragma once

// MTBQ quantized weight file. Mirrors MTBW:
//   magic "MTBQ", version u32 LE, tensor count u32 LE;
//   per tensor (lexicographic name order):
//     name length u16 LE, UTF-8 name, rank u8, dims u32 LE each,
//     scheme u8 (0 = symmetric per-channel, 1 = asymmetric per-tensor),
//     scale count u32 LE + float32 LE scales,
//     zero-point count u32 LE + int32 LE zero points,
//     int8 payload (row-major);
//   trailing compact JSON {"activations": {site: {scale, zero_point}},
//   "group_of": {...}, "layer_of": {...}}.

#include <string>

#include <nlohmann/json.hpp>

#include "mtbias/quantize.hpp"
#include "mtbias/weight_io.hpp"

namespace mtbias {

inline std::string quantized_to_bytes(const QuantizedModel& model) {
  std::string out;
  out += "MTBQ";
  detail::put_u32(out, kWeightFormatVersion);
  detail::put_u32(out, static_cast<uint32_t>(model.weights.size()));
  for (const auto& [name, qt] : model.weights) {
    qt.validate();
    detail::put_u16(out, static_cast<uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(qt.shape.size()));
    for (uint32_t d : qt.shape) detail::put_u32(out, d);
    out.push_back(qt.per_channel ? '\x00' : '\x01');
    detail::put_u32(out, static_cast<uint32_t>(qt.scales.size()));
    for (float s : qt.scales) detail::put_f32(out, s);
    detail::put_u32(out, static_cast<uint32_t>(qt.zero_points.size()));
    for (int32_t z : qt.zero_points) detail::put_u32(out, static_cast<uint32_t>(z));
    for (int8_t q : qt.q) out.push_back(static_cast<char>(q));
  }
  nlohmann::json tail;
  auto& acts = tail["activations"] = nlohmann::json::object();
  for (const auto& [site, ap] : model.activations)
    acts[site] = {{"scale", ap.scale}, {"zero_point", ap.zero_point}};
  auto& groups = tail["group_of"] = nlohmann::json::object();
  auto& layers = tail["layer_of"] = nlohmann::json::object();
  for (const auto& [name, g] : model.group_of) groups[name] = to_string(g);
  for (const auto& [name, l] : model.layer_of) layers[name] = l;
  out += tail.dump();
  return out;
}

inline QuantizedModel quantized_from_bytes(std::string_view bytes, const std::string& source) {
  detail::ByteReader r{bytes, 0, source};
  if (r.bytes(4, "magic") != "MTBQ") throw schema_error(source + ": malformed header (bad magic)");
  uint32_t version = r.u32("version");
  if (version != kWeightFormatVersion)
    throw schema_error(source + ": unsupported quantized format version " + std::to_string(version));
  uint32_t count = r.u32("tensor count");

  QuantizedModel model;
  std::string prev_name;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = r.u16("name length");
    std::string name = r.bytes(name_len, "tensor name");
    if (name.empty()) r.fail("empty tensor name");
    if (i > 0 && !(prev_name < name))
      throw schema_error(source + ": tensors not in lexicographic name order");
    prev_name = name;
    QuantizedTensor qt;
    uint8_t rank = r.u8("rank");
    if (rank == 0) throw schema_error(source + ": tensor '" + name + "' has rank 0");
    qt.shape.resize(rank);
    for (auto& d : qt.shape) {
      d = r.u32("dimension");
      if (d == 0) throw schema_error(source + ": tensor '" + name + "' has a zero dimension");
    }
    qt.per_channel = r.u8("scheme") == 0;
    uint32_t n_scales = r.u32("scale count");
    qt.scales.resize(n_scales);
    for (auto& s : qt.scales) s = r.f32("scale");
    uint32_t n_zps = r.u32("zero-point count");
    qt.zero_points.resize(n_zps);
    for (auto& z : qt.zero_points) z = static_cast<int32_t>(r.u32("zero point"));
    uint64_t numel = 1;
    for (uint32_t d : qt.shape) numel *= d;
    if (numel > r.rest().size())
      throw schema_error(source + ": tensor '" + name + "' declares more elements than the payload holds");
    std::string payload = r.bytes(static_cast<size_t>(numel), "int8 payload");
    qt.q.assign(payload.begin(), payload.end());
    try {
      qt.validate();
    } catch (const error& e) {
      throw schema_error(source + ": tensor '" + name + "': " + e.what());
    }
    model.weights.emplace(std::move(name), std::move(qt));
  }

  nlohmann::json tail;
  try {
    tail = nlohmann::json::parse(r.rest());
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(source + ": bad trailing JSON: " + e.what());
  }
  if (!tail.is_object() || !tail.contains("activations") || !tail.contains("group_of") ||
      !tail.contains("layer_of"))
    throw schema_error(source + ": trailing JSON must hold activations, group_of and layer_of");
  for (auto& [site, ap] : tail["activations"].items())
    model.activations[site] = {ap.at("scale").get<float>(), ap.at("zero_point").get<int32_t>()};
  for (auto& [name, g] : tail["group_of"].items())
    model.group_of[name] = param_group_from_string(g.get<std::string>());
  for (auto& [name, l] : tail["layer_of"].items()) model.layer_of[name] = l.get<std::string>();
  return model;
}

inline void save_quantized(const QuantizedModel& model, const std::string& path) {
  detail::write_file_bytes(path, quantized_to_bytes(model));
}

inline QuantizedModel load_quantized(const std::string& path) {
  return quantized_from_bytes(detail::read_file_bytes(path), path);
}

// Reconstructs a float WeightSet from a quantized model (simulated
// quantization for the audit pipeline).
inline WeightSet dequantize_model(const QuantizedModel& model) {
  WeightSet ws;
  for (const auto& [name, qt] : model.weights) ws.params[name] = dequantize(qt);
  ws.layer_of = model.layer_of;
  ws.group_of = model.group_of;
  ws.validate();
  return ws;
}

}  // namespace mtbias
