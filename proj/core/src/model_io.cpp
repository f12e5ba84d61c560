// Copyright 2026 The Vitiseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vitiseg/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "vitiseg/errors.hpp"

namespace vitiseg {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

struct Encoder {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) f64(t[i]);
  }
};

struct Decoder {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) {
    if (pos + n > bytes.size()) {
      throw DataError("model file '" + path + "' is truncated");
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return s;
  }
  Tensor tensor() {
    const std::uint32_t ndim = u32();
    if (ndim == 0 || ndim > 8) {
      throw DataError("model file '" + path + "': bad tensor rank");
    }
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      const std::uint32_t d = u32();
      if (d == 0 || d > (1u << 24)) {
        throw DataError("model file '" + path + "': bad tensor dimension");
      }
      shape.push_back(static_cast<int>(d));
      numel *= d;
    }
    need(numel * 8);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = f64();
    if (!t.all_finite()) {
      throw DataError("model file '" + path + "': non-finite parameter data");
    }
    return t;
  }
};

void encode_config(Encoder& enc, const UNetConfig& cfg) {
  enc.u32(static_cast<std::uint32_t>(cfg.input_size));
  enc.u32(static_cast<std::uint32_t>(cfg.decoder_channels.size()));
  for (int c : cfg.decoder_channels) enc.u32(static_cast<std::uint32_t>(c));
  enc.u32(static_cast<std::uint32_t>(cfg.bottleneck_units));
  enc.f64(cfg.width_factor);
  enc.str(to_string(cfg.variant));
  enc.f64(cfg.dropout_rate);
  enc.u8(cfg.use_batch_norm ? 1 : 0);
  enc.u32(static_cast<std::uint32_t>(cfg.se_reduction));
}

UNetConfig decode_config(Decoder& dec) {
  UNetConfig cfg;
  cfg.input_size = static_cast<int>(dec.u32());
  const std::uint32_t n = dec.u32();
  if (n != 5) throw DataError("model file '" + dec.path + "': bad decoder_channels count");
  cfg.decoder_channels.clear();
  for (std::uint32_t i = 0; i < n; ++i) cfg.decoder_channels.push_back(static_cast<int>(dec.u32()));
  cfg.bottleneck_units = static_cast<int>(dec.u32());
  cfg.width_factor = dec.f64();
  cfg.variant = variant_from_string(dec.str());
  cfg.dropout_rate = dec.f64();
  cfg.use_batch_norm = dec.u8() != 0;
  cfg.se_reduction = static_cast<int>(dec.u32());
  return cfg;
}

}  // namespace

void save_model(UNetModel& model, const std::string& path) {
  Encoder enc;
  enc.bytes.insert(enc.bytes.end(), kMagic, kMagic + 4);
  enc.u32(kVersion);
  encode_config(enc, model.config());

  const std::vector<Parameter*> params = model.parameters();
  const auto stats = model.batch_norm_stats();
  enc.u32(static_cast<std::uint32_t>(params.size() + 2 * stats.size()));
  for (const Parameter* p : params) {
    enc.str(p->name);
    enc.u8(p->trainable ? 1 : 0);
    enc.tensor(p->value);
  }
  for (const auto& [name, s] : stats) {
    enc.str(name + ".running_mean");
    enc.u8(0);
    enc.tensor(s->mean);
    enc.str(name + ".running_var");
    enc.u8(0);
    enc.tensor(s->var);
  }
  enc.u64(fnv1a64(enc.bytes.data(), enc.bytes.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(enc.bytes.data()),
            static_cast<std::streamsize>(enc.bytes.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

UNetModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw DataError("model file '" + path + "' is truncated");

  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)])
              << (8 * i);
  }
  const std::uint64_t actual = fnv1a64(bytes.data(), bytes.size() - 8);
  if (stored != actual) {
    throw DataError("model file '" + path + "': checksum mismatch (corrupt or truncated)");
  }

  Decoder dec{bytes, 0, path};
  char magic[4];
  dec.need(4);
  std::memcpy(magic, bytes.data(), 4);
  dec.pos = 4;
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("model file '" + path + "': bad magic (not a model container)");
  }
  const std::uint32_t version = dec.u32();
  if (version != kVersion) {
    throw DataError("model file '" + path + "': format version " + std::to_string(version) +
                    " unsupported (expected " + std::to_string(kVersion) + ")");
  }
  const UNetConfig cfg = decode_config(dec);

  Rng rng(0);
  UNetModel model(cfg, rng);
  std::unordered_map<std::string, Parameter*> by_name;
  for (Parameter* p : model.parameters()) by_name[p->name] = p;
  std::unordered_map<std::string, Tensor*> stat_by_name;
  for (const auto& [name, s] : model.batch_norm_stats()) {
    stat_by_name[name + ".running_mean"] = &s->mean;
    stat_by_name[name + ".running_var"] = &s->var;
  }

  const std::uint32_t records = dec.u32();
  if (records != by_name.size() + stat_by_name.size()) {
    throw DataError("model file '" + path + "': " + std::to_string(records) +
                    " records for a config expecting " +
                    std::to_string(by_name.size() + stat_by_name.size()));
  }
  for (std::uint32_t i = 0; i < records; ++i) {
    const std::string name = dec.str();
    const bool trainable = dec.u8() != 0;
    Tensor value = dec.tensor();
    if (auto it = by_name.find(name); it != by_name.end()) {
      if (!value.same_shape(it->second->value)) {
        throw DataError("model file '" + path + "': parameter '" + name + "' has shape " +
                        value.shape_str() + ", expected " + it->second->value.shape_str());
      }
      it->second->value = std::move(value);
      it->second->trainable = trainable;
      it->second->grad = Tensor::zeros(it->second->value.shape());
      by_name.erase(it);
    } else if (auto st = stat_by_name.find(name); st != stat_by_name.end()) {
      if (!value.same_shape(*st->second)) {
        throw DataError("model file '" + path + "': stats '" + name + "' shape mismatch");
      }
      *st->second = std::move(value);
      stat_by_name.erase(st);
    } else {
      throw DataError("model file '" + path + "': unknown or duplicate record '" + name + "'");
    }
  }
  if (!by_name.empty() || !stat_by_name.empty()) {
    throw DataError("model file '" + path + "': missing parameter records");
  }
  return model;
}

UNetModel load_model(const std::string& path, const UNetConfig& expected) {
  UNetModel model = load_model(path);
  if (!(model.config() == expected)) {
    throw DataError("model file '" + path + "': config mismatch (file has variant " +
                    to_string(model.config().variant) + ", input " +
                    std::to_string(model.config().input_size) + "; expected " +
                    to_string(expected.variant) + ", input " +
                    std::to_string(expected.input_size) + ")");
  }
  return model;
}

}  // namespace vitiseg
