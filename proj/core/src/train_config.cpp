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

#include "vitiseg/train_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vitiseg/errors.hpp"

namespace vitiseg {

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("config: lr must be nonnegative");
  if (lr_decay < 0.0) throw ConfigError("config: lr_decay must be nonnegative");
  if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be nonnegative");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("config: dropout out of [0, 1)");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (net.use_batch_norm && batch_size < 2) {
    throw ConfigError("config: batch_size must be >= 2 with batch norm enabled");
  }
  net.validate();
  augment.validate();
}

void apply_paper224_preset(TrainConfig& config) {
  config.lr = 0.000336375;
  config.lr_decay = 8.806e-5;
  config.weight_decay = 0.000158;
  config.dropout = 0.0136;
  config.epochs = 165;
  config.batch_size = 8;
  config.net.input_size = 224;
  config.net.width_factor = 1.0;
  config.net.variant = EncoderVariant::kInceptionResnetMini;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

Real parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const Real v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number '" + value + "' for key '" + key + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config: bad integer '" + value + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config: bad bool '" + value + "' for key '" + key +
                    "' (use true/false)");
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "lr") cfg.lr = parse_real(key, value);
  else if (key == "lr_decay") cfg.lr_decay = parse_real(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_real(key, value);
  else if (key == "dropout") cfg.dropout = parse_real(key, value);
  else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "input_size") cfg.net.input_size = static_cast<int>(parse_int(key, value));
  else if (key == "width_factor") cfg.net.width_factor = parse_real(key, value);
  else if (key == "variant") cfg.net.variant = variant_from_string(value);
  else if (key == "use_batch_norm") cfg.net.use_batch_norm = parse_bool(key, value);
  else if (key == "se_reduction") cfg.net.se_reduction = static_cast<int>(parse_int(key, value));
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "combine") cfg.combine = parse_bool(key, value);
  else if (key == "early_stop_train_ji") cfg.early_stop_train_ji = parse_real(key, value);
  else if (key == "rotation_deg_max") cfg.augment.rotation_deg_max = parse_real(key, value);
  else if (key == "shift_frac") cfg.augment.shift_frac = parse_real(key, value);
  else if (key == "h_flip") cfg.augment.h_flip = parse_bool(key, value);
  else if (key == "v_flip") cfg.augment.v_flip = parse_bool(key, value);
  else if (key == "zoom_lo") cfg.augment.zoom_lo = parse_real(key, value);
  else if (key == "zoom_hi") cfg.augment.zoom_hi = parse_real(key, value);
  else if (key == "brightness_lo") cfg.augment.brightness_lo = parse_real(key, value);
  else if (key == "brightness_hi") cfg.augment.brightness_hi = parse_real(key, value);
  else if (key == "loss") {
    if (value != "bce_ji") throw ConfigError("config: only loss = bce_ji is supported");
  } else if (key == "optimizer") {
    if (value != "nadam") throw ConfigError("config: only optimizer = nadam is supported");
  } else if (key == "preset") {
    if (value != "paper-224") throw ConfigError("config: unknown preset '" + value + "'");
    apply_paper224_preset(cfg);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

TrainConfig parse_stream(std::istream& in, TrainConfig cfg, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(origin + " line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    apply_key(cfg, key, value);
  }
  return cfg;
}

}  // namespace

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_stream(in, std::move(base), "config '" + path + "'");
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  return parse_stream(in, std::move(base), "config");
}

}  // namespace vitiseg
