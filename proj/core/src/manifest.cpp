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

#include "vitiseg/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "vitiseg/errors.hpp"
#include "vitiseg/rng.hpp"

namespace vitiseg {

namespace {

constexpr const char* kHeader = "image_id,image_path,mask_path,split";

bool valid_split(const std::string& s) { return s == "train" || s == "val" || s == "test"; }

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::vector<ManifestRecord> Manifest::split(const std::string& name) const {
  std::vector<ManifestRecord> out;
  for (const ManifestRecord& r : records) {
    if (r.split == name) out.push_back(r);
  }
  return out;
}

Manifest load_manifest(const std::string& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw DataError("manifest '" + path + "': first line must be '" + kHeader + "'");
  }

  Manifest manifest;
  std::unordered_set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 4) {
      throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                      ": expected 4 comma-separated fields, got " +
                      std::to_string(fields.size()));
    }
    ManifestRecord rec{fields[0], fields[1], fields[2], fields[3]};
    if (rec.image_id.empty()) {
      throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                      ": empty image_id");
    }
    if (!ids.insert(rec.image_id).second) {
      throw DataError("manifest '" + path + "': duplicate image_id '" + rec.image_id + "'");
    }
    if (!valid_split(rec.split)) {
      throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                      ": split '" + rec.split + "' not in {train, val, test}");
    }
    for (std::string* p : {&rec.image_path, &rec.mask_path}) {
      std::filesystem::path fp(*p);
      if (fp.is_relative()) *p = (base / fp).string();
      if (check_files && !std::filesystem::exists(*p)) {
        throw DataError("manifest '" + path + "' line " + std::to_string(lineno) +
                        ": file not found: " + *p);
      }
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << kHeader << "\n";
  for (const ManifestRecord& r : manifest.records) {
    out << r.image_id << ',' << r.image_path << ',' << r.mask_path << ',' << r.split << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Manifest split_dataset(const Manifest& manifest, std::array<Real, 3> ratios,
                       std::uint64_t seed) {
  const Real sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: ratios sum to " + std::to_string(sum) + ", expected 1");
  }
  for (Real r : ratios) {
    if (r < 0.0) throw ConfigError("split: negative ratio");
  }
  const std::size_t n = manifest.records.size();
  if (n < 3) {
    throw DataError("split: need at least 3 records, got " + std::to_string(n));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_int(i + 1);
    std::swap(order[i], order[j]);
  }

  const auto n_train0 = static_cast<std::size_t>(std::floor(static_cast<Real>(n) * ratios[0]));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<Real>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<Real>(n) * ratios[2]));
  const std::size_t n_train = n_train0 + (n - n_train0 - n_val - n_test);

  Manifest out = manifest;
  for (std::size_t k = 0; k < n; ++k) {
    const char* split = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
    out.records[order[k]].split = split;
  }
  return out;
}

}  // namespace vitiseg
