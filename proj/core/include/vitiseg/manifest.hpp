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

#ifndef VITISEG_MANIFEST_HPP_
#define VITISEG_MANIFEST_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vitiseg/tensor.hpp"

namespace vitiseg {

struct ManifestRecord {
  std::string image_id;
  std::string image_path;
  std::string mask_path;
  std::string split;  // train | val | test
};

struct Manifest {
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> split(const std::string& name) const;
  std::size_t size() const { return records.size(); }
};

/// CSV with required header `image_id,image_path,mask_path,split`. Relative
/// paths resolve against the manifest's directory. Duplicate ids, malformed
/// rows, bad split values, or missing referenced files → DataError
/// (file checks skipped when check_files is false).
Manifest load_manifest(const std::string& path, bool check_files = true);

/// Writes paths exactly as stored.
void save_manifest(const Manifest& manifest, const std::string& path);

/// Deterministic Fisher-Yates shuffle by seed, then floor-allocated counts
/// with every remainder going to train; record order is preserved, only the
/// split fields change. Ratios must sum to 1 (±1e-9); fewer than 3 records
/// is an error.
Manifest split_dataset(const Manifest& manifest, std::array<Real, 3> ratios,
                       std::uint64_t seed);

}  // namespace vitiseg

#endif  // VITISEG_MANIFEST_HPP_
