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

#ifndef VITISEG_SYNTH_HPP_
#define VITISEG_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <utility>

#include "vitiseg/image.hpp"
#include "vitiseg/manifest.hpp"

namespace vitiseg {

/// One synthetic sample: textured skin background with 1-3 brighter
/// elliptical lesions and the matching binary mask. Lesion fraction always
/// lands in (0, 0.5) via deterministic rejection from the same stream.
std::pair<RasterImage, MaskImage> synth_sample(int size, std::uint64_t seed);

/// Writes n samples (images/, masks/) plus manifest.csv under out_dir and
/// returns the manifest (all records initially in the train split — run
/// split_dataset to assign). Deterministic from seed.
Manifest synth_dataset(int n, int size, std::uint64_t seed, const std::string& out_dir);

}  // namespace vitiseg

#endif  // VITISEG_SYNTH_HPP_
