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

#ifndef VITISEG_WATERSHED_HPP_
#define VITISEG_WATERSHED_HPP_

#include <cstdint>
#include <vector>

#include "vitiseg/image.hpp"
#include "vitiseg/metrics.hpp"

namespace vitiseg {

enum class Seed : std::uint8_t { kUnknown = 0, kNegative = 1, kPositive = 2 };

struct SeedMap {
  int width = 0;
  int height = 0;
  std::vector<Seed> labels;
  int negative_count = 0;
  int positive_count = 0;

  SeedMap() = default;
  SeedMap(int w, int h)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, Seed::kUnknown) {}

  Seed& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  Seed at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Flood surface; lower values flood first.
struct PriorityField {
  int width = 0;
  int height = 0;
  std::vector<Real> values;

  PriorityField() = default;
  PriorityField(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  Real& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  Real at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Confidence thresholds: NEGATIVE on 0-77, POSITIVE on 179-255, UNKNOWN
/// between.
SeedMap extract_seeds(const MaskImage& conf);

/// Sobel gradient magnitude. For the color image the surface is Rec.601
/// luminance; borders use edge replication.
PriorityField gradient_magnitude(const FloatImage& img);
PriorityField gradient_magnitude(const MaskImage& gray);

/// Meyer priority-flood from the seeds. Entries are keyed by (priority,
/// monotone insertion counter), so equal-priority fronts advance FIFO;
/// neighbors scan N,E,S,W (then NE,SE,SW,NW for connectivity 8); the first
/// front to reach a pixel keeps it; seed pixels keep their seed label.
///
/// One seed class absent: the present class claims every pixel. No seeds at
/// all: DataError (prediction unusable for refinement).
BinaryMask watershed_flood(const PriorityField& priority, const SeedMap& seeds,
                           int connectivity = 4);

struct RefineOptions {
  /// Flood the confidence map's own gradient instead of the image gradient.
  bool flood_on_confidence = false;
  int connectivity = 4;
};

struct RefineResult {
  MaskImage mask;
  /// One-sided or empty seeds: output fell back to binarize(conf, 128).
  bool fallback = false;
  int negative_seeds = 0;
  int positive_seeds = 0;
};

/// CNN post-processing: seeds from the confidence map, flood, binary mask.
RefineResult refine(const MaskImage& conf, const FloatImage& img,
                    const RefineOptions& options = {});

}  // namespace vitiseg

#endif  // VITISEG_WATERSHED_HPP_
