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

#include "vitiseg/watershed.hpp"

#include <cmath>
#include <cstdint>
#include <queue>

#include "vitiseg/errors.hpp"

namespace vitiseg {

namespace {

constexpr int kNegativeMax = 77;
constexpr int kPositiveMin = 179;

template <typename At>
PriorityField sobel(int width, int height, At value) {
  auto clamped = [&](int x, int y) {
    x = x < 0 ? 0 : (x >= width ? width - 1 : x);
    y = y < 0 ? 0 : (y >= height ? height - 1 : y);
    return value(x, y);
  };
  PriorityField field(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Real tl = clamped(x - 1, y - 1), tc = clamped(x, y - 1), tr = clamped(x + 1, y - 1);
      const Real ml = clamped(x - 1, y), mr = clamped(x + 1, y);
      const Real bl = clamped(x - 1, y + 1), bc = clamped(x, y + 1), br = clamped(x + 1, y + 1);
      const Real gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const Real gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      field.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return field;
}

struct FloodEntry {
  Real priority;
  std::uint64_t seq;
  int idx;
  std::uint8_t label;
};

struct LaterEntry {
  bool operator()(const FloodEntry& a, const FloodEntry& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.seq > b.seq;
  }
};

}  // namespace

SeedMap extract_seeds(const MaskImage& conf) {
  SeedMap seeds(conf.width, conf.height);
  for (std::size_t i = 0; i < conf.pixels.size(); ++i) {
    const int v = conf.pixels[i];
    if (v <= kNegativeMax) {
      seeds.labels[i] = Seed::kNegative;
      ++seeds.negative_count;
    } else if (v >= kPositiveMin) {
      seeds.labels[i] = Seed::kPositive;
      ++seeds.positive_count;
    }
  }
  return seeds;
}

PriorityField gradient_magnitude(const FloatImage& img) {
  return sobel(img.width, img.height, [&](int x, int y) {
    return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  });
}

PriorityField gradient_magnitude(const MaskImage& gray) {
  return sobel(gray.width, gray.height,
               [&](int x, int y) { return static_cast<Real>(gray.at(x, y)); });
}

BinaryMask watershed_flood(const PriorityField& priority, const SeedMap& seeds,
                           int connectivity) {
  if (priority.width != seeds.width || priority.height != seeds.height) {
    throw UsageError("watershed_flood: priority " + std::to_string(priority.width) + "x" +
                     std::to_string(priority.height) + " vs seeds " +
                     std::to_string(seeds.width) + "x" + std::to_string(seeds.height));
  }
  if (connectivity != 4 && connectivity != 8) {
    throw ConfigError("watershed_flood: connectivity must be 4 or 8");
  }
  const int w = seeds.width, h = seeds.height;
  BinaryMask out(w, h);
  if (seeds.negative_count == 0 && seeds.positive_count == 0) {
    throw DataError("watershed_flood: no seeds at all, prediction unusable");
  }
  if (seeds.negative_count == 0 || seeds.positive_count == 0) {
    const std::uint8_t fill = seeds.positive_count > 0 ? 1 : 0;
    for (auto& v : out.labels) v = fill;
    return out;
  }

  // N, E, S, W first; diagonals NE, SE, SW, NW only at connectivity 8.
  static constexpr int kDx[8] = {0, 1, 0, -1, 1, 1, -1, -1};
  static constexpr int kDy[8] = {-1, 0, 1, 0, -1, 1, 1, -1};
  constexpr std::uint8_t kUnlabeled = 0xff;
  std::vector<std::uint8_t> label(static_cast<std::size_t>(w) * h, kUnlabeled);
  for (std::size_t i = 0; i < seeds.labels.size(); ++i) {
    if (seeds.labels[i] == Seed::kNegative) label[i] = 0;
    if (seeds.labels[i] == Seed::kPositive) label[i] = 1;
  }

  std::priority_queue<FloodEntry, std::vector<FloodEntry>, LaterEntry> queue;
  std::uint64_t seq = 0;
  auto enqueue_neighbors = [&](int x, int y, std::uint8_t lab) {
    for (int d = 0; d < connectivity; ++d) {
      const int nx = x + kDx[d];
      const int ny = y + kDy[d];
      if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
      const int nidx = ny * w + nx;
      if (label[static_cast<std::size_t>(nidx)] != kUnlabeled) continue;
      queue.push({priority.values[static_cast<std::size_t>(nidx)], seq++, nidx, lab});
    }
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t lab = label[static_cast<std::size_t>(y) * w + x];
      if (lab != kUnlabeled) enqueue_neighbors(x, y, lab);
    }
  }
  while (!queue.empty()) {
    const FloodEntry e = queue.top();
    queue.pop();
    if (label[static_cast<std::size_t>(e.idx)] != kUnlabeled) continue;
    label[static_cast<std::size_t>(e.idx)] = e.label;
    enqueue_neighbors(e.idx % w, e.idx / w, e.label);
  }

  for (std::size_t i = 0; i < label.size(); ++i) out.labels[i] = label[i];
  return out;
}

RefineResult refine(const MaskImage& conf, const FloatImage& img,
                    const RefineOptions& options) {
  if (conf.width != img.width || conf.height != img.height) {
    throw UsageError("refine: confidence " + std::to_string(conf.width) + "x" +
                     std::to_string(conf.height) + " vs image " + std::to_string(img.width) +
                     "x" + std::to_string(img.height));
  }
  RefineResult result;
  const SeedMap seeds = extract_seeds(conf);
  result.negative_seeds = seeds.negative_count;
  result.positive_seeds = seeds.positive_count;
  if (seeds.negative_count == 0 || seeds.positive_count == 0) {
    result.mask = binarize_mask(conf, 128);
    result.fallback = true;
    return result;
  }
  const PriorityField priority =
      options.flood_on_confidence ? gradient_magnitude(conf) : gradient_magnitude(img);
  BinaryMask labels = watershed_flood(priority, seeds, options.connectivity);
  result.mask = from_binary(labels);
  return result;
}

}  // namespace vitiseg
