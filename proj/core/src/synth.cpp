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

#include "vitiseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "vitiseg/errors.hpp"
#include "vitiseg/png_io.hpp"
#include "vitiseg/rng.hpp"

namespace vitiseg {

namespace {

struct Ellipse {
  Real cx, cy, a, b, cos_t, sin_t;

  /// Normalized squared radius; <= 1 inside.
  Real radius2(Real x, Real y) const {
    const Real dx = x - cx;
    const Real dy = y - cy;
    const Real u = (cos_t * dx + sin_t * dy) / a;
    const Real v = (-sin_t * dx + cos_t * dy) / b;
    return u * u + v * v;
  }
};

}  // namespace

std::pair<RasterImage, MaskImage> synth_sample(int size, std::uint64_t seed) {
  if (size < 16) throw ConfigError("synth: size must be >= 16");
  Rng rng(seed);

  // Skin tone with per-image jitter and two low-frequency shading waves.
  const Real base_r = 196.0 + rng.uniform(-20.0, 20.0);
  const Real base_g = 150.0 + rng.uniform(-16.0, 16.0);
  const Real base_b = 130.0 + rng.uniform(-14.0, 14.0);
  const Real wave1_freq = rng.uniform(1.0, 3.0) * std::numbers::pi_v<Real> / size;
  const Real wave1_phase = rng.uniform(0.0, 2.0 * std::numbers::pi_v<Real>);
  const Real wave2_freq = rng.uniform(1.0, 3.0) * std::numbers::pi_v<Real> / size;
  const Real wave2_phase = rng.uniform(0.0, 2.0 * std::numbers::pi_v<Real>);

  std::vector<Ellipse> lesions;
  MaskImage mask(size, size);
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 100) throw ConfigError("synth: lesion sampling failed to converge");
    lesions.clear();
    const int count = 1 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < count; ++i) {
      Ellipse e;
      e.cx = rng.uniform(0.15, 0.85) * size;
      e.cy = rng.uniform(0.15, 0.85) * size;
      e.a = rng.uniform(0.08, 0.22) * size;
      e.b = rng.uniform(0.08, 0.22) * size;
      const Real theta = rng.uniform(0.0, std::numbers::pi_v<Real>);
      e.cos_t = std::cos(theta);
      e.sin_t = std::sin(theta);
      lesions.push_back(e);
    }
    std::size_t positive = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        bool inside = false;
        for (const Ellipse& e : lesions) {
          if (e.radius2(static_cast<Real>(x), static_cast<Real>(y)) <= 1.0) {
            inside = true;
            break;
          }
        }
        mask.at(x, y) = inside ? 255 : 0;
        positive += inside;
      }
    }
    const Real fraction = static_cast<Real>(positive) / (static_cast<Real>(size) * size);
    if (fraction > 0.0 && fraction < 0.5) break;
  }

  RasterImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Real shade = 8.0 * std::cos(wave1_freq * x + wave1_phase) +
                         8.0 * std::cos(wave2_freq * y + wave2_phase);
      Real r = base_r + shade, g = base_g + shade, b = base_b + shade;
      // Depigmentation: blend toward pale, full strength at the lesion core,
      // fading out over the outer 25% of the radius.
      Real w = 0.0;
      for (const Ellipse& e : lesions) {
        const Real rad = std::sqrt(e.radius2(static_cast<Real>(x), static_cast<Real>(y)));
        w = std::max(w, std::clamp((1.0 - rad) / 0.25, 0.0, 1.0));
      }
      if (w > 0.0) {
        r += w * (236.0 - r);
        g += w * (226.0 - g);
        b += w * (218.0 - b);
      }
      const Real noise = rng.normal() * 4.0;
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(r + noise, 0.0, 255.0));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(g + noise, 0.0, 255.0));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(b + noise, 0.0, 255.0));
    }
  }
  return {std::move(img), std::move(mask)};
}

Manifest synth_dataset(int n, int size, std::uint64_t seed, const std::string& out_dir) {
  if (n < 3) throw ConfigError("synth: need n >= 3, got " + std::to_string(n));
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (ec) throw DataError("synth: cannot create output directories under '" + out_dir + "'");

  Manifest manifest;
  char idbuf[32];
  for (int i = 0; i < n; ++i) {
    std::snprintf(idbuf, sizeof(idbuf), "img_%04d", i);
    const std::string id = idbuf;
    auto [img, mask] = synth_sample(size, derive_seed(seed, id, 0));
    const std::string image_rel = "images/" + id + ".png";
    const std::string mask_rel = "masks/" + id + ".png";
    save_image(img, (fs::path(out_dir) / image_rel).string());
    save_mask(mask, (fs::path(out_dir) / mask_rel).string());
    manifest.records.push_back({id, image_rel, mask_rel, "train"});
  }
  save_manifest(manifest, (fs::path(out_dir) / "manifest.csv").string());
  for (ManifestRecord& rec : manifest.records) {
    rec.image_path = (fs::path(out_dir) / rec.image_path).string();
    rec.mask_path = (fs::path(out_dir) / rec.mask_path).string();
  }
  return manifest;
}

}  // namespace vitiseg
