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

#include "vitiseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vitiseg/errors.hpp"

namespace vitiseg {

AugmentParams AugmentParams::identity() {
  AugmentParams p;
  p.rotation_deg_max = 0.0;
  p.shift_frac = 0.0;
  p.h_flip = false;
  p.v_flip = false;
  p.zoom_lo = p.zoom_hi = 1.0;
  p.brightness_lo = p.brightness_hi = 1.0;
  return p;
}

void AugmentParams::validate() const {
  if (rotation_deg_max < 0.0 || rotation_deg_max > 360.0) {
    throw ConfigError("augment: rotation_deg_max out of [0, 360]");
  }
  if (shift_frac < 0.0 || shift_frac >= 0.5) {
    throw ConfigError("augment: shift_frac out of [0, 0.5)");
  }
  if (zoom_lo > 1.0 || zoom_hi < 1.0 || zoom_lo <= 0.0) {
    throw ConfigError("augment: zoom range must contain 1.0 and be positive");
  }
  if (brightness_lo > 1.0 || brightness_hi < 1.0 || brightness_lo < 0.0) {
    throw ConfigError("augment: brightness range must contain 1.0 and be nonnegative");
  }
}

std::pair<FloatImage, MaskImage> augment(const FloatImage& img, const MaskImage& mask,
                                         const AugmentParams& params, Rng& rng) {
  if (img.width != mask.width || img.height != mask.height) {
    throw UsageError("augment: image " + std::to_string(img.width) + "x" +
                     std::to_string(img.height) + " vs mask " + std::to_string(mask.width) +
                     "x" + std::to_string(mask.height));
  }
  params.validate();

  const Real theta =
      rng.uniform(0.0, params.rotation_deg_max) * std::numbers::pi_v<Real> / 180.0;
  const Real shift_x = rng.uniform(-params.shift_frac, params.shift_frac) * img.width;
  const Real shift_y = rng.uniform(-params.shift_frac, params.shift_frac) * img.height;
  const bool flip_h = params.h_flip && rng.coin();
  const bool flip_v = params.v_flip && rng.coin();
  const Real zoom = rng.uniform(params.zoom_lo, params.zoom_hi);
  const Real brightness = rng.uniform(params.brightness_lo, params.brightness_hi);

  const int w = img.width, h = img.height;
  const Real cx = (w - 1) * 0.5;
  const Real cy = (h - 1) * 0.5;
  const Real cos_t = std::cos(theta);
  const Real sin_t = std::sin(theta);

  FloatImage out_img(w, h);
  MaskImage out_mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Invert flip -> shift -> zoom -> rotate to find the source sample.
      Real qx = flip_h ? (w - 1) - static_cast<Real>(x) : static_cast<Real>(x);
      Real qy = flip_v ? (h - 1) - static_cast<Real>(y) : static_cast<Real>(y);
      qx -= cx + shift_x;
      qy -= cy + shift_y;
      qx /= zoom;
      qy /= zoom;
      const Real sx = cos_t * qx + sin_t * qy + cx;
      const Real sy = -sin_t * qx + cos_t * qy + cy;

      const int nx = static_cast<int>(std::floor(sx + 0.5));
      const int ny = static_cast<int>(std::floor(sy + 0.5));
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) {
        out_mask.at(x, y) = mask.at(nx, ny);
      }

      if (sx < 0.0 || sx > w - 1 || sy < 0.0 || sy > h - 1) continue;
      const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const Real wx = sx - x0;
      const Real wy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        const Real top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const Real bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out_img.at(x, y, c) =
            std::clamp(((1.0 - wy) * top + wy * bot) * brightness, 0.0, 255.0);
      }
    }
  }
  return {std::move(out_img), std::move(out_mask)};
}

}  // namespace vitiseg
