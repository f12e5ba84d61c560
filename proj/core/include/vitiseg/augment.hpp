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

#ifndef VITISEG_AUGMENT_HPP_
#define VITISEG_AUGMENT_HPP_

#include <utility>

#include "vitiseg/image.hpp"
#include "vitiseg/rng.hpp"

namespace vitiseg {

struct AugmentParams {
  Real rotation_deg_max = 180.0;
  Real shift_frac = 0.05;
  bool h_flip = true;
  bool v_flip = true;
  Real zoom_lo = 0.8;
  Real zoom_hi = 1.2;
  Real brightness_lo = 0.7;
  Real brightness_hi = 1.3;

  /// Collapses every range to the identity transform.
  static AugmentParams identity();
  void validate() const;
};

/// One random geometric + photometric transform applied identically to image
/// and mask. Draws from rng in a fixed order (rotation, shift x, shift y,
/// flip h, flip v, zoom, brightness; flip coins only when enabled), so a
/// seeded generator reproduces the exact pair.
///
/// Geometry: rotate about the image center, zoom, shift, then flips; sampled
/// by inverse mapping, bilinear for the image, nearest for the mask,
/// out-of-bounds filled with 0. Brightness multiplies the image only, on the
/// 0..255 scale, clamped to [0, 255] — augment therefore runs before
/// normalize.
std::pair<FloatImage, MaskImage> augment(const FloatImage& img, const MaskImage& mask,
                                         const AugmentParams& params, Rng& rng);

}  // namespace vitiseg

#endif  // VITISEG_AUGMENT_HPP_
