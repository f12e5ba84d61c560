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

#ifndef VITISEG_IMAGE_HPP_
#define VITISEG_IMAGE_HPP_

#include <cstdint>
#include <vector>

#include "vitiseg/metrics.hpp"
#include "vitiseg/tensor.hpp"

namespace vitiseg {

/// 8-bit RGB image, interleaved row-major (the PNG wire layout).
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size = 3 * width * height

  RasterImage() = default;
  RasterImage(int w, int h)
      : width(w), height(h), pixels(static_cast<std::size_t>(3) * w * h, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// 8-bit grayscale raster. Doubles as binary mask carrier ({0,255} after
/// binarize_mask) and as confidence map (full 0..255 range).
struct MaskImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  MaskImage() = default;
  MaskImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

/// Float image, channel-planar (data[c*H*W + y*W + x], 3 channels). Holds
/// 0..255-scale values between decode and normalize, z-scores afterwards.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<Real> data;  // size = 3 * width * height

  FloatImage() = default;
  FloatImage(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0.0) {}

  Real& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  Real at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

FloatImage to_float(const RasterImage& img);

/// Bilinear resampling with the half-pixel-center mapping
/// src = (dst + 0.5) * (src_size / dst_size) - 0.5. Resizing to the original
/// size is an exact identity.
RasterImage resize(const RasterImage& img, int w, int h);
/// Nearest-neighbor flavour, src = floor((dst + 0.5) * scale); keeps masks
/// strictly binary. Integer upscaling replicates pixels into exact blocks.
MaskImage resize(const MaskImage& img, int w, int h);

/// Per-channel per-image z-score. A channel with sigma < 1e-6 maps to zeros.
/// Idempotent: normalizing a normalized image is a no-op within tolerance.
FloatImage normalize(const RasterImage& img);
FloatImage normalize(const FloatImage& img);

/// value >= threshold -> 255, else 0.
MaskImage binarize_mask(const MaskImage& gray, int threshold = 128);

BinaryMask to_binary(const MaskImage& mask);
MaskImage from_binary(const BinaryMask& mask);

/// NCHW staging for the network: [1,3,H,W] from a float image, and the
/// positive-probability plane back to 8-bit confidence (value =
/// floor(255p + 0.5)).
Tensor image_to_tensor(const FloatImage& img);
MaskImage probability_to_confidence(const Tensor& prob, int n = 0, int c = 0);

/// Error visualization: true positives tinted red (255,0,0), false positives
/// pink (255,105,180), false negatives blue (0,0,255), alpha 0.5,
/// round-half-up. True negatives pass through.
RasterImage overlay(const RasterImage& img, const MaskImage& truth, const MaskImage& pred);

}  // namespace vitiseg

#endif  // VITISEG_IMAGE_HPP_
