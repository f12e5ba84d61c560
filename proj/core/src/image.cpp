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

#include "vitiseg/image.hpp"

#include <algorithm>
#include <cmath>

#include "vitiseg/errors.hpp"

namespace vitiseg {

namespace {

void require_positive(int w, int h, const char* op) {
  if (w < 1 || h < 1) {
    throw UsageError(std::string(op) + ": target size " + std::to_string(w) + "x" +
                     std::to_string(h) + " must be positive");
  }
}

std::uint8_t round_u8(Real v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

FloatImage to_float(const RasterImage& img) {
  FloatImage out(img.width, img.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        out.at(x, y, c) = static_cast<Real>(img.at(x, y, c));
      }
    }
  }
  return out;
}

RasterImage resize(const RasterImage& img, int w, int h) {
  require_positive(w, h, "resize");
  RasterImage out(w, h);
  const Real sx = static_cast<Real>(img.width) / w;
  const Real sy = static_cast<Real>(img.height) / h;
  for (int y = 0; y < h; ++y) {
    const Real fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const Real wy = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < w; ++x) {
      const Real fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const Real wx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const Real top = (1.0 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const Real bot = (1.0 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.at(x, y, c) = round_u8((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

MaskImage resize(const MaskImage& img, int w, int h) {
  require_positive(w, h, "resize");
  MaskImage out(w, h);
  const Real sx = static_cast<Real>(img.width) / w;
  const Real sy = static_cast<Real>(img.height) / h;
  for (int y = 0; y < h; ++y) {
    const int yi = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy)), 0, img.height - 1);
    for (int x = 0; x < w; ++x) {
      const int xi = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx)), 0, img.width - 1);
      out.at(x, y) = img.at(xi, yi);
    }
  }
  return out;
}

FloatImage normalize(const RasterImage& img) { return normalize(to_float(img)); }

FloatImage normalize(const FloatImage& img) {
  FloatImage out(img.width, img.height);
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  for (int c = 0; c < 3; ++c) {
    const Real* src = img.data.data() + c * plane;
    Real* dst = out.data.data() + c * plane;
    Real mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<Real>(plane);
    Real var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const Real d = src[i] - mean;
      var += d * d;
    }
    const Real sigma = std::sqrt(var / static_cast<Real>(plane));
    if (sigma < 1e-6) {
      for (std::size_t i = 0; i < plane; ++i) dst[i] = 0.0;
    } else {
      for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) / sigma;
    }
  }
  return out;
}

MaskImage binarize_mask(const MaskImage& gray, int threshold) {
  MaskImage out(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    out.pixels[i] = gray.pixels[i] >= threshold ? 255 : 0;
  }
  return out;
}

BinaryMask to_binary(const MaskImage& mask) {
  BinaryMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    out.labels[i] = mask.pixels[i] >= 128 ? 1 : 0;
  }
  return out;
}

MaskImage from_binary(const BinaryMask& mask) {
  MaskImage out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) {
    out.pixels[i] = mask.labels[i] ? 255 : 0;
  }
  return out;
}

Tensor image_to_tensor(const FloatImage& img) {
  Tensor t({1, 3, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), t.data());
  return t;
}

MaskImage probability_to_confidence(const Tensor& prob, int n, int c) {
  if (prob.ndim() != 4) {
    throw UsageError("probability_to_confidence: expected NCHW tensor, got " +
                     prob.shape_str());
  }
  const int h = prob.dim(2), w = prob.dim(3);
  MaskImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = round_u8(255.0 * prob.at(n, c, y, x));
    }
  }
  return out;
}

RasterImage overlay(const RasterImage& img, const MaskImage& truth, const MaskImage& pred) {
  if (truth.width != img.width || truth.height != img.height || pred.width != img.width ||
      pred.height != img.height) {
    throw UsageError("overlay: image/mask dimension mismatch");
  }
  static constexpr std::uint8_t kRed[3] = {255, 0, 0};
  static constexpr std::uint8_t kPink[3] = {255, 105, 180};
  static constexpr std::uint8_t kBlue[3] = {0, 0, 255};
  RasterImage out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const bool t = truth.at(x, y) >= 128;
      const bool p = pred.at(x, y) >= 128;
      const std::uint8_t* tint = nullptr;
      if (t && p) {
        tint = kRed;
      } else if (!t && p) {
        tint = kPink;
      } else if (t && !p) {
        tint = kBlue;
      }
      if (tint) {
        for (int c = 0; c < 3; ++c) {
          out.at(x, y, c) = static_cast<std::uint8_t>((img.at(x, y, c) + tint[c] + 1) / 2);
        }
      }
    }
  }
  return out;
}

}  // namespace vitiseg
