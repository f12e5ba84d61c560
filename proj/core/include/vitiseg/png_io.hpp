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

#ifndef VITISEG_PNG_IO_HPP_
#define VITISEG_PNG_IO_HPP_

#include <string>

#include "vitiseg/image.hpp"

namespace vitiseg {

/// 8-bit PNG decode. Grayscale/palette/alpha inputs are expanded or stripped
/// to plain RGB; 16-bit files are rejected with a DataError naming the path.
RasterImage load_image(const std::string& path);

/// 8-bit grayscale decode; RGB(A) inputs collapse to Rec.601 luminance
/// (0.299 R + 0.587 G + 0.114 B, rounded), the same weights the watershed
/// surface uses.
MaskImage load_mask(const std::string& path);

void save_image(const RasterImage& img, const std::string& path);
void save_mask(const MaskImage& mask, const std::string& path);

}  // namespace vitiseg

#endif  // VITISEG_PNG_IO_HPP_
