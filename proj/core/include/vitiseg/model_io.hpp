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

#ifndef VITISEG_MODEL_IO_HPP_
#define VITISEG_MODEL_IO_HPP_

#include <string>

#include "vitiseg/unet.hpp"

namespace vitiseg {

/// Versioned binary model container, all integers and doubles little-endian:
///
///   magic "VSGM" | u32 version (1) | config block | u32 record count
///   | records | u64 FNV-1a checksum of everything before it
///
/// Config block: u32 input_size, u32 channel count + u32 each, u32
/// bottleneck_units, f64 width_factor, u32 variant-name length + bytes, f64
/// dropout_rate, u8 use_batch_norm, u32 se_reduction.
///
/// Record: u32 name length + bytes, u8 trainable, u32 ndim, u32 dims...,
/// f64 data. Batch-norm running stats ride along as frozen records named
/// <site>.running_mean / <site>.running_var.
void save_model(UNetModel& model, const std::string& path);

/// Rebuilds the model from the stored config and restores every parameter
/// bit-exactly. Bad magic, version or checksum mismatch, truncation, or
/// record/shape disagreement → DataError, nothing partially constructed.
UNetModel load_model(const std::string& path);

/// As load_model, but rejects a file whose stored config differs from
/// `expected` with an explicit config-mismatch DataError.
UNetModel load_model(const std::string& path, const UNetConfig& expected);

}  // namespace vitiseg

#endif  // VITISEG_MODEL_IO_HPP_
