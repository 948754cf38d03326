// Copyright (C) 2026 The Filtra Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "filtra/matrix.hpp"

namespace filtra {

// One affine map shared by every cell of an embedding table and by the
// queries scored against it: q = round((x - global_min) * scale) - 128.
struct QuantParams {
  float global_min = 0.0f;
  float global_max = 1.0f;
  float scale = 255.0f;

  static QuantParams from_range(float lo, float hi);
  bool operator==(const QuantParams&) const = default;
};

struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<std::int8_t> data;
  QuantParams params;

  std::span<const std::int8_t> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<std::int8_t> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  bool operator==(const QuantizedMatrix&) const = default;
};

// Throws kDegenerateRange when every cell has the same value.
QuantParams compute_quant_params(std::span<const float> values);
inline QuantParams compute_quant_params(const FloatMatrix& m) { return compute_quant_params(m.data); }

// Round-half-to-even, clamped to [-128, 127].
std::int8_t quantize_value(float x, const QuantParams& p);
float dequantize_value(std::int8_t q, const QuantParams& p);

void quantize_into(std::span<const float> values, const QuantParams& p, std::span<std::int8_t> out);
std::vector<std::int8_t> quantize_vector(std::span<const float> values, const QuantParams& p);
QuantizedMatrix quantize_matrix(const FloatMatrix& m, const QuantParams& p);

// Exact integer dot product with 32-bit accumulation. Throws kLengthMismatch.
std::int32_t int8_dot(std::span<const std::int8_t> a, std::span<const std::int8_t> b);

// Scan scores. With c = 128 + global_min * scale, x ~ (q + c) / scale, so
//   x.y ~ (int8_dot(qx, qy) + c * sum(qx) + c * sum(qy) + dim * c^2) / scale^2.
// Only the first two terms vary with the item. The scan ranks by
//   int8_dot(qx, qy) * 2^16 + round(c * 2^16) * sum(qx),
// exact in int64 and reported as that value times 2^-16.
inline constexpr int kScoreFracBits = 16;
std::int64_t zero_point_fixed(const QuantParams& p);
std::int32_t row_sum(std::span<const std::int8_t> row);
double scan_score(std::int32_t dot, std::int32_t row_sum, std::int64_t zero_point);

}  // namespace filtra
