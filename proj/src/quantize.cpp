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

#include "filtra/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "filtra/error.hpp"
#include "filtra/kernels.hpp"

namespace filtra {

QuantParams QuantParams::from_range(float lo, float hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::kDegenerateRange, "global_min must be below global_max");
  }
  QuantParams p;
  p.global_min = lo;
  p.global_max = hi;
  p.scale = static_cast<float>(255.0 / (static_cast<double>(hi) - static_cast<double>(lo)));
  if (!(p.scale > 0.0f) || !std::isfinite(p.scale)) throw Error(ErrorCode::kDegenerateRange, "scale not finite");
  return p;
}

QuantParams compute_quant_params(std::span<const float> values) {
  if (values.empty()) throw Error(ErrorCode::kDegenerateRange, "empty matrix");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return QuantParams::from_range(*lo, *hi);
}

std::int8_t quantize_value(float x, const QuantParams& p) {
  const double t = (static_cast<double>(x) - p.global_min) * static_cast<double>(p.scale);
  // nearbyint under the default rounding mode is round-half-to-even.
  const double q = std::nearbyint(t) - 128.0;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

float dequantize_value(std::int8_t q, const QuantParams& p) {
  return static_cast<float>((static_cast<double>(q) + 128.0) / p.scale + p.global_min);
}

void quantize_into(std::span<const float> values, const QuantParams& p, std::span<std::int8_t> out) {
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = quantize_value(values[i], p);
}

std::vector<std::int8_t> quantize_vector(std::span<const float> values, const QuantParams& p) {
  std::vector<std::int8_t> out(values.size());
  quantize_into(values, p, out);
  return out;
}

QuantizedMatrix quantize_matrix(const FloatMatrix& m, const QuantParams& p) {
  QuantizedMatrix q;
  q.rows = m.rows;
  q.dim = m.cols;
  q.params = p;
  q.data.resize(m.data.size());
  const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) quantize_into(m.row(static_cast<std::size_t>(r)), p, q.row(static_cast<std::size_t>(r)));
  return q;
}

std::int64_t zero_point_fixed(const QuantParams& p) {
  const double c = 128.0 + static_cast<double>(p.global_min) * static_cast<double>(p.scale);
  return std::llround(std::ldexp(c, kScoreFracBits));
}

std::int32_t row_sum(std::span<const std::int8_t> row) {
  std::int32_t s = 0;
  for (auto v : row) s += v;
  return s;
}

double scan_score(std::int32_t dot, std::int32_t row_sum, std::int64_t zero_point) {
  const std::int64_t fixed = static_cast<std::int64_t>(dot) * (std::int64_t{1} << kScoreFracBits) + zero_point * row_sum;
  return std::ldexp(static_cast<double>(fixed), -kScoreFracBits);
}

std::int32_t int8_dot(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()),
                {static_cast<std::int64_t>(a.size()), static_cast<std::int64_t>(b.size())});
  }
  return kernels::dot_i8(a.data(), b.data(), a.size());
}

}  // namespace filtra
