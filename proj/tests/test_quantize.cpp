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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "filtra/error.hpp"
#include "filtra/kernels.hpp"
#include "filtra/quantize.hpp"
#include "filtra/rng.hpp"

namespace filtra {
namespace {

TEST(Quantize, ParamsFromSymmetricRange) {
  const std::vector<float> v{-1.0f, 0.25f, 1.0f, 0.0f};
  const auto p = compute_quant_params(v);
  EXPECT_EQ(p.global_min, -1.0f);
  EXPECT_EQ(p.global_max, 1.0f);
  EXPECT_EQ(p.scale, 127.5f);
}

TEST(Quantize, ConstantMatrixIsDegenerate) {
  const std::vector<float> v(16, 0.5f);
  try {
    compute_quant_params(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateRange);
  }
}

TEST(Quantize, ParamsMatchBruteForceScan) {
  Rng rng(7);
  FloatMatrix m(100, 16);
  for (auto& x : m.data) x = static_cast<float>(rng.normal());
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (float x : m.row(r)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const auto p = compute_quant_params(m);
  EXPECT_EQ(p.global_min, lo);
  EXPECT_EQ(p.global_max, hi);
}

TEST(Quantize, Endpoints) {
  const auto p = QuantParams::from_range(-1.0f, 1.0f);
  EXPECT_EQ(quantize_value(-1.0f, p), -128);
  EXPECT_EQ(quantize_value(1.0f, p), 127);
  EXPECT_EQ(quantize_value(0.0f, p), 0);  // 127.5 rounds to even 128
  EXPECT_EQ(quantize_value(-5.0f, p), -128);
  EXPECT_EQ(quantize_value(5.0f, p), 127);
}

TEST(Quantize, RoundsHalfToEven) {
  // scale 1 over [0, 255]: x + 0.5 sits exactly on a half step.
  const auto p = QuantParams::from_range(0.0f, 255.0f);
  EXPECT_EQ(quantize_value(0.5f, p), -128);
  EXPECT_EQ(quantize_value(1.5f, p), -126);
  EXPECT_EQ(quantize_value(2.5f, p), -126);
}

TEST(Quantize, DequantizationWithinHalfStep) {
  Rng rng(99);
  const auto p = QuantParams::from_range(-0.7f, 0.9f);
  const double half = (0.9 - -0.7) / 255.0 / 2.0;
  for (int i = 0; i < 200000; ++i) {
    const float x = static_cast<float>(-0.7 + 1.6 * rng.uniform());
    const float back = dequantize_value(quantize_value(x, p), p);
    EXPECT_LE(std::abs(static_cast<double>(back) - x), half * (1 + 1e-5)) << x;
  }
}

TEST(Int8Dot, Fixed) {
  const std::vector<std::int8_t> a(4, 127);
  EXPECT_EQ(int8_dot(a, a), 64516);
  const std::vector<std::int8_t> z(4, 0);
  EXPECT_EQ(int8_dot(z, a), 0);
  const std::vector<std::int8_t> m(65536, -128);
  EXPECT_EQ(int8_dot(m, m), 65536 * 16384);
}

TEST(Int8Dot, MatchesWideOracleAndIsBilinear) {
  Rng rng(1);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::int8_t> a(128), b(128), c(128);
    for (std::size_t i = 0; i < 128; ++i) {
      a[i] = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
      b[i] = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
      c[i] = static_cast<std::int8_t>(static_cast<int>(rng.below(64)) - 32);
    }
    __int128 wide = 0;
    for (std::size_t i = 0; i < 128; ++i) wide += static_cast<__int128>(a[i]) * b[i];
    EXPECT_EQ(static_cast<__int128>(int8_dot(a, b)), wide);
    EXPECT_EQ(int8_dot(a, b), int8_dot(b, a));
    std::vector<std::int8_t> sum(128);
    for (std::size_t i = 0; i < 128; ++i) sum[i] = static_cast<std::int8_t>(c[i] + c[i] / 2);
    std::vector<std::int8_t> half(128);
    for (std::size_t i = 0; i < 128; ++i) half[i] = static_cast<std::int8_t>(c[i] / 2);
    EXPECT_EQ(int8_dot(a, sum), int8_dot(a, c) + int8_dot(a, half));
  }
}

TEST(Int8Dot, LengthMismatch) {
  const std::vector<std::int8_t> a(3), b(4);
  EXPECT_THROW(int8_dot(a, b), Error);
}

TEST(Quantize, MatrixCellsInRange) {
  Rng rng(4);
  FloatMatrix m(50, 9);
  for (auto& x : m.data) x = static_cast<float>(rng.normal());
  const auto p = compute_quant_params(m);
  const auto q = quantize_matrix(m, p);
  for (std::size_t i = 0; i < m.data.size(); ++i) EXPECT_EQ(q.data[i], quantize_value(m.data[i], p));
}

}  // namespace
}  // namespace filtra
