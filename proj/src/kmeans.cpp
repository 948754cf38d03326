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

#include "filtra/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "filtra/error.hpp"
#include "filtra/kernels.hpp"
#include "filtra/rng.hpp"

namespace filtra {

namespace {

void check_k(const FloatMatrix& data, std::size_t k) {
  if (k == 0 || k > data.rows) {
    throw Error(ErrorCode::kKTooLarge, "k=" + std::to_string(k) + " with " + std::to_string(data.rows) + " rows",
                {static_cast<std::int64_t>(k), static_cast<std::int64_t>(data.rows)});
  }
}

// Per-row squared distances to the nearest centroid. Rows are independent;
// the caller sums in row order.
void nearest(const FloatMatrix& data, const FloatMatrix& centers, std::vector<std::uint32_t>& assignment,
             std::vector<double>& dist) {
  const auto n = static_cast<std::int64_t>(data.rows);
  const std::size_t k = centers.rows;
  const std::size_t dim = data.cols;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const float* x = data.data.data() + static_cast<std::size_t>(i) * dim;
    float best = std::numeric_limits<float>::infinity();
    std::uint32_t best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const float d = kernels::l2sq_f32(x, centers.data.data() + c * dim, dim);
      if (d < best) {
        best = d;
        best_c = static_cast<std::uint32_t>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best_c;
    dist[static_cast<std::size_t>(i)] = best;
  }
}

}  // namespace

Centroids kmeans_pp_init(const FloatMatrix& data, std::size_t k, std::uint64_t seed) {
  check_k(data, k);
  const std::size_t n = data.rows;
  const std::size_t dim = data.cols;
  Rng rng(seed);
  Centroids out{FloatMatrix(k, dim)};
  std::vector<char> chosen(n, 0);

  std::size_t first = static_cast<std::size_t>(rng.below(n));
  chosen[first] = 1;
  std::copy_n(data.row(first).begin(), dim, out.vectors.row(0).begin());

  std::vector<double> d2(n);
  const auto nn = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nn; ++i) {
    d2[static_cast<std::size_t>(i)] = kernels::l2sq_f32(data.row(static_cast<std::size_t>(i)).data(), data.row(first).data(), dim);
  }

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    std::size_t pick = n;
    if (total > 0) {
      const double target = rng.uniform() * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] <= 0) continue;
        acc += d2[i];
        pick = i;
        if (acc > target) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a chosen center; take the
      // r-th unchosen row.
      std::size_t remaining = 0;
      for (std::size_t i = 0; i < n; ++i) remaining += chosen[i] ? 0 : 1;
      std::size_t r = static_cast<std::size_t>(rng.below(remaining));
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = 1;
    const auto center = data.row(pick);
    std::copy(center.begin(), center.end(), out.vectors.row(c).begin());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < nn; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, static_cast<double>(kernels::l2sq_f32(data.row(static_cast<std::size_t>(i)).data(), center.data(), dim)));
    }
  }
  return out;
}

double assign_nearest(const FloatMatrix& data, const Centroids& centroids, std::vector<std::uint32_t>& assignment) {
  assignment.resize(data.rows);
  std::vector<double> dist(data.rows);
  nearest(data, centroids.vectors, assignment, dist);
  return std::accumulate(dist.begin(), dist.end(), 0.0);
}

double inertia(const FloatMatrix& data, const Centroids& centroids, const std::vector<std::uint32_t>& assignment) {
  double total = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    total += kernels::l2sq_f32(data.row(i).data(), centroids.vectors.row(assignment[i]).data(), data.cols);
  }
  return total;
}

KMeansResult kmeans_train(const FloatMatrix& data, std::size_t k, std::size_t max_iters, double tol,
                          std::uint64_t seed) {
  check_k(data, k);
  if (max_iters == 0) throw Error(ErrorCode::kInvalidConfig, "max_iters must be at least 1");
  const std::size_t n = data.rows;
  const std::size_t dim = data.cols;

  KMeansResult result;
  result.centroids = kmeans_pp_init(data, k, seed);
  auto& centers = result.centroids.vectors;
  std::vector<std::uint32_t>& assignment = result.assignment;
  assignment.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);

  for (std::size_t it = 0; it < max_iters; ++it) {
    nearest(data, centers, assignment, dist);
    const double cur = std::accumulate(dist.begin(), dist.end(), 0.0);
    result.inertia_history.push_back(cur);
    result.iterations = it + 1;
    if (it > 0) {
      const double prev = result.inertia_history[it - 1];
      if (prev <= 0 || (prev - cur) / prev < tol) break;
    }

    // Centroid update, accumulated in row order.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = assignment[i];
      ++counts[c];
      const auto row = data.row(i);
      double* s = sums.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += row[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto crow = centers.row(c);
      for (std::size_t d = 0; d < dim; ++d) crow[d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
    }

    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const std::size_t largest = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (assignment[i] != largest) continue;
        const double d = kernels::l2sq_f32(data.row(i).data(), centers.row(largest).data(), dim);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n || counts[largest] < 2) continue;
      std::copy_n(data.row(far).begin(), dim, centers.row(c).begin());
      assignment[far] = static_cast<std::uint32_t>(c);
      --counts[largest];
      counts[c] = 1;
    }
  }

  // Final assignment consistent with the returned centroids.
  nearest(data, centers, assignment, dist);
  return result;
}

}  // namespace filtra
