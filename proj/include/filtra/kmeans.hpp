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
#include <vector>

#include "filtra/matrix.hpp"

namespace filtra {

struct Centroids {
  FloatMatrix vectors;
  std::size_t n_clusters() const noexcept { return vectors.rows; }
  bool operator==(const Centroids&) const = default;
};

struct KMeansResult {
  Centroids centroids;
  std::vector<std::uint32_t> assignment;
  std::vector<double> inertia_history;  // inertia after each assignment step
  std::size_t iterations = 0;
};

// D^2 seeding. Throws kKTooLarge when k > rows or k == 0.
Centroids kmeans_pp_init(const FloatMatrix& data, std::size_t k, std::uint64_t seed);

// Lloyd iterations from kmeans_pp_init. Stops when the relative inertia
// improvement drops below tol or after max_iters. Empty clusters are
// re-seeded with the point farthest from its centroid in the largest cluster.
KMeansResult kmeans_train(const FloatMatrix& data, std::size_t k, std::size_t max_iters = 25, double tol = 1e-4,
                          std::uint64_t seed = 0);

// Nearest centroid by squared L2, lowest index on ties. Returns the distance.
double assign_nearest(const FloatMatrix& data, const Centroids& centroids, std::vector<std::uint32_t>& assignment);

double inertia(const FloatMatrix& data, const Centroids& centroids, const std::vector<std::uint32_t>& assignment);

}  // namespace filtra
