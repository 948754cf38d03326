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

namespace filtra {

struct Hit {
  std::uint64_t item_id = 0;
  double score = 0.0;

  bool operator==(const Hit&) const = default;
};

// Ranking order used everywhere: higher score first, equal scores by
// ascending item id.
inline bool ranks_before(const Hit& a, const Hit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.item_id < b.item_id);
}

struct TopkResult {
  std::vector<Hit> entries;
  std::size_t k_requested = 0;

  bool operator==(const TopkResult&) const = default;
};

// Bounded selection of the k best hits. The heap keeps the worst retained hit
// at the front so each push is O(log k).
class TopkCollector {
 public:
  explicit TopkCollector(std::size_t k) : k_(k) {}

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return heap_.size(); }

  void push(const Hit& hit);
  void merge(TopkCollector&& other);

  // Sorted best-first; leaves the collector empty.
  TopkResult take();

 private:
  std::size_t k_;
  std::vector<Hit> heap_;
};

}  // namespace filtra
