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

#include "filtra/topk.hpp"

#include <algorithm>

namespace filtra {

namespace {
// Heap comparator: the front of the heap is the hit that ranks last.
bool heap_less(const Hit& a, const Hit& b) { return ranks_before(a, b); }
}  // namespace

void TopkCollector::push(const Hit& hit) {
  if (k_ == 0) return;
  if (heap_.size() < k_) {
    heap_.push_back(hit);
    std::push_heap(heap_.begin(), heap_.end(), heap_less);
    return;
  }
  if (!ranks_before(hit, heap_.front())) return;
  std::pop_heap(heap_.begin(), heap_.end(), heap_less);
  heap_.back() = hit;
  std::push_heap(heap_.begin(), heap_.end(), heap_less);
}

void TopkCollector::merge(TopkCollector&& other) {
  for (const auto& h : other.heap_) push(h);
  other.heap_.clear();
}

TopkResult TopkCollector::take() {
  TopkResult out;
  out.k_requested = k_;
  out.entries = std::move(heap_);
  heap_.clear();
  std::sort(out.entries.begin(), out.entries.end(), ranks_before);
  return out;
}

}  // namespace filtra
