// Copyright 2026 The Saturn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Layered small-world neighbor graph for approximate nearest-neighbor search.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace saturn::embedfarm {

enum class GraphDistance {
  kNegDot,  // 1 - <a,b>; on unit vectors this ranks by cosine
  kSquaredL2,
};

struct HnswParams {
  std::size_t m = 16;   // max degree on upper layers
  std::size_t m0 = 32;  // max degree on layer 0
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
  std::uint64_t seed = 42;
};

class HnswIndex {
 public:
  HnswIndex(std::size_t dim, GraphDistance distance, HnswParams params = {});

  /// Inserts a vector; its id is the insertion ordinal.
  std::uint32_t add(std::span<const float> vector);

  /// Up to max(k, ef) candidates searched; returns the k closest as
  /// (distance, id), closest first.
  std::vector<std::pair<float, std::uint32_t>> search(std::span<const float> query, std::size_t k,
                                                      std::size_t ef) const;

  std::size_t size() const { return levels_.size(); }
  std::size_t dim() const { return dim_; }
  const HnswParams& params() const { return params_; }
  int max_level() const { return max_level_; }
  /// Neighbors of id at level, for structural tests.
  const std::vector<std::uint32_t>& neighbors(std::uint32_t id, int level) const { return links_[id][level]; }

 private:
  using Candidate = std::pair<float, std::uint32_t>;

  float distance(const float* a, const float* b) const;
  const float* vec(std::uint32_t id) const { return data_.data() + static_cast<std::size_t>(id) * dim_; }
  std::uint32_t greedy(const float* q, std::uint32_t entry, int from_level, int to_level) const;
  std::vector<Candidate> search_layer(const float* q, std::uint32_t entry, std::size_t ef, int level) const;
  std::vector<std::uint32_t> select_neighbors(std::vector<Candidate> candidates, std::size_t m) const;
  int draw_level();

  std::size_t dim_;
  GraphDistance distance_;
  HnswParams params_;
  double level_mult_;
  std::uint64_t rng_state_;
  std::vector<float> data_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

}  // namespace saturn::embedfarm
