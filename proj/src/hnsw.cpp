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
#include "saturn/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

#include "saturn/error.hpp"

namespace saturn::embedfarm {

HnswIndex::HnswIndex(std::size_t dim, GraphDistance distance, HnswParams params)
    : dim_(dim), distance_(distance), params_(params), rng_state_(params.seed) {
  require(dim_ >= 1, ErrorCode::kInvalidInput, "index dimension must be at least 1");
  require(params_.m >= 2 && params_.m0 >= params_.m, ErrorCode::kInvalidInput, "bad degree parameters");
  level_mult_ = 1.0 / std::log(static_cast<double>(params_.m));
}

float HnswIndex::distance(const float* a, const float* b) const {
  float acc = 0.0f;
  if (distance_ == GraphDistance::kNegDot) {
    for (std::size_t i = 0; i < dim_; ++i) acc += a[i] * b[i];
    return 1.0f - acc;
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

int HnswIndex::draw_level() {
  std::mt19937_64 rng(rng_state_);
  rng_state_ = rng();
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  u = std::max(u, 1e-300);
  return static_cast<int>(std::floor(-std::log(u) * level_mult_));
}

std::uint32_t HnswIndex::greedy(const float* q, std::uint32_t entry, int from_level, int to_level) const {
  std::uint32_t cur = entry;
  float cur_d = distance(q, vec(cur));
  for (int level = from_level; level > to_level; --level) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::uint32_t n : links_[cur][level]) {
        float d = distance(q, vec(n));
        if (d < cur_d || (d == cur_d && n < cur)) {
          cur = n;
          cur_d = d;
          moved = true;
        }
      }
    }
  }
  return cur;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const float* q, std::uint32_t entry, std::size_t ef,
                                                          int level) const {
  std::vector<char> visited(levels_.size(), 0);
  // candidates: closest first; results: farthest on top.
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> candidates;
  std::priority_queue<Candidate> results;
  float d0 = distance(q, vec(entry));
  candidates.emplace(d0, entry);
  results.emplace(d0, entry);
  visited[entry] = 1;
  while (!candidates.empty()) {
    auto [d, c] = candidates.top();
    if (d > results.top().first && results.size() >= ef) break;
    candidates.pop();
    for (std::uint32_t n : links_[c][level]) {
      if (visited[n]) continue;
      visited[n] = 1;
      float dn = distance(q, vec(n));
      if (results.size() < ef || dn < results.top().first) {
        candidates.emplace(dn, n);
        results.emplace(dn, n);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Keeps a candidate only if it is closer to the base than to every neighbor
// already kept; fills leftover slots with the nearest discarded ones.
std::vector<std::uint32_t> HnswIndex::select_neighbors(std::vector<Candidate> candidates, std::size_t m) const {
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> discarded;
  for (const auto& [d, c] : candidates) {
    if (kept.size() >= m) break;
    bool good = true;
    for (std::uint32_t k : kept) {
      if (distance(vec(c), vec(k)) < d) {
        good = false;
        break;
      }
    }
    (good ? kept : discarded).push_back(c);
  }
  for (std::size_t i = 0; i < discarded.size() && kept.size() < m; ++i) kept.push_back(discarded[i]);
  return kept;
}

std::uint32_t HnswIndex::add(std::span<const float> vector) {
  require(vector.size() == dim_, ErrorCode::kInvalidInput, "vector dimension mismatch");
  const auto id = static_cast<std::uint32_t>(levels_.size());
  const int level = draw_level();
  data_.insert(data_.end(), vector.begin(), vector.end());
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);
  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = level;
    return id;
  }
  const float* q = vec(id);
  std::uint32_t ep = greedy(q, entry_, max_level_, level);
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(q, ep, params_.ef_construction, l);
    const std::size_t cap = l == 0 ? params_.m0 : params_.m;
    auto chosen = select_neighbors(found, params_.m);
    links_[id][l] = chosen;
    for (std::uint32_t n : chosen) {
      auto& back = links_[n][l];
      back.push_back(id);
      if (back.size() > cap) {
        std::vector<Candidate> pool;
        pool.reserve(back.size());
        for (std::uint32_t b : back) pool.emplace_back(distance(vec(n), vec(b)), b);
        back = select_neighbors(std::move(pool), cap);
      }
    }
    ep = found.front().second;
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = id;
  }
  return id;
}

std::vector<std::pair<float, std::uint32_t>> HnswIndex::search(std::span<const float> query, std::size_t k,
                                                              std::size_t ef) const {
  require(query.size() == dim_, ErrorCode::kInvalidInput, "query dimension mismatch");
  if (levels_.empty() || k == 0) return {};
  std::uint32_t ep = greedy(query.data(), entry_, max_level_, 0);
  auto found = search_layer(query.data(), ep, std::max(k, ef), 0);
  if (found.size() > k) found.resize(k);
  return found;
}

}  // namespace saturn::embedfarm
