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

// Named fixed-dimension vector collections with key lookup, tag filters,
// exact and graph-index search, and a self-verifying binary file format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/executor.hpp"
#include "saturn/governance.hpp"
#include "saturn/hnsw.hpp"
#include "saturn/store.hpp"

namespace saturn::embedfarm {

enum class Metric : std::uint8_t { kCosine = 0, kEuclidean = 1, kDot = 2 };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view text);

struct CollectionInfo {
  std::string name;
  std::uint32_t dim = 0;
  Metric metric = Metric::kCosine;
  std::uint64_t entry_count = 0;
  Timestamp created_at = 0;
  bool index_fresh = false;
};

struct Entry {
  std::string key;
  std::vector<float> vector;
  std::vector<std::string> tags;  // sorted, unique
  Timestamp updated_at = 0;
};

struct SearchResult {
  std::string key;
  double score = 0.0;
  std::uint32_t rank = 0;  // 1-based
};

/// Similarity for cosine and dot, negative Euclidean distance otherwise;
/// accumulated in double.
double score(Metric metric, std::span<const float> query, std::span<const float> entry);

/// Score descending, then key ascending.
bool ranks_before(const SearchResult& a, const SearchResult& b);

/// In-memory form of a collection file.
struct CollectionFile {
  Metric metric = Metric::kCosine;
  std::uint32_t dim = 0;
  std::vector<Entry> entries;  // updated_at is not serialized
};

inline constexpr std::uint16_t kFormatVersion = 1;

/// "SEF1" file bytes; entries are written in ascending key order.
std::vector<std::uint8_t> encode_collection(const CollectionFile& file);
/// Verifies the trailing digest before parsing anything else.
CollectionFile decode_collection(std::span<const std::uint8_t> bytes);

class EmbeddingFarm {
 public:
  /// db may be null for a purely in-memory farm.
  EmbeddingFarm(std::shared_ptr<store::Database> db, std::shared_ptr<governance::AccessControl> acl,
                std::shared_ptr<const Clock> clock, std::shared_ptr<Executor> executor, HnswParams params = {});
  ~EmbeddingFarm();

  CollectionInfo create_collection(std::string_view actor, const std::string& name, std::uint32_t dim, Metric metric);
  std::vector<CollectionInfo> list_collections(std::string_view actor) const;
  CollectionInfo info(std::string_view actor, const std::string& name) const;

  Entry upsert(std::string_view actor, const std::string& collection, const std::string& key,
               std::vector<float> vector, std::vector<std::string> tags = {});
  Entry get(std::string_view actor, const std::string& collection, const std::string& key) const;
  /// Same order as keys; missing keys come back empty.
  std::vector<std::optional<Entry>> batch_get(std::string_view actor, const std::string& collection,
                                              const std::vector<std::string>& keys) const;

  std::vector<SearchResult> search_exact(std::string_view actor, const std::string& collection,
                                         std::span<const float> query, std::size_t k,
                                         const std::vector<std::string>& tags = {}) const;

  /// Builds on the calling thread.
  void build_index(std::string_view actor, const std::string& collection);
  /// Builds on the executor; searches keep seeing the previous index until
  /// the new one is published.
  void build_index_async(std::string_view actor, const std::string& collection);
  std::vector<SearchResult> search_ann(std::string_view actor, const std::string& collection,
                                       std::span<const float> query, std::size_t k,
                                       const std::vector<std::string>& tags = {}) const;

  void export_collection(std::string_view actor, const std::string& collection,
                         const std::filesystem::path& path) const;
  std::vector<std::uint8_t> export_bytes(std::string_view actor, const std::string& collection) const;
  /// name defaults to the file stem.
  CollectionInfo import_collection(std::string_view actor, const std::filesystem::path& path,
                                   std::optional<std::string> name = std::nullopt);
  CollectionInfo import_bytes(std::string_view actor, std::span<const std::uint8_t> bytes, const std::string& name);

 private:
  struct Snapshot;
  struct Index;
  struct Collection;

  std::shared_ptr<Collection> find(const std::string& name) const;
  std::shared_ptr<Collection> add_collection(const std::string& name, std::uint32_t dim, Metric metric,
                                             Timestamp created_at);
  std::shared_ptr<const Snapshot> snapshot(Collection& c) const;
  std::shared_ptr<const Index> build(const std::shared_ptr<const Snapshot>& snap, Metric metric) const;
  void validate_vector(const Collection& c, std::span<const float> v, const char* what) const;
  void persist_entry(const std::string& collection, const Entry& e);
  void load();

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<Executor> executor_;
  HnswParams params_;

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Collection>> collections_;
};

}  // namespace saturn::embedfarm
