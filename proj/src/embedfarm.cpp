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
#include "saturn/embedfarm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include "saturn/bytes.hpp"
#include "saturn/config.hpp"
#include "saturn/digest.hpp"
#include "saturn/error.hpp"

namespace saturn::embedfarm {

using governance::Action;
using governance::Resource;
using governance::ResourceKind;

namespace {

constexpr std::uint32_t kMaxDim = 65536;
constexpr char kMagic[] = "SEF1";
constexpr std::size_t kHeaderSize = 4 + 2 + 1 + 4 + 8;
constexpr std::size_t kDigestSize = 32;

bool has_all_tags(const std::vector<std::string>& entry_tags, const std::vector<std::string>& filter) {
  return std::includes(entry_tags.begin(), entry_tags.end(), filter.begin(), filter.end());
}

std::vector<std::string> canonical_tags(std::vector<std::string> tags) {
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
  return tags;
}

std::vector<std::uint8_t> encode_tags(const std::vector<std::string>& tags) {
  ByteWriter w;
  w.put<std::uint16_t>(static_cast<std::uint16_t>(tags.size()));
  for (const auto& t : tags) w.put_string16(t);
  return w.take();
}

std::vector<std::string> decode_tags(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::vector<std::string> tags(r.get<std::uint16_t>());
  for (auto& t : tags) t = r.get_string16();
  return tags;
}

std::vector<float> normalized(std::span<const float> v) {
  double n = 0.0;
  for (float x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kCosine:
      return "cosine";
    case Metric::kEuclidean:
      return "euclidean";
    case Metric::kDot:
      return "dot";
  }
  return "cosine";
}

Metric parse_metric(std::string_view text) {
  if (text == "cosine") return Metric::kCosine;
  if (text == "euclidean") return Metric::kEuclidean;
  if (text == "dot") return Metric::kDot;
  fail(ErrorCode::kInvalidInput, "unknown metric: " + std::string(text));
}

double score(Metric metric, std::span<const float> query, std::span<const float> entry) {
  const std::size_t n = query.size();
  switch (metric) {
    case Metric::kCosine: {
      double dot = 0.0, nq = 0.0, ne = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += static_cast<double>(query[i]) * entry[i];
        nq += static_cast<double>(query[i]) * query[i];
        ne += static_cast<double>(entry[i]) * entry[i];
      }
      return dot / (std::sqrt(nq) * std::sqrt(ne));
    }
    case Metric::kEuclidean: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(query[i]) - entry[i];
        acc += d * d;
      }
      return -std::sqrt(acc);
    }
    case Metric::kDot: {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(query[i]) * entry[i];
      return dot;
    }
  }
  return 0.0;
}

bool ranks_before(const SearchResult& a, const SearchResult& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.key < b.key;
}

// ---- file format ---------------------------------------------------------

std::vector<std::uint8_t> encode_collection(const CollectionFile& file) {
  std::vector<const Entry*> order;
  order.reserve(file.entries.size());
  for (const auto& e : file.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const Entry* a, const Entry* b) { return a->key < b->key; });

  ByteWriter w;
  w.put_raw(std::string_view(kMagic, 4));
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(file.metric));
  w.put<std::uint32_t>(file.dim);
  w.put<std::uint64_t>(order.size());
  for (const Entry* e : order) {
    require(e->vector.size() == file.dim, ErrorCode::kInvalidInput, "entry dimension mismatch");
    require(e->tags.size() <= 0xffff, ErrorCode::kInvalidInput, "too many tags");
    w.put_string16(e->key);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e->tags.size()));
    for (const auto& t : e->tags) w.put_string16(t);
    for (float x : e->vector) w.put<float>(x);
  }
  auto bytes = w.take();
  Sha256 h;
  h.update(bytes);
  auto digest = h.finish();
  bytes.insert(bytes.end(), digest.begin(), digest.end());
  return bytes;
}

CollectionFile decode_collection(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + kDigestSize) fail(ErrorCode::kIntegrityError, "collection file truncated");
  auto body = bytes.first(bytes.size() - kDigestSize);
  Sha256 h;
  h.update(body);
  auto digest = h.finish();
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - kDigestSize)) {
    fail(ErrorCode::kIntegrityError, "collection file digest mismatch");
  }

  ByteReader r(body);
  if (r.get_raw(4) != std::string_view(kMagic, 4)) fail(ErrorCode::kInvalidInput, "not a collection file");
  auto version = r.get<std::uint16_t>();
  require(version == kFormatVersion, ErrorCode::kInvalidInput,
          "unsupported collection format version " + std::to_string(version));
  auto metric = r.get<std::uint8_t>();
  require(metric <= 2, ErrorCode::kInvalidInput, "unknown metric code " + std::to_string(metric));
  CollectionFile file;
  file.metric = static_cast<Metric>(metric);
  file.dim = r.get<std::uint32_t>();
  require(file.dim >= 1 && file.dim <= kMaxDim, ErrorCode::kInvalidInput, "bad dimension");
  auto count = r.get<std::uint64_t>();
  // Every entry takes at least 4 bytes of prefixes plus its vector.
  if (count > r.remaining() / (4 + 4ull * file.dim)) fail(ErrorCode::kIntegrityError, "entry count exceeds file size");
  file.entries.resize(count);
  for (auto& e : file.entries) {
    e.key = r.get_string16();
    e.tags.resize(r.get<std::uint16_t>());
    for (auto& t : e.tags) t = r.get_string16();
    e.vector.resize(file.dim);
    for (auto& x : e.vector) x = r.get<float>();
  }
  if (r.remaining() != 0) fail(ErrorCode::kIntegrityError, "trailing bytes after entries");
  return file;
}

// ---- farm ----------------------------------------------------------------

struct EmbeddingFarm::Snapshot {
  std::uint64_t seq = 0;
  std::uint32_t dim = 0;
  std::vector<std::string> keys;  // ascending
  std::vector<float> vectors;
  std::vector<std::vector<std::string>> tags;
  std::vector<Timestamp> updated;

  std::span<const float> row(std::size_t i) const { return {vectors.data() + i * dim, dim}; }

  std::optional<std::size_t> position(const std::string& key) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), key);
    if (it == keys.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - keys.begin());
  }

  Entry entry(std::size_t i) const {
    auto r = row(i);
    return {keys[i], {r.begin(), r.end()}, tags[i], updated[i]};
  }
};

struct EmbeddingFarm::Index {
  std::uint64_t seq = 0;
  std::shared_ptr<const Snapshot> snap;
  HnswIndex graph;
};

struct EmbeddingFarm::Collection {
  std::string name;
  std::uint32_t dim = 0;
  Metric metric = Metric::kCosine;
  Timestamp created_at = 0;

  std::mutex write_mu;
  std::map<std::string, Entry> entries;
  std::atomic<std::uint64_t> seq{0};

  std::mutex publish_mu;
  std::shared_ptr<const Snapshot> snap;
  std::shared_ptr<const Index> index;

  std::shared_ptr<const Snapshot> published() {
    std::lock_guard lock(publish_mu);
    return snap;
  }
  std::shared_ptr<const Index> published_index() {
    std::lock_guard lock(publish_mu);
    return index;
  }
};

EmbeddingFarm::EmbeddingFarm(std::shared_ptr<store::Database> db, std::shared_ptr<governance::AccessControl> acl,
                             std::shared_ptr<const Clock> clock, std::shared_ptr<Executor> executor,
                             HnswParams params)
    : db_(std::move(db)),
      acl_(std::move(acl)),
      clock_(std::move(clock)),
      executor_(std::move(executor)),
      params_(params) {
  require(acl_ != nullptr && clock_ != nullptr && executor_ != nullptr, ErrorCode::kInternal,
          "embedding farm needs an access list, a clock and an executor");
  if (db_) {
    db_->exec(
        "CREATE TABLE IF NOT EXISTS embed_collections ("
        " name TEXT PRIMARY KEY, dim INTEGER NOT NULL, metric INTEGER NOT NULL, created_at INTEGER NOT NULL);"
        "CREATE TABLE IF NOT EXISTS embed_entries ("
        " collection TEXT NOT NULL, key TEXT NOT NULL, vector BLOB NOT NULL, tags BLOB NOT NULL,"
        " updated_at INTEGER NOT NULL, PRIMARY KEY (collection, key));");
    load();
  }
}

EmbeddingFarm::~EmbeddingFarm() = default;

void EmbeddingFarm::load() {
  auto cs = db_->prepare("SELECT name, dim, metric, created_at FROM embed_collections");
  while (cs.step()) {
    add_collection(cs.column_text(0), static_cast<std::uint32_t>(cs.column_int(1)),
                   static_cast<Metric>(cs.column_int(2)), cs.column_int(3));
  }
  auto es = db_->prepare("SELECT collection, key, vector, tags, updated_at FROM embed_entries");
  while (es.step()) {
    auto c = find(es.column_text(0));
    Entry e;
    e.key = es.column_text(1);
    auto blob = es.column_blob(2);
    require(blob.size() == c->dim * sizeof(float), ErrorCode::kIntegrityError, "stored vector has wrong size");
    e.vector.resize(c->dim);
    std::memcpy(e.vector.data(), blob.data(), blob.size());
    e.tags = decode_tags(es.column_blob(3));
    e.updated_at = es.column_int(4);
    c->entries[e.key] = std::move(e);
    c->seq = 1;
  }
}

std::shared_ptr<EmbeddingFarm::Collection> EmbeddingFarm::find(const std::string& name) const {
  std::shared_lock lock(mu_);
  auto it = collections_.find(name);
  if (it == collections_.end()) fail(ErrorCode::kNotFound, "no collection " + name);
  return it->second;
}

std::shared_ptr<EmbeddingFarm::Collection> EmbeddingFarm::add_collection(const std::string& name, std::uint32_t dim,
                                                                         Metric metric, Timestamp created_at) {
  auto c = std::make_shared<Collection>();
  c->name = name;
  c->dim = dim;
  c->metric = metric;
  c->created_at = created_at;
  std::unique_lock lock(mu_);
  if (!collections_.emplace(name, c).second) fail(ErrorCode::kConflict, "collection " + name + " already exists");
  return c;
}

CollectionInfo EmbeddingFarm::create_collection(std::string_view actor, const std::string& name, std::uint32_t dim,
                                                Metric metric) {
  acl_->require(actor, Action::kWrite, Resource::all(ResourceKind::kCollection));
  require(!trim(name).empty() && name.size() <= 255, ErrorCode::kInvalidInput, "collection name must be 1-255 bytes");
  require(name.find('/') == std::string::npos, ErrorCode::kInvalidInput, "collection name may not contain '/'");
  require(dim >= 1, ErrorCode::kInvalidInput, "dim must be at least 1");
  require(dim <= kMaxDim, ErrorCode::kInvalidInput, "dim too large");
  const Timestamp now = clock_->now();
  auto c = add_collection(name, dim, metric, now);
  if (db_) {
    try {
      db_->prepare("INSERT INTO embed_collections (name, dim, metric, created_at) VALUES (?, ?, ?, ?)")
          .bind(1, name)
          .bind(2, static_cast<std::int64_t>(dim))
          .bind(3, static_cast<std::int64_t>(metric))
          .bind(4, now)
          .run();
    } catch (...) {
      std::unique_lock lock(mu_);
      collections_.erase(name);
      throw;
    }
  }
  acl_->grant({std::string(actor), governance::Role::kAdmin, Resource::collection(name)});
  return {name, dim, metric, 0, now, false};
}

std::vector<CollectionInfo> EmbeddingFarm::list_collections(std::string_view actor) const {
  std::vector<std::shared_ptr<Collection>> all;
  {
    std::shared_lock lock(mu_);
    for (const auto& [name, c] : collections_) all.push_back(c);
  }
  std::vector<CollectionInfo> out;
  for (const auto& c : all) {
    if (acl_->permits(actor, Action::kRead, Resource::collection(c->name))) out.push_back(info(actor, c->name));
  }
  return out;
}

CollectionInfo EmbeddingFarm::info(std::string_view actor, const std::string& name) const {
  auto c = find(name);
  acl_->require(actor, Action::kRead, Resource::collection(name));
  auto snap = snapshot(*c);
  auto idx = c->published_index();
  return {c->name, c->dim, c->metric, snap->keys.size(), c->created_at, idx && idx->seq == snap->seq};
}

void EmbeddingFarm::validate_vector(const Collection& c, std::span<const float> v, const char* what) const {
  if (v.size() != c.dim) {
    fail(ErrorCode::kInvalidInput, std::string(what) + " has " + std::to_string(v.size()) +
                                       " components; collection " + c.name + " has dim " + std::to_string(c.dim));
  }
  bool nonzero = false;
  for (float x : v) {
    require(std::isfinite(x), ErrorCode::kInvalidInput, std::string(what) + " has a non-finite component");
    nonzero = nonzero || x != 0.0f;
  }
  if (c.metric == Metric::kCosine && !nonzero) {
    fail(ErrorCode::kInvalidInput, std::string(what) + " is zero; cosine is undefined");
  }
}

void EmbeddingFarm::persist_entry(const std::string& collection, const Entry& e) {
  if (!db_) return;
  db_->prepare(
         "INSERT INTO embed_entries (collection, key, vector, tags, updated_at) VALUES (?, ?, ?, ?, ?)"
         " ON CONFLICT (collection, key) DO UPDATE SET vector = excluded.vector, tags = excluded.tags,"
         " updated_at = excluded.updated_at")
      .bind(1, collection)
      .bind(2, e.key)
      .bind_blob(3, {reinterpret_cast<const std::uint8_t*>(e.vector.data()), e.vector.size() * sizeof(float)})
      .bind_blob(4, encode_tags(e.tags))
      .bind(5, e.updated_at)
      .run();
}

Entry EmbeddingFarm::upsert(std::string_view actor, const std::string& collection, const std::string& key,
                            std::vector<float> vector, std::vector<std::string> tags) {
  auto c = find(collection);
  acl_->require(actor, Action::kWrite, Resource::collection(collection));
  require(!key.empty() && key.size() <= 0xffff, ErrorCode::kInvalidInput, "key must be 1-65535 bytes");
  validate_vector(*c, vector, "vector");
  tags = canonical_tags(std::move(tags));
  require(tags.size() <= 0xffff, ErrorCode::kInvalidInput, "too many tags");
  for (const auto& t : tags) {
    require(!t.empty() && t.size() <= 0xffff, ErrorCode::kInvalidInput, "tags must be 1-65535 bytes");
  }
  Entry e{key, std::move(vector), std::move(tags), clock_->now()};
  std::lock_guard lock(c->write_mu);
  persist_entry(collection, e);
  c->entries[key] = e;
  ++c->seq;
  return e;
}

// Rebuilt on the first read after a mutation, then shared by all readers.
std::shared_ptr<const EmbeddingFarm::Snapshot> EmbeddingFarm::snapshot(Collection& c) const {
  auto snap = c.published();
  if (snap && snap->seq == c.seq.load()) return snap;
  std::lock_guard write(c.write_mu);
  snap = c.published();
  if (snap && snap->seq == c.seq.load()) return snap;
  auto next = std::make_shared<Snapshot>();
  next->seq = c.seq.load();
  next->dim = c.dim;
  next->keys.reserve(c.entries.size());
  next->vectors.reserve(c.entries.size() * c.dim);
  for (const auto& [key, e] : c.entries) {
    next->keys.push_back(key);
    next->vectors.insert(next->vectors.end(), e.vector.begin(), e.vector.end());
    next->tags.push_back(e.tags);
    next->updated.push_back(e.updated_at);
  }
  std::lock_guard publish(c.publish_mu);
  c.snap = next;
  return next;
}

Entry EmbeddingFarm::get(std::string_view actor, const std::string& collection, const std::string& key) const {
  auto c = find(collection);
  acl_->require(actor, Action::kRead, Resource::collection(collection));
  auto snap = snapshot(*c);
  auto pos = snap->position(key);
  if (!pos) fail(ErrorCode::kNotFound, "no key " + key + " in collection " + collection);
  return snap->entry(*pos);
}

std::vector<std::optional<Entry>> EmbeddingFarm::batch_get(std::string_view actor, const std::string& collection,
                                                           const std::vector<std::string>& keys) const {
  auto c = find(collection);
  acl_->require(actor, Action::kRead, Resource::collection(collection));
  auto snap = snapshot(*c);
  std::vector<std::optional<Entry>> out;
  out.reserve(keys.size());
  for (const auto& key : keys) {
    auto pos = snap->position(key);
    out.push_back(pos ? std::optional<Entry>(snap->entry(*pos)) : std::nullopt);
  }
  return out;
}

std::vector<SearchResult> EmbeddingFarm::search_exact(std::string_view actor, const std::string& collection,
                                                      std::span<const float> query, std::size_t k,
                                                      const std::vector<std::string>& tags) const {
  auto c = find(collection);
  acl_->require(actor, Action::kRead, Resource::collection(collection));
  require(k >= 1, ErrorCode::kInvalidInput, "k must be at least 1");
  validate_vector(*c, query, "query");
  auto filter = canonical_tags(tags);
  auto snap = snapshot(*c);
  std::vector<SearchResult> all;
  all.reserve(snap->keys.size());
  for (std::size_t i = 0; i < snap->keys.size(); ++i) {
    if (!filter.empty() && !has_all_tags(snap->tags[i], filter)) continue;
    all.push_back({snap->keys[i], score(c->metric, query, snap->row(i)), 0});
  }
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
  all.resize(n);
  for (std::size_t i = 0; i < n; ++i) all[i].rank = static_cast<std::uint32_t>(i + 1);
  return all;
}

namespace {

HnswIndex build_graph(std::uint32_t dim, Metric metric, const HnswParams& params, std::size_t n,
                      const std::function<std::span<const float>(std::size_t)>& row) {
  HnswIndex graph(dim, metric == Metric::kEuclidean ? GraphDistance::kSquaredL2 : GraphDistance::kNegDot, params);
  for (std::size_t i = 0; i < n; ++i) {
    if (metric == Metric::kCosine) {
      graph.add(normalized(row(i)));
    } else {
      graph.add(row(i));
    }
  }
  return graph;
}

}  // namespace

std::shared_ptr<const EmbeddingFarm::Index> EmbeddingFarm::build(const std::shared_ptr<const Snapshot>& snap,
                                                                 Metric metric) const {
  auto graph = build_graph(snap->dim, metric, params_, snap->keys.size(),
                           [&](std::size_t i) { return snap->row(i); });
  return std::make_shared<const Index>(Index{snap->seq, snap, std::move(graph)});
}

void EmbeddingFarm::build_index(std::string_view actor, const std::string& collection) {
  auto c = find(collection);
  acl_->require(actor, Action::kWrite, Resource::collection(collection));
  auto idx = build(snapshot(*c), c->metric);
  std::lock_guard lock(c->publish_mu);
  if (!c->index || c->index->seq < idx->seq) c->index = idx;
}

void EmbeddingFarm::build_index_async(std::string_view actor, const std::string& collection) {
  auto c = find(collection);
  acl_->require(actor, Action::kWrite, Resource::collection(collection));
  auto snap = snapshot(*c);
  executor_->post([c, snap, params = params_] {
    auto graph = build_graph(snap->dim, c->metric, params, snap->keys.size(),
                             [&](std::size_t i) { return snap->row(i); });
    auto idx = std::make_shared<const Index>(Index{snap->seq, snap, std::move(graph)});
    std::lock_guard lock(c->publish_mu);
    if (!c->index || c->index->seq < idx->seq) c->index = idx;
  });
}

std::vector<SearchResult> EmbeddingFarm::search_ann(std::string_view actor, const std::string& collection,
                                                    std::span<const float> query, std::size_t k,
                                                    const std::vector<std::string>& tags) const {
  auto c = find(collection);
  acl_->require(actor, Action::kRead, Resource::collection(collection));
  require(k >= 1, ErrorCode::kInvalidInput, "k must be at least 1");
  validate_vector(*c, query, "query");
  auto idx = c->published_index();
  if (!idx || idx->seq != c->seq.load()) {
    fail(ErrorCode::kRebuildRequired, "index for collection " + collection + " is missing or stale");
  }
  auto filter = canonical_tags(tags);
  std::size_t ef = std::max(params_.ef_search, k);
  if (!filter.empty()) ef *= 4;

  std::vector<std::pair<float, std::uint32_t>> found;
  if (c->metric == Metric::kCosine) {
    found = idx->graph.search(normalized(query), ef, ef);
  } else {
    found = idx->graph.search(query, ef, ef);
  }
  // Candidates are rescored exactly so the final order matches search_exact.
  const Snapshot& snap = *idx->snap;
  std::vector<SearchResult> out;
  out.reserve(found.size());
  for (const auto& [d, id] : found) {
    if (!filter.empty() && !has_all_tags(snap.tags[id], filter)) continue;
    out.push_back({snap.keys[id], score(c->metric, query, snap.row(id)), 0});
  }
  std::sort(out.begin(), out.end(), ranks_before);
  if (out.size() > k) out.resize(k);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<std::uint32_t>(i + 1);
  return out;
}

std::vector<std::uint8_t> EmbeddingFarm::export_bytes(std::string_view actor, const std::string& collection) const {
  auto c = find(collection);
  acl_->require(actor, Action::kRead, Resource::collection(collection));
  auto snap = snapshot(*c);
  CollectionFile file{c->metric, c->dim, {}};
  file.entries.reserve(snap->keys.size());
  for (std::size_t i = 0; i < snap->keys.size(); ++i) file.entries.push_back(snap->entry(i));
  return encode_collection(file);
}

void EmbeddingFarm::export_collection(std::string_view actor, const std::string& collection,
                                      const std::filesystem::path& path) const {
  auto bytes = export_bytes(actor, collection);
  write_file(path, saturn::to_string(bytes));
}

CollectionInfo EmbeddingFarm::import_bytes(std::string_view actor, std::span<const std::uint8_t> bytes,
                                           const std::string& name) {
  acl_->require(actor, Action::kWrite, Resource::all(ResourceKind::kCollection));
  CollectionFile file = decode_collection(bytes);
  {
    std::shared_lock lock(mu_);
    if (collections_.count(name)) fail(ErrorCode::kConflict, "collection " + name + " already exists");
  }
  // Validate everything before anything becomes visible.
  Collection probe;
  probe.name = name;
  probe.dim = file.dim;
  probe.metric = file.metric;
  const Timestamp now = clock_->now();
  std::map<std::string, Entry> entries;
  for (auto& e : file.entries) {
    require(!e.key.empty(), ErrorCode::kInvalidInput, "empty key in collection file");
    validate_vector(probe, e.vector, "stored vector");
    e.tags = canonical_tags(std::move(e.tags));
    e.updated_at = now;
    std::string key = e.key;
    if (!entries.emplace(key, std::move(e)).second) fail(ErrorCode::kInvalidInput, "duplicate key " + key);
  }

  auto info = create_collection(actor, name, file.dim, file.metric);
  auto c = find(name);
  std::lock_guard lock(c->write_mu);
  if (db_) {
    store::Transaction tx(*db_);
    for (const auto& [key, e] : entries) persist_entry(name, e);
    tx.commit();
  }
  c->entries = std::move(entries);
  ++c->seq;
  info.entry_count = c->entries.size();
  return info;
}

CollectionInfo EmbeddingFarm::import_collection(std::string_view actor, const std::filesystem::path& path,
                                                std::optional<std::string> name) {
  std::string data = read_file(path);
  return import_bytes(actor, as_bytes(data), name.value_or(path.stem().string()));
}

}  // namespace saturn::embedfarm
