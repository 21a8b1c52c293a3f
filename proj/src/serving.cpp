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


#include "saturn/serving.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "saturn/config.hpp"
#include "saturn/error.hpp"

namespace saturn::serving {

using governance::Action;
using governance::Resource;

namespace {

std::string make_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ep-%06zu", n);
  return buf;
}

bool valid_route(const std::string& route) {
  if (route.empty() || route.size() > 128) return false;
  return std::all_of(route.begin(), route.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.';
  });
}

std::string fold(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string_view to_string(EndpointStatus s) {
  switch (s) {
    case EndpointStatus::kLive:
      return "live";
    case EndpointStatus::kPaused:
      return "paused";
    case EndpointStatus::kRetired:
      return "retired";
  }
  return "live";
}

EndpointStatus parse_endpoint_status(std::string_view text) {
  if (text == "live") return EndpointStatus::kLive;
  if (text == "paused") return EndpointStatus::kPaused;
  if (text == "retired") return EndpointStatus::kRetired;
  fail(ErrorCode::kInvalidInput, "unknown endpoint status: " + std::string(text));
}

// ---- tokens

TokenStore::TokenStore(const TokenStore& other) {
  std::shared_lock lock(other.mu_);
  by_token_ = other.by_token_;
}

TokenStore& TokenStore::operator=(const TokenStore& other) {
  if (this == &other) return *this;
  std::map<std::string, std::string, std::less<>> copy;
  {
    std::shared_lock lock(other.mu_);
    copy = other.by_token_;
  }
  std::unique_lock lock(mu_);
  by_token_ = std::move(copy);
  return *this;
}

TokenStore TokenStore::parse(std::string_view text) {
  TokenStore out;
  std::size_t lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kInvalidInput,
            "token file line " + std::to_string(lineno) + ": expected principal=token");
    out.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void TokenStore::set(const std::string& principal, const std::string& token) {
  require(!principal.empty() && !token.empty(), ErrorCode::kInvalidInput, "principal and token must be nonempty");
  std::unique_lock lock(mu_);
  auto it = by_token_.find(token);
  require(it == by_token_.end() || it->second == principal, ErrorCode::kConflict,
          "token already assigned to another principal");
  by_token_[token] = principal;
}

void TokenStore::revoke_principal(const std::string& principal) {
  std::unique_lock lock(mu_);
  std::erase_if(by_token_, [&](const auto& kv) { return kv.second == principal; });
}

std::optional<std::string> TokenStore::principal_for(std::string_view token) const {
  std::shared_lock lock(mu_);
  auto it = by_token_.find(token);
  if (it == by_token_.end()) return std::nullopt;
  return it->second;
}

std::string TokenStore::authenticate(std::string_view token) const {
  auto p = principal_for(token);
  if (!p) fail(ErrorCode::kUnauthorized, "unknown or revoked token");
  return *p;
}

std::size_t TokenStore::size() const {
  std::shared_lock lock(mu_);
  return by_token_.size();
}

// ---- artifact cache

ArtifactCache::ArtifactCache(const registry::BlobStore& blobs, std::size_t capacity)
    : blobs_(blobs), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::shared_ptr<const LoadedModel> ArtifactCache::lookup(const std::string& digest) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return nullptr;
  order_.splice(order_.begin(), order_, it->second.second);
  return it->second.first;
}

void ArtifactCache::insert(const std::string& digest, std::shared_ptr<const LoadedModel> model) {
  std::lock_guard lock(mu_);
  if (entries_.count(digest)) return;
  order_.push_front(digest);
  entries_.emplace(digest, std::make_pair(std::move(model), order_.begin()));
  ++loads_;
  while (entries_.size() > capacity_) {
    entries_.erase(order_.back());
    order_.pop_back();
  }
}

std::shared_ptr<const LoadedModel> ArtifactCache::get(const std::string& digest) {
  if (auto hit = lookup(digest)) return hit;
  std::lock_guard fill(fill_mu_);
  if (auto hit = lookup(digest)) return hit;
  auto model = load(digest);
  insert(digest, model);
  return model;
}

std::shared_ptr<const LoadedModel> ArtifactCache::load(const std::string& digest) {
  // fill_mu_ held
  const auto bytes = blobs_.get(digest);
  auto kind = modelkit::artifact_kind(bytes);
  require(kind.has_value(), ErrorCode::kInvalidInput, "blob " + digest + " is not a model artifact");
  auto model = std::make_shared<LoadedModel>();
  model->digest = digest;
  if (*kind == modelkit::ArtifactKind::kEmbedder) {
    model->embedder = std::make_shared<const modelkit::EmbedderArtifact>(modelkit::deserialize_embedder(bytes));
    return model;
  }
  model->classifier = modelkit::deserialize_classifier(bytes);
  std::shared_ptr<const LoadedModel> parent = lookup(model->classifier->parent);
  if (!parent) {
    parent = load(model->classifier->parent);
    insert(model->classifier->parent, parent);
  }
  require(parent->embedder && !parent->classifier, ErrorCode::kIntegrityError,
          "classifier parent is not an embedder");
  require(static_cast<std::size_t>(parent->embedder->dim) == model->classifier->weights.size(),
          ErrorCode::kIntegrityError, "classifier width does not match its embedder");
  model->embedder = parent->embedder;
  return model;
}

void ArtifactCache::clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
  order_.clear();
}

std::size_t ArtifactCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::uint64_t ArtifactCache::loads() const {
  std::lock_guard lock(mu_);
  return loads_;
}

bool ArtifactCache::contains(const std::string& digest) const {
  std::lock_guard lock(mu_);
  return entries_.count(digest) != 0;
}

// ---- serving

Serving::Serving(std::shared_ptr<store::Database> db, std::shared_ptr<registry::Registry> registry,
                 std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<monitor::Monitor> monitor,
                 std::shared_ptr<TokenStore> tokens, std::shared_ptr<const Clock> clock, ServingOptions options)
    : db_(std::move(db)),
      registry_(std::move(registry)),
      acl_(std::move(acl)),
      monitor_(std::move(monitor)),
      tokens_(tokens ? std::move(tokens) : std::make_shared<TokenStore>()),
      clock_(std::move(clock)),
      options_(options),
      cache_(registry_->blobs(), options.cache_capacity) {
  if (db_) {
    db_->exec(
        "CREATE TABLE IF NOT EXISTS serving_endpoints (endpoint_id TEXT PRIMARY KEY, route TEXT NOT NULL UNIQUE,"
        " version_id TEXT NOT NULL, model_id TEXT NOT NULL, artifact_digest TEXT NOT NULL, status TEXT NOT NULL, created_at INTEGER NOT NULL,"
        " updated_at INTEGER NOT NULL);"
        "CREATE TABLE IF NOT EXISTS serving_audit (seq INTEGER PRIMARY KEY AUTOINCREMENT, endpoint_id TEXT NOT NULL,"
        " action TEXT NOT NULL, from_version TEXT, to_version TEXT NOT NULL, actor TEXT NOT NULL,"
        " at INTEGER NOT NULL);");
    load();
  }
}

void Serving::load() {
  auto q = db_->prepare(
      "SELECT endpoint_id, route, version_id, model_id, artifact_digest, status, created_at, updated_at"
      " FROM serving_endpoints");
  while (q.step()) {
    Endpoint ep{q.column_text(0), q.column_text(1),         q.column_text(2),
                q.column_text(3), q.column_text(4),         parse_endpoint_status(q.column_text(5)),
                q.column_int(6),  q.column_int(7)};
    auto slot = std::make_shared<Slot>();
    slot->current = std::make_shared<const Endpoint>(ep);
    route_to_id_[ep.route] = ep.endpoint_id;
    by_id_[ep.endpoint_id] = slot;
    auto dash = ep.endpoint_id.rfind('-');
    next_endpoint_ = std::max(next_endpoint_, std::strtoul(ep.endpoint_id.c_str() + dash + 1, nullptr, 10) + 1);
    if (monitor_) monitor_->register_endpoint(ep.endpoint_id);
  }
  auto a = db_->prepare(
      "SELECT seq, endpoint_id, action, from_version, to_version, actor, at FROM serving_audit ORDER BY seq");
  while (a.step()) {
    BindingRecord r;
    r.seq = a.column_int(0);
    r.endpoint_id = a.column_text(1);
    r.action = a.column_text(2);
    if (!a.column_is_null(3)) r.from_version = a.column_text(3);
    r.to_version = a.column_text(4);
    r.actor = a.column_text(5);
    r.at = a.column_int(6);
    log_.push_back(std::move(r));
  }
}

void Serving::persist(const Endpoint& ep, const BindingRecord& record) {
  if (!db_) return;
  store::Transaction tx(*db_);
  db_->prepare(
         "INSERT INTO serving_endpoints (endpoint_id, route, version_id, model_id, artifact_digest, status,"
         " created_at, updated_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?) ON CONFLICT(endpoint_id) DO UPDATE SET"
         " version_id = excluded.version_id, model_id = excluded.model_id,"
         " artifact_digest = excluded.artifact_digest, status = excluded.status, updated_at = excluded.updated_at")
      .bind(1, ep.endpoint_id)
      .bind(2, ep.route)
      .bind(3, ep.bound_version)
      .bind(4, ep.model_id)
      .bind(5, ep.artifact_digest)
      .bind(6, to_string(ep.status))
      .bind(7, static_cast<std::int64_t>(ep.created_at))
      .bind(8, static_cast<std::int64_t>(ep.updated_at))
      .run();
  auto ins = db_->prepare(
      "INSERT INTO serving_audit (endpoint_id, action, from_version, to_version, actor, at) VALUES (?, ?, ?, ?, ?, ?)");
  ins.bind(1, record.endpoint_id).bind(2, record.action);
  if (record.from_version) {
    ins.bind(3, *record.from_version);
  } else {
    ins.bind_null(3);
  }
  ins.bind(4, record.to_version).bind(5, record.actor).bind(6, static_cast<std::int64_t>(record.at)).run();
  tx.commit();
}

registry::ModelVersion Serving::released_version(std::string_view actor, const std::string& version_id) {
  auto v = registry_->get_version(actor, version_id);
  require(registry::is_released(v.stage), ErrorCode::kGateFailed,
          "version " + version_id + " is in " + std::string(registry::to_string(v.stage)) + ", not released");
  // Fails here rather than on the first request if the blob is corrupt.
  cache_.get(v.artifact_digest);
  return v;
}

std::shared_ptr<Serving::Slot> Serving::slot_by_id(const std::string& endpoint_id) const {
  std::shared_lock lock(mu_);
  auto it = by_id_.find(endpoint_id);
  if (it == by_id_.end()) fail(ErrorCode::kNotFound, "no endpoint " + endpoint_id);
  return it->second;
}

Endpoint Serving::create_endpoint(std::string_view actor, const std::string& version_id, const std::string& route) {
  require(valid_route(route), ErrorCode::kInvalidInput, "route must be 1-128 characters of [A-Za-z0-9._-]");
  acl_->require(actor, Action::kWrite, Resource::all(governance::ResourceKind::kEndpoint));
  std::lock_guard wlock(write_mu_);
  {
    std::shared_lock lock(mu_);
    require(!route_to_id_.count(route), ErrorCode::kConflict, "route already bound: " + route);
  }
  const auto v = released_version(actor, version_id);
  const auto now = clock_->now();
  Endpoint ep{make_id(next_endpoint_), route, v.version_id, v.model_id, v.artifact_digest, EndpointStatus::kLive,
              now, now};
  BindingRecord rec{0, ep.endpoint_id, "create", std::nullopt, v.version_id, std::string(actor), now};
  persist(ep, rec);
  acl_->grant({std::string(actor), governance::Role::kAdmin, Resource::endpoint(ep.endpoint_id)});
  if (monitor_) monitor_->register_endpoint(ep.endpoint_id);

  auto slot = std::make_shared<Slot>();
  slot->current = std::make_shared<const Endpoint>(ep);
  std::unique_lock lock(mu_);
  ++next_endpoint_;
  by_id_[ep.endpoint_id] = slot;
  route_to_id_[route] = ep.endpoint_id;
  rec.seq = static_cast<std::int64_t>(log_.size()) + 1;
  log_.push_back(rec);
  return ep;
}

Endpoint Serving::rebind(std::string_view actor, const std::string& endpoint_id, const std::string& version_id) {
  auto slot = slot_by_id(endpoint_id);
  acl_->require(actor, Action::kWrite, Resource::endpoint(endpoint_id));
  std::lock_guard wlock(write_mu_);
  auto cur = slot->snapshot();
  require(cur->status != EndpointStatus::kRetired, ErrorCode::kInvalidTransition,
          "endpoint " + endpoint_id + " is retired");
  const auto v = released_version(actor, version_id);
  Endpoint next = *cur;
  next.bound_version = v.version_id;
  next.model_id = v.model_id;
  next.artifact_digest = v.artifact_digest;
  next.updated_at = clock_->now();
  BindingRecord rec{0, endpoint_id, "rebind", cur->bound_version, v.version_id, std::string(actor), next.updated_at};
  persist(next, rec);
  slot->publish(std::make_shared<const Endpoint>(next));
  if (monitor_ && options_.refreeze_on_rebind && cur->bound_version != v.version_id) {
    monitor_->refreeze_on_next(endpoint_id);
  }
  std::unique_lock lock(mu_);
  rec.seq = static_cast<std::int64_t>(log_.size()) + 1;
  log_.push_back(rec);
  return next;
}

Endpoint Serving::change_status(std::string_view actor, const std::string& endpoint_id, EndpointStatus to,
                                const char* action) {
  auto slot = slot_by_id(endpoint_id);
  acl_->require(actor, Action::kWrite, Resource::endpoint(endpoint_id));
  std::lock_guard wlock(write_mu_);
  auto cur = slot->snapshot();
  require(cur->status != EndpointStatus::kRetired, ErrorCode::kInvalidTransition,
          "endpoint " + endpoint_id + " is retired");
  if (cur->status == to) return *cur;
  Endpoint next = *cur;
  next.status = to;
  next.updated_at = clock_->now();
  BindingRecord rec{0, endpoint_id, action, cur->bound_version, cur->bound_version, std::string(actor),
                    next.updated_at};
  persist(next, rec);
  slot->publish(std::make_shared<const Endpoint>(next));
  std::unique_lock lock(mu_);
  rec.seq = static_cast<std::int64_t>(log_.size()) + 1;
  log_.push_back(rec);
  return next;
}

Endpoint Serving::pause(std::string_view actor, const std::string& endpoint_id) {
  return change_status(actor, endpoint_id, EndpointStatus::kPaused, "pause");
}

Endpoint Serving::resume(std::string_view actor, const std::string& endpoint_id) {
  return change_status(actor, endpoint_id, EndpointStatus::kLive, "resume");
}

Endpoint Serving::retire(std::string_view actor, const std::string& endpoint_id) {
  return change_status(actor, endpoint_id, EndpointStatus::kRetired, "retire");
}

InferenceResponse Serving::infer(const std::string& route, const InferenceRequest& request,
                                 std::string_view bearer_token) {
  const auto started = std::chrono::steady_clock::now();
  const auto principal = tokens_->authenticate(bearer_token);
  std::shared_ptr<Slot> slot;
  {
    std::shared_lock lock(mu_);
    auto it = route_to_id_.find(route);
    if (it == route_to_id_.end()) fail(ErrorCode::kNotFound, "no endpoint on route " + route);
    slot = by_id_.at(it->second);
  }
  // Everything below runs against this one snapshot, so a concurrent
  // rebind cannot mix two versions into one response.
  const auto ep = slot->snapshot();
  acl_->require(principal, Action::kRead, Resource::endpoint(ep->endpoint_id));
  require(ep->status == EndpointStatus::kLive, ErrorCode::kUnavailable,
          "endpoint " + ep->endpoint_id + " is " + std::string(to_string(ep->status)));
  require(request.tokens.has_value() != request.features.has_value(), ErrorCode::kInvalidInput,
          "request needs exactly one of tokens or features");

  const auto model = cache_.get(ep->artifact_digest);

  InferenceResponse resp;
  resp.endpoint_id = ep->endpoint_id;
  resp.model_version = ep->bound_version;
  std::vector<double> features;
  if (request.tokens) {
    modelkit::Document doc;
    doc.reserve(request.tokens->size());
    for (const auto& t : *request.tokens) doc.push_back(fold(t));
    features = modelkit::embed_document(*model->embedder, doc);
  } else {
    require(model->classifier.has_value(), ErrorCode::kInvalidInput, "embedder endpoints take tokens, not features");
    features = *request.features;
    require(features.size() == model->classifier->weights.size(), ErrorCode::kInvalidInput,
            "expected " + std::to_string(model->classifier->weights.size()) + " features, got " +
                std::to_string(features.size()));
    for (double x : features) require(std::isfinite(x), ErrorCode::kInvalidInput, "features must be finite");
  }
  if (model->classifier) {
    resp.prediction = modelkit::predict(*model->classifier, features);
  } else {
    resp.embedding = features;
  }
  resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  if (monitor_) {
    monitor_->ingest({ep->endpoint_id, std::move(features), resp.prediction, resp.latency_ms, clock_->now()});
  }
  return resp;
}

Endpoint Serving::get(const std::string& endpoint_id) const { return *slot_by_id(endpoint_id)->snapshot(); }

std::optional<Endpoint> Serving::find_by_route(const std::string& route) const {
  std::shared_lock lock(mu_);
  auto it = route_to_id_.find(route);
  if (it == route_to_id_.end()) return std::nullopt;
  return *by_id_.at(it->second)->snapshot();
}

std::vector<Endpoint> Serving::list() const {
  std::shared_lock lock(mu_);
  std::vector<Endpoint> out;
  for (const auto& [id, slot] : by_id_) out.push_back(*slot->snapshot());
  return out;
}

std::vector<BindingRecord> Serving::binding_log() const {
  std::shared_lock lock(mu_);
  return log_;
}

}  // namespace saturn::serving
