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

#include <cstddef>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/governance.hpp"
#include "saturn/modelkit.hpp"
#include "saturn/monitor.hpp"
#include "saturn/registry.hpp"
#include "saturn/store.hpp"

// Endpoints bound to released versions, bearer-token callers, in-process
// inference with the toy models.

namespace saturn::serving {

enum class EndpointStatus { kLive, kPaused, kRetired };

std::string_view to_string(EndpointStatus s);
EndpointStatus parse_endpoint_status(std::string_view text);

struct Endpoint {
  std::string endpoint_id;
  std::string route;
  std::string bound_version;
  std::string model_id;
  std::string artifact_digest;  // of bound_version
  EndpointStatus status = EndpointStatus::kLive;
  Timestamp created_at = 0;
  Timestamp updated_at = 0;
};

/// Exactly one of tokens or features.
struct InferenceRequest {
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<double>> features;
};

struct InferenceResponse {
  std::string endpoint_id;
  std::string model_version;
  double prediction = 0.0;
  double latency_ms = 0.0;
  std::vector<double> embedding;  // only for embedder endpoints
};

struct BindingRecord {
  std::int64_t seq = 0;
  std::string endpoint_id;
  std::string action;  // create | rebind | pause | resume | retire
  std::optional<std::string> from_version;
  std::string to_version;
  std::string actor;
  Timestamp at = 0;
};

/// Static principal=token pairs.
class TokenStore {
 public:
  static TokenStore parse(std::string_view text);

  void set(const std::string& principal, const std::string& token);
  void revoke_principal(const std::string& principal);
  std::optional<std::string> principal_for(std::string_view token) const;
  /// Throws unauthorized.
  std::string authenticate(std::string_view token) const;
  std::size_t size() const;

  TokenStore() = default;
  TokenStore(const TokenStore& other);
  TokenStore& operator=(const TokenStore& other);

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::string, std::less<>> by_token_;
};

/// A deserialized artifact. Classifiers carry their parent embedder.
struct LoadedModel {
  std::string digest;
  std::shared_ptr<const modelkit::EmbedderArtifact> embedder;
  std::optional<modelkit::ClassifierArtifact> classifier;
};

/// Digest-keyed LRU. Lookups run concurrently with each other; fills are
/// serialized. Every fill reads through BlobStore::get, which re-verifies
/// the digest.
class ArtifactCache {
 public:
  ArtifactCache(const registry::BlobStore& blobs, std::size_t capacity);

  std::shared_ptr<const LoadedModel> get(const std::string& digest);
  void clear();
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t loads() const;
  bool contains(const std::string& digest) const;

 private:
  std::shared_ptr<const LoadedModel> load(const std::string& digest);
  std::shared_ptr<const LoadedModel> lookup(const std::string& digest);
  void insert(const std::string& digest, std::shared_ptr<const LoadedModel> model);

  const registry::BlobStore& blobs_;
  std::size_t capacity_;
  std::mutex fill_mu_;
  mutable std::mutex mu_;
  std::list<std::string> order_;  // front = most recent
  std::map<std::string, std::pair<std::shared_ptr<const LoadedModel>, std::list<std::string>::iterator>> entries_;
  std::uint64_t loads_ = 0;
};

struct ServingOptions {
  bool refreeze_on_rebind = true;
  std::size_t cache_capacity = 8;
};

class Serving {
 public:
  Serving(std::shared_ptr<store::Database> db, std::shared_ptr<registry::Registry> registry,
          std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<monitor::Monitor> monitor,
          std::shared_ptr<TokenStore> tokens, std::shared_ptr<const Clock> clock, ServingOptions options = {});

  Endpoint create_endpoint(std::string_view actor, const std::string& version_id, const std::string& route);
  Endpoint rebind(std::string_view actor, const std::string& endpoint_id, const std::string& version_id);
  Endpoint pause(std::string_view actor, const std::string& endpoint_id);
  Endpoint resume(std::string_view actor, const std::string& endpoint_id);
  Endpoint retire(std::string_view actor, const std::string& endpoint_id);

  InferenceResponse infer(const std::string& route, const InferenceRequest& request, std::string_view bearer_token);

  Endpoint get(const std::string& endpoint_id) const;
  std::optional<Endpoint> find_by_route(const std::string& route) const;
  std::vector<Endpoint> list() const;
  std::vector<BindingRecord> binding_log() const;

  ArtifactCache& cache() { return cache_; }
  const TokenStore& tokens() const { return *tokens_; }

 private:
  struct Slot {
    mutable std::mutex mu;
    std::shared_ptr<const Endpoint> current;

    std::shared_ptr<const Endpoint> snapshot() const {
      std::lock_guard lock(mu);
      return current;
    }
    void publish(std::shared_ptr<const Endpoint> next) {
      std::lock_guard lock(mu);
      current = std::move(next);
    }
  };

  std::shared_ptr<Slot> slot_by_id(const std::string& endpoint_id) const;
  registry::ModelVersion released_version(std::string_view actor, const std::string& version_id);
  Endpoint change_status(std::string_view actor, const std::string& endpoint_id, EndpointStatus to,
                         const char* action);
  void persist(const Endpoint& ep, const BindingRecord& record);
  void load();

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<monitor::Monitor> monitor_;
  std::shared_ptr<TokenStore> tokens_;
  std::shared_ptr<const Clock> clock_;
  ServingOptions options_;
  ArtifactCache cache_;

  std::mutex write_mu_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> by_id_;
  std::map<std::string, std::string> route_to_id_;
  std::vector<BindingRecord> log_;
  std::size_t next_endpoint_ = 1;
};

}  // namespace saturn::serving
