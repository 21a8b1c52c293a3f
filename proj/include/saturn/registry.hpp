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
#include "saturn/governance.hpp"
#include "saturn/modelkit.hpp"
#include "saturn/store.hpp"

namespace saturn::registry {

enum class Modality { kText, kImage, kSpeech, kTabular, kTimeseries, kMultimodal };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

/// Lifecycle stages S1..S5 plus the two terminals.
enum class Stage { kPretraining, kFineTuning, kTesting, kReleased, kMonitored, kRejected, kDeprecated };

std::string_view to_string(Stage s);
/// Accepts the canonical names ("S3_TESTING") and the short forms ("S3").
Stage parse_stage(std::string_view text);

constexpr bool is_legal_transition(Stage from, Stage to) {
  switch (from) {
    case Stage::kPretraining:
      return to == Stage::kFineTuning || to == Stage::kTesting;
    case Stage::kFineTuning:
      return to == Stage::kTesting;
    case Stage::kTesting:
      return to == Stage::kReleased || to == Stage::kRejected;
    case Stage::kReleased:
      return to == Stage::kMonitored || to == Stage::kDeprecated;
    case Stage::kMonitored:
      return to == Stage::kDeprecated;
    case Stage::kRejected:
    case Stage::kDeprecated:
      return false;
  }
  return false;
}

constexpr bool is_released(Stage s) { return s == Stage::kReleased || s == Stage::kMonitored; }

struct ModelRecord {
  std::string model_id;
  std::string name;
  Modality modality = Modality::kText;
  std::string owner;
  Timestamp created_at = 0;
};

struct ValidationReport {
  modelkit::EvalMetrics metrics;
  std::optional<governance::FairnessReport> fairness;
  bool passed = false;
  std::string gate_config_digest;
  Timestamp evaluated_at = 0;
};

struct ModelVersion {
  std::string version_id;
  std::string model_id;
  std::optional<std::string> parent_version;
  Stage stage = Stage::kPretraining;
  std::string artifact_digest;
  std::optional<ValidationReport> validation;
  std::string policy;  // free-text usage restrictions
  Timestamp created_at = 0;
};

struct ArtifactBlob {
  std::string digest;
  std::uint64_t size_bytes = 0;
  std::string media_type;
};

struct AuditRecord {
  std::int64_t seq = 0;
  std::string version_id;
  std::optional<Stage> from;  // empty for the creation record
  Stage to = Stage::kPretraining;
  std::string actor;
  Timestamp at = 0;
  std::string artifact_digest;  // as of this record
  std::optional<std::string> parent_version;
};

/// Immutable content-addressed files: root/aa/bb/<sha256>.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  /// Writes unless already present. Returns the digest.
  std::string put(std::span<const std::uint8_t> bytes);
  /// Reads and re-verifies the digest; a mismatch is an integrity error.
  std::vector<std::uint8_t> get(std::string_view digest) const;
  bool contains(std::string_view digest) const;
  std::filesystem::path path_for(std::string_view digest) const;
  std::size_t count() const;

 private:
  std::filesystem::path root_;
};

/// The model catalog. Every public operation is checked against the access
/// control list on behalf of actor. Writes are serialized; reads run
/// concurrently against the in-memory catalog.
class Registry {
 public:
  Registry(std::shared_ptr<store::Database> db, std::filesystem::path blob_root,
           std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<const Clock> clock);

  ModelRecord register_model(std::string_view actor, const std::string& name, Modality modality,
                             const std::string& owner);
  std::vector<ModelRecord> list_models(std::string_view actor) const;
  ModelRecord get_model(std::string_view actor, const std::string& model_id) const;

  ArtifactBlob put_blob(std::string_view actor, std::span<const std::uint8_t> bytes,
                        std::string_view media_type = "application/octet-stream");
  /// For platform services that have already authorized their caller.
  ArtifactBlob put_blob_unchecked(std::span<const std::uint8_t> bytes, std::string_view media_type);
  std::vector<std::uint8_t> get_blob(std::string_view actor, std::string_view digest) const;
  std::optional<ArtifactBlob> blob_info(std::string_view digest) const;
  std::size_t blob_count() const;
  const BlobStore& blobs() const { return blobs_; }

  /// idempotency_key, when given, makes a repeated call return the version
  /// created by the first one.
  ModelVersion create_version(std::string_view actor, const std::string& model_id, const std::string& digest,
                              const std::optional<std::string>& parent_version, Stage initial_stage,
                              const std::optional<std::string>& idempotency_key = std::nullopt,
                              const std::string& policy = {});
  ModelVersion transition_stage(std::string_view actor, const std::string& version_id, Stage to,
                                const std::optional<ValidationReport>& report = std::nullopt);

  ModelVersion get_version(std::string_view actor, const std::string& version_id) const;
  std::vector<ModelVersion> list_versions(std::string_view actor, const std::string& model_id) const;
  /// Root-first ancestor chain ending at version_id.
  std::vector<ModelVersion> lineage(std::string_view actor, const std::string& version_id) const;

  std::vector<AuditRecord> audit_log() const;
  std::vector<ModelVersion> all_versions() const;

 private:
  void load();
  const ModelVersion& find_version_locked(const std::string& version_id) const;

  std::shared_ptr<store::Database> db_;
  BlobStore blobs_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<const Clock> clock_;

  std::mutex write_mu_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ModelRecord> models_;
  std::map<std::string, ModelVersion> versions_;
  std::vector<std::string> version_order_;
  std::map<std::string, std::string> idempotency_;
  std::map<std::string, ArtifactBlob> blob_meta_;
  std::size_t next_model_ = 1;
  std::size_t next_version_ = 1;
};

}  // namespace saturn::registry
