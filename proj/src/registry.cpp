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
#include "saturn/registry.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>

#include "saturn/bytes.hpp"
#include "saturn/config.hpp"
#include "saturn/digest.hpp"
#include "saturn/error.hpp"
#include "saturn/json_codec.hpp"

namespace saturn::registry {
namespace {

using governance::Action;
using governance::Resource;
using governance::ResourceKind;

constexpr std::array<std::pair<Modality, std::string_view>, 6> kModalities{{
    {Modality::kText, "text"},
    {Modality::kImage, "image"},
    {Modality::kSpeech, "speech"},
    {Modality::kTabular, "tabular"},
    {Modality::kTimeseries, "timeseries"},
    {Modality::kMultimodal, "multimodal"},
}};

struct StageName {
  Stage stage;
  std::string_view canonical;
  std::string_view short_name;
};

constexpr std::array<StageName, 7> kStages{{
    {Stage::kPretraining, "S1_PRETRAINING", "S1"},
    {Stage::kFineTuning, "S2_FINE_TUNING", "S2"},
    {Stage::kTesting, "S3_TESTING", "S3"},
    {Stage::kReleased, "S4_RELEASED", "S4"},
    {Stage::kMonitored, "S5_MONITORED", "S5"},
    {Stage::kRejected, "REJECTED", "REJECTED"},
    {Stage::kDeprecated, "DEPRECATED", "DEPRECATED"},
}};

std::string make_id(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", n);
  return std::string(prefix) + buf;
}

std::size_t id_number(const std::string& id) {
  auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoul(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

std::string_view to_string(Modality m) {
  for (const auto& [v, name] : kModalities)
    if (v == m) return name;
  return "text";
}

Modality parse_modality(std::string_view text) {
  for (const auto& [v, name] : kModalities)
    if (name == text) return v;
  fail(ErrorCode::kInvalidInput, "unknown modality: " + std::string(text));
}

std::string_view to_string(Stage s) {
  for (const auto& n : kStages)
    if (n.stage == s) return n.canonical;
  return "S1_PRETRAINING";
}

Stage parse_stage(std::string_view text) {
  for (const auto& n : kStages)
    if (n.canonical == text || n.short_name == text) return n.stage;
  fail(ErrorCode::kInvalidInput, "unknown stage: " + std::string(text));
}

// ---- BlobStore -----------------------------------------------------------

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create blob root " + root_.string() + ": " + ec.message());
}

std::filesystem::path BlobStore::path_for(std::string_view digest) const {
  require(is_digest(digest), ErrorCode::kInvalidInput, "malformed digest");
  return root_ / std::string(digest.substr(0, 2)) / std::string(digest.substr(2, 2)) / std::string(digest);
}

bool BlobStore::contains(std::string_view digest) const {
  if (!is_digest(digest)) return false;
  std::error_code ec;
  return std::filesystem::is_regular_file(path_for(digest), ec);
}

std::string BlobStore::put(std::span<const std::uint8_t> bytes) {
  std::string digest = sha256_hex(bytes);
  auto path = path_for(digest);
  if (contains(digest)) return digest;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + path.parent_path().string());
  // Write to a unique temporary and rename so readers never see a partial blob.
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rng());
  write_file(tmp, saturn::to_string(bytes));
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::kIoError, "cannot store blob " + digest);
  }
  return digest;
}

std::vector<std::uint8_t> BlobStore::get(std::string_view digest) const {
  require(is_digest(digest), ErrorCode::kInvalidInput, "malformed digest");
  if (!contains(digest)) fail(ErrorCode::kNotFound, "no blob " + std::string(digest));
  std::string data = read_file(path_for(digest));
  std::vector<std::uint8_t> bytes(data.begin(), data.end());
  if (sha256_hex(bytes) != digest) {
    fail(ErrorCode::kIntegrityError, "blob " + std::string(digest) + " failed digest verification");
  }
  return bytes;
}

std::size_t BlobStore::count() const {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file() && is_digest(entry.path().filename().string())) ++n;
  }
  return n;
}

// ---- Registry ------------------------------------------------------------

Registry::Registry(std::shared_ptr<store::Database> db, std::filesystem::path blob_root,
                   std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<const Clock> clock)
    : db_(std::move(db)), blobs_(std::move(blob_root)), acl_(std::move(acl)), clock_(std::move(clock)) {
  require(db_ != nullptr && acl_ != nullptr && clock_ != nullptr, ErrorCode::kInternal,
          "registry needs a store, an access list and a clock");
  db_->exec(
      "CREATE TABLE IF NOT EXISTS models ("
      " model_id TEXT PRIMARY KEY, name TEXT NOT NULL, modality TEXT NOT NULL,"
      " owner TEXT NOT NULL, created_at INTEGER NOT NULL, UNIQUE (owner, name));"
      "CREATE TABLE IF NOT EXISTS blobs ("
      " digest TEXT PRIMARY KEY, size INTEGER NOT NULL, media_type TEXT NOT NULL);"
      "CREATE TABLE IF NOT EXISTS versions ("
      " version_id TEXT PRIMARY KEY, model_id TEXT NOT NULL REFERENCES models(model_id),"
      " parent_version TEXT, stage TEXT NOT NULL, artifact_digest TEXT NOT NULL,"
      " validation TEXT, policy TEXT NOT NULL, created_at INTEGER NOT NULL, idem_key TEXT UNIQUE);"
      "CREATE TABLE IF NOT EXISTS audit ("
      " seq INTEGER PRIMARY KEY AUTOINCREMENT, version_id TEXT NOT NULL, from_stage TEXT,"
      " to_stage TEXT NOT NULL, actor TEXT NOT NULL, at INTEGER NOT NULL,"
      " artifact_digest TEXT NOT NULL, parent_version TEXT);");
  load();
}

void Registry::load() {
  auto models = db_->prepare("SELECT model_id, name, modality, owner, created_at FROM models");
  while (models.step()) {
    ModelRecord m{models.column_text(0), models.column_text(1), parse_modality(models.column_text(2)),
                  models.column_text(3), models.column_int(4)};
    next_model_ = std::max(next_model_, id_number(m.model_id) + 1);
    models_.emplace(m.model_id, std::move(m));
  }
  auto blobs = db_->prepare("SELECT digest, size, media_type FROM blobs");
  while (blobs.step()) {
    ArtifactBlob b{blobs.column_text(0), static_cast<std::uint64_t>(blobs.column_int(1)), blobs.column_text(2)};
    blob_meta_.emplace(b.digest, std::move(b));
  }
  auto versions = db_->prepare(
      "SELECT version_id, model_id, parent_version, stage, artifact_digest, validation, policy, created_at, idem_key"
      " FROM versions ORDER BY rowid");
  while (versions.step()) {
    ModelVersion v;
    v.version_id = versions.column_text(0);
    v.model_id = versions.column_text(1);
    if (!versions.column_is_null(2)) v.parent_version = versions.column_text(2);
    v.stage = parse_stage(versions.column_text(3));
    v.artifact_digest = versions.column_text(4);
    if (!versions.column_is_null(5)) v.validation = Json::parse(versions.column_text(5)).get<ValidationReport>();
    v.policy = versions.column_text(6);
    v.created_at = versions.column_int(7);
    if (!versions.column_is_null(8)) idempotency_[versions.column_text(8)] = v.version_id;
    next_version_ = std::max(next_version_, id_number(v.version_id) + 1);
    version_order_.push_back(v.version_id);
    versions_.emplace(v.version_id, std::move(v));
  }
}

ModelRecord Registry::register_model(std::string_view actor, const std::string& name, Modality modality,
                                     const std::string& owner) {
  acl_->require(actor, Action::kWrite, Resource::all(ResourceKind::kModel));
  require(!trim(name).empty(), ErrorCode::kInvalidInput, "model name must be nonempty");
  require(!owner.empty(), ErrorCode::kInvalidInput, "model owner must be nonempty");

  std::lock_guard write(write_mu_);
  {
    std::shared_lock read(mu_);
    for (const auto& [id, m] : models_) {
      if (m.owner == owner && m.name == name) {
        fail(ErrorCode::kConflict, "model '" + name + "' already registered by " + owner);
      }
    }
  }
  ModelRecord m{make_id("model-", next_model_), name, modality, owner, clock_->now()};
  db_->prepare("INSERT INTO models (model_id, name, modality, owner, created_at) VALUES (?, ?, ?, ?, ?)")
      .bind(1, m.model_id)
      .bind(2, m.name)
      .bind(3, to_string(m.modality))
      .bind(4, m.owner)
      .bind(5, m.created_at)
      .run();
  // Owners administer their own models.
  acl_->grant({owner, governance::Role::kAdmin, Resource::model(m.model_id)});
  std::unique_lock lock(mu_);
  ++next_model_;
  models_.emplace(m.model_id, m);
  return m;
}

std::vector<ModelRecord> Registry::list_models(std::string_view actor) const {
  std::shared_lock lock(mu_);
  std::vector<ModelRecord> out;
  for (const auto& [id, m] : models_) {
    if (acl_->permits(actor, Action::kRead, Resource::model(id))) out.push_back(m);
  }
  return out;
}

ModelRecord Registry::get_model(std::string_view actor, const std::string& model_id) const {
  std::shared_lock lock(mu_);
  auto it = models_.find(model_id);
  if (it == models_.end()) fail(ErrorCode::kNotFound, "no model " + model_id);
  acl_->require(actor, Action::kRead, Resource::model(model_id));
  return it->second;
}

ArtifactBlob Registry::put_blob(std::string_view actor, std::span<const std::uint8_t> bytes,
                                std::string_view media_type) {
  acl_->require(actor, Action::kWrite, Resource::all(ResourceKind::kModel));
  return put_blob_unchecked(bytes, media_type);
}

ArtifactBlob Registry::put_blob_unchecked(std::span<const std::uint8_t> bytes, std::string_view media_type) {
  std::string digest = blobs_.put(bytes);
  std::lock_guard write(write_mu_);
  {
    std::shared_lock read(mu_);
    auto it = blob_meta_.find(digest);
    if (it != blob_meta_.end()) return it->second;
  }
  ArtifactBlob b{digest, bytes.size(), std::string(media_type)};
  db_->prepare("INSERT OR IGNORE INTO blobs (digest, size, media_type) VALUES (?, ?, ?)")
      .bind(1, b.digest)
      .bind(2, static_cast<std::int64_t>(b.size_bytes))
      .bind(3, b.media_type)
      .run();
  std::unique_lock lock(mu_);
  blob_meta_.emplace(digest, b);
  return b;
}

std::vector<std::uint8_t> Registry::get_blob(std::string_view actor, std::string_view digest) const {
  bool allowed = acl_->permits(actor, Action::kRead, Resource::all(ResourceKind::kModel));
  if (!allowed) {
    std::shared_lock lock(mu_);
    for (const auto& [id, v] : versions_) {
      if (v.artifact_digest == digest && acl_->permits(actor, Action::kRead, Resource::model(v.model_id))) {
        allowed = true;
        break;
      }
    }
  }
  if (!allowed) acl_->require(actor, Action::kRead, Resource::all(ResourceKind::kModel));
  return blobs_.get(digest);
}

std::optional<ArtifactBlob> Registry::blob_info(std::string_view digest) const {
  std::shared_lock lock(mu_);
  auto it = blob_meta_.find(std::string(digest));
  if (it == blob_meta_.end()) return std::nullopt;
  return it->second;
}

std::size_t Registry::blob_count() const { return blobs_.count(); }

ModelVersion Registry::create_version(std::string_view actor, const std::string& model_id,
                                      const std::string& digest, const std::optional<std::string>& parent_version,
                                      Stage initial_stage, const std::optional<std::string>& idempotency_key,
                                      const std::string& policy) {
  std::lock_guard write(write_mu_);
  {
    std::shared_lock read(mu_);
    if (!models_.count(model_id)) fail(ErrorCode::kNotFound, "no model " + model_id);
    acl_->require(actor, Action::kWrite, Resource::model(model_id));
    if (idempotency_key) {
      auto it = idempotency_.find(*idempotency_key);
      if (it != idempotency_.end()) return versions_.at(it->second);
    }
    require(initial_stage == Stage::kPretraining || initial_stage == Stage::kFineTuning, ErrorCode::kInvalidInput,
            "versions enter at S1 or S2");
    require(initial_stage != Stage::kFineTuning || parent_version.has_value(), ErrorCode::kInvalidInput,
            "a fine-tuned version needs a parent version");
    if (parent_version && !versions_.count(*parent_version)) {
      fail(ErrorCode::kNotFound, "no parent version " + *parent_version);
    }
  }
  if (!blobs_.contains(digest)) fail(ErrorCode::kNotFound, "artifact digest does not resolve: " + digest);

  ModelVersion v;
  v.version_id = make_id("ver-", next_version_);
  v.model_id = model_id;
  v.parent_version = parent_version;
  v.stage = initial_stage;
  v.artifact_digest = digest;
  v.policy = policy;
  v.created_at = clock_->now();

  store::Transaction tx(*db_);
  auto ins = db_->prepare(
      "INSERT INTO versions (version_id, model_id, parent_version, stage, artifact_digest, validation, policy,"
      " created_at, idem_key) VALUES (?, ?, ?, ?, ?, NULL, ?, ?, ?)");
  ins.bind(1, v.version_id).bind(2, v.model_id);
  parent_version ? ins.bind(3, *parent_version) : ins.bind_null(3);
  ins.bind(4, to_string(v.stage)).bind(5, v.artifact_digest).bind(6, v.policy).bind(7, v.created_at);
  idempotency_key ? ins.bind(8, *idempotency_key) : ins.bind_null(8);
  ins.run();
  auto audit = db_->prepare(
      "INSERT INTO audit (version_id, from_stage, to_stage, actor, at, artifact_digest, parent_version)"
      " VALUES (?, NULL, ?, ?, ?, ?, ?)");
  audit.bind(1, v.version_id).bind(2, to_string(v.stage)).bind(3, actor).bind(4, v.created_at).bind(5, digest);
  parent_version ? audit.bind(6, *parent_version) : audit.bind_null(6);
  audit.run();
  tx.commit();

  std::unique_lock lock(mu_);
  ++next_version_;
  if (idempotency_key) idempotency_[*idempotency_key] = v.version_id;
  version_order_.push_back(v.version_id);
  versions_.emplace(v.version_id, v);
  return v;
}

ModelVersion Registry::transition_stage(std::string_view actor, const std::string& version_id, Stage to,
                                        const std::optional<ValidationReport>& report) {
  std::lock_guard write(write_mu_);
  ModelVersion next;
  {
    std::shared_lock read(mu_);
    next = find_version_locked(version_id);
  }
  acl_->require(actor, Action::kWrite, Resource::model(next.model_id));
  const Stage from = next.stage;
  if (!is_legal_transition(from, to)) {
    fail(ErrorCode::kInvalidTransition,
         "illegal transition " + std::string(to_string(from)) + " -> " + std::string(to_string(to)));
  }
  if (report) {
    if (next.validation) fail(ErrorCode::kConflict, "version " + version_id + " already has a validation report");
    next.validation = report;
  }
  if (to == Stage::kReleased && !(next.validation && next.validation->passed)) {
    fail(ErrorCode::kGateFailed, "release requires a passing validation report");
  }
  if ((from == Stage::kPretraining || from == Stage::kFineTuning) && !blobs_.contains(next.artifact_digest)) {
    fail(ErrorCode::kNotFound, "artifact digest does not resolve: " + next.artifact_digest);
  }
  next.stage = to;
  const Timestamp at = clock_->now();

  store::Transaction tx(*db_);
  auto upd = db_->prepare("UPDATE versions SET stage = ?, validation = ? WHERE version_id = ?");
  upd.bind(1, to_string(to));
  next.validation ? upd.bind(2, Json(*next.validation).dump()) : upd.bind_null(2);
  upd.bind(3, version_id).run();
  auto audit = db_->prepare(
      "INSERT INTO audit (version_id, from_stage, to_stage, actor, at, artifact_digest, parent_version)"
      " VALUES (?, ?, ?, ?, ?, ?, ?)");
  audit.bind(1, version_id).bind(2, to_string(from)).bind(3, to_string(to)).bind(4, actor).bind(5, at);
  audit.bind(6, next.artifact_digest);
  next.parent_version ? audit.bind(7, *next.parent_version) : audit.bind_null(7);
  audit.run();
  tx.commit();

  std::unique_lock lock(mu_);
  versions_[version_id] = next;
  return next;
}

const ModelVersion& Registry::find_version_locked(const std::string& version_id) const {
  auto it = versions_.find(version_id);
  if (it == versions_.end()) fail(ErrorCode::kNotFound, "no version " + version_id);
  return it->second;
}

ModelVersion Registry::get_version(std::string_view actor, const std::string& version_id) const {
  std::shared_lock lock(mu_);
  const ModelVersion& v = find_version_locked(version_id);
  acl_->require(actor, Action::kRead, Resource::model(v.model_id));
  return v;
}

std::vector<ModelVersion> Registry::list_versions(std::string_view actor, const std::string& model_id) const {
  std::shared_lock lock(mu_);
  if (!models_.count(model_id)) fail(ErrorCode::kNotFound, "no model " + model_id);
  acl_->require(actor, Action::kRead, Resource::model(model_id));
  std::vector<ModelVersion> out;
  for (const auto& id : version_order_) {
    const auto& v = versions_.at(id);
    if (v.model_id == model_id) out.push_back(v);
  }
  return out;
}

std::vector<ModelVersion> Registry::lineage(std::string_view actor, const std::string& version_id) const {
  std::shared_lock lock(mu_);
  std::vector<ModelVersion> chain;
  const ModelVersion* v = &find_version_locked(version_id);
  acl_->require(actor, Action::kRead, Resource::model(v->model_id));
  chain.push_back(*v);
  while (v->parent_version) {
    v = &find_version_locked(*v->parent_version);
    chain.push_back(*v);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::vector<AuditRecord> Registry::audit_log() const {
  std::vector<AuditRecord> out;
  auto st = db_->prepare(
      "SELECT seq, version_id, from_stage, to_stage, actor, at, artifact_digest, parent_version"
      " FROM audit ORDER BY seq");
  while (st.step()) {
    AuditRecord a;
    a.seq = st.column_int(0);
    a.version_id = st.column_text(1);
    if (!st.column_is_null(2)) a.from = parse_stage(st.column_text(2));
    a.to = parse_stage(st.column_text(3));
    a.actor = st.column_text(4);
    a.at = st.column_int(5);
    a.artifact_digest = st.column_text(6);
    if (!st.column_is_null(7)) a.parent_version = st.column_text(7);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<ModelVersion> Registry::all_versions() const {
  std::shared_lock lock(mu_);
  std::vector<ModelVersion> out;
  for (const auto& id : version_order_) out.push_back(versions_.at(id));
  return out;
}

}  // namespace saturn::registry
