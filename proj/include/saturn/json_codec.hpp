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

// JSON encodings of the domain types, shared by persistence and the HTTP
// API so that both speak the same field names.

#include "json.hpp"
#include "saturn/embedfarm.hpp"
#include "saturn/error.hpp"
#include "saturn/feedback.hpp"
#include "saturn/governance.hpp"
#include "saturn/modelkit.hpp"
#include "saturn/monitor.hpp"
#include "saturn/orchestrator.hpp"
#include "saturn/registry.hpp"
#include "saturn/serving.hpp"

namespace saturn {

using Json = nlohmann::json;

/// Fetches a required field, mapping absence or a type mismatch to invalid-input.
template <typename T>
T field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) fail(ErrorCode::kInvalidInput, std::string("missing field: ") + name);
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kInvalidInput, std::string("bad field: ") + name);
  }
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name) || j.at(name).is_null()) return std::nullopt;
  return field<T>(j, name);
}

}  // namespace saturn

namespace saturn::modelkit {
void to_json(Json& j, const EvalMetrics& m);
void from_json(const Json& j, EvalMetrics& m);
}  // namespace saturn::modelkit

namespace saturn::governance {
void to_json(Json& j, const FairnessReport& r);
void from_json(const Json& j, FairnessReport& r);
void to_json(Json& j, const Grant& g);
void to_json(Json& j, const MitigationResult& m);
void to_json(Json& j, const DenyRecord& d);
}  // namespace saturn::governance

namespace saturn::registry {
void to_json(Json& j, const ValidationReport& r);
void from_json(const Json& j, ValidationReport& r);
void to_json(Json& j, const ModelRecord& m);
void to_json(Json& j, const ModelVersion& v);
void to_json(Json& j, const ArtifactBlob& b);
void to_json(Json& j, const AuditRecord& a);
}  // namespace saturn::registry

namespace saturn::monitor {
void to_json(Json& j, const FeatureHistogram& h);
void from_json(const Json& j, FeatureHistogram& h);
void to_json(Json& j, const ReferenceSnapshot& r);
void from_json(const Json& j, ReferenceSnapshot& r);
void to_json(Json& j, const FeatureDrift& f);
void from_json(const Json& j, FeatureDrift& f);
void to_json(Json& j, const DriftReport& r);
void from_json(const Json& j, DriftReport& r);
void to_json(Json& j, const DriftEvent& e);
void from_json(const Json& j, DriftEvent& e);
}  // namespace saturn::monitor

namespace saturn::serving {
void to_json(Json& j, const Endpoint& e);
void to_json(Json& j, const InferenceResponse& r);
void to_json(Json& j, const BindingRecord& r);
}  // namespace saturn::serving

namespace saturn::orchestrator {
void to_json(Json& j, const Trigger& t);
void from_json(const Json& j, Trigger& t);
void to_json(Json& j, const StageRecord& s);
void from_json(const Json& j, StageRecord& s);
void to_json(Json& j, const PipelineRun& r);
void from_json(const Json& j, PipelineRun& r);
}  // namespace saturn::orchestrator

namespace saturn::feedback {
void to_json(Json& j, const Candidate& c);
void from_json(const Json& j, Candidate& c);
void to_json(Json& j, const FeedbackRecord& r);
void from_json(const Json& j, FeedbackRecord& r);
void to_json(Json& j, const RewardModel& m);
void from_json(const Json& j, RewardModel& m);
void to_json(Json& j, const RewardOptions& o);
void from_json(const Json& j, RewardOptions& o);
void to_json(Json& j, const StoredRewardModel& s);
}  // namespace saturn::feedback

namespace saturn::embedfarm {
void to_json(Json& j, const CollectionInfo& c);
void to_json(Json& j, const Entry& e);
void to_json(Json& j, const SearchResult& r);
}  // namespace saturn::embedfarm
