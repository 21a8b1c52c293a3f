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
#include "saturn/json_codec.hpp"

namespace saturn::modelkit {

void to_json(Json& j, const EvalMetrics& m) {
  j = Json{{"accuracy", m.accuracy}, {"auc", m.auc}, {"sample_count", m.sample_count}};
}

void from_json(const Json& j, EvalMetrics& m) {
  m.accuracy = field<double>(j, "accuracy");
  m.auc = field<double>(j, "auc");
  m.sample_count = field<std::size_t>(j, "sample_count");
}

}  // namespace saturn::modelkit

namespace saturn::governance {

void to_json(Json& j, const FairnessReport& r) {
  j = Json{{"group_rates", r.group_rates},
           {"group_tpr", r.group_tpr},
           {"group_fpr", r.group_fpr},
           {"group_counts", r.group_counts},
           {"thresholds_used", r.thresholds_used},
           {"degenerate_groups", r.degenerate_groups},
           {"dpd", r.dpd},
           {"eod", r.eod},
           {"dir", r.dir}};
}

void from_json(const Json& j, FairnessReport& r) {
  r.group_rates = field<std::map<std::string, double>>(j, "group_rates");
  r.group_tpr = optional_field<std::map<std::string, double>>(j, "group_tpr").value_or(std::map<std::string, double>{});
  r.group_fpr = optional_field<std::map<std::string, double>>(j, "group_fpr").value_or(std::map<std::string, double>{});
  r.group_counts = field<std::map<std::string, std::size_t>>(j, "group_counts");
  r.thresholds_used =
      optional_field<std::map<std::string, double>>(j, "thresholds_used").value_or(std::map<std::string, double>{});
  r.degenerate_groups =
      optional_field<std::set<std::string>>(j, "degenerate_groups").value_or(std::set<std::string>{});
  r.dpd = field<double>(j, "dpd");
  r.eod = field<double>(j, "eod");
  r.dir = field<double>(j, "dir");
}

void to_json(Json& j, const Grant& g) {
  j = Json{{"principal", g.principal}, {"role", to_string(g.role)}, {"resource", g.resource.to_string()}};
}

}  // namespace saturn::governance

namespace saturn::registry {

void to_json(Json& j, const ValidationReport& r) {
  j = Json{{"metrics", r.metrics},
           {"passed", r.passed},
           {"gate_config_digest", r.gate_config_digest},
           {"evaluated_at", format_timestamp(r.evaluated_at)},
           {"evaluated_at_ms", r.evaluated_at}};
  j["fairness"] = r.fairness ? Json(*r.fairness) : Json(nullptr);
}

void from_json(const Json& j, ValidationReport& r) {
  r.metrics = field<modelkit::EvalMetrics>(j, "metrics");
  r.passed = field<bool>(j, "passed");
  r.gate_config_digest = field<std::string>(j, "gate_config_digest");
  r.evaluated_at = optional_field<Timestamp>(j, "evaluated_at_ms").value_or(0);
  r.fairness = optional_field<governance::FairnessReport>(j, "fairness");
}

void to_json(Json& j, const ModelRecord& m) {
  j = Json{{"model_id", m.model_id},
           {"name", m.name},
           {"modality", to_string(m.modality)},
           {"owner", m.owner},
           {"created_at", format_timestamp(m.created_at)},
           {"created_at_ms", m.created_at}};
}

void to_json(Json& j, const ModelVersion& v) {
  j = Json{{"version_id", v.version_id},
           {"model_id", v.model_id},
           {"stage", to_string(v.stage)},
           {"artifact_digest", v.artifact_digest},
           {"policy", v.policy},
           {"created_at", format_timestamp(v.created_at)},
           {"created_at_ms", v.created_at}};
  j["parent_version"] = v.parent_version ? Json(*v.parent_version) : Json(nullptr);
  j["validation"] = v.validation ? Json(*v.validation) : Json(nullptr);
}

void to_json(Json& j, const ArtifactBlob& b) {
  j = Json{{"digest", b.digest}, {"size_bytes", b.size_bytes}, {"media_type", b.media_type}};
}

void to_json(Json& j, const AuditRecord& a) {
  j = Json{{"seq", a.seq},
           {"version_id", a.version_id},
           {"to", to_string(a.to)},
           {"actor", a.actor},
           {"at", format_timestamp(a.at)},
           {"at_ms", a.at},
           {"artifact_digest", a.artifact_digest}};
  j["from"] = a.from ? Json(to_string(*a.from)) : Json(nullptr);
  j["parent_version"] = a.parent_version ? Json(*a.parent_version) : Json(nullptr);
}

}  // namespace saturn::registry

namespace saturn::monitor {

void to_json(Json& j, const FeatureHistogram& h) { j = Json{{"edges", h.edges}, {"counts", h.counts}}; }

void from_json(const Json& j, FeatureHistogram& h) {
  h.edges = field<std::vector<double>>(j, "edges");
  h.counts = field<std::vector<std::uint64_t>>(j, "counts");
}

void to_json(Json& j, const ReferenceSnapshot& r) {
  j = Json{{"endpoint_id", r.endpoint_id},
           {"features", r.features},
           {"samples", r.samples},
           {"sample_count", r.sample_count},
           {"frozen_at", format_timestamp(r.frozen_at)},
           {"frozen_at_ms", r.frozen_at}};
}

void from_json(const Json& j, ReferenceSnapshot& r) {
  r.endpoint_id = field<std::string>(j, "endpoint_id");
  r.features = field<std::vector<FeatureHistogram>>(j, "features");
  r.samples = field<std::vector<std::vector<double>>>(j, "samples");
  r.sample_count = field<std::size_t>(j, "sample_count");
  r.frozen_at = field<Timestamp>(j, "frozen_at_ms");
}

void to_json(Json& j, const FeatureDrift& f) {
  j = Json{{"feature", f.feature}, {"psi", f.psi}, {"ks_stat", f.ks_stat}, {"ks_critical", f.ks_critical}};
}

void from_json(const Json& j, FeatureDrift& f) {
  f.feature = field<std::size_t>(j, "feature");
  f.psi = field<double>(j, "psi");
  f.ks_stat = field<double>(j, "ks_stat");
  f.ks_critical = field<double>(j, "ks_critical");
}

void to_json(Json& j, const DriftReport& r) {
  j = Json{{"seq", r.seq},
           {"endpoint_id", r.endpoint_id},
           {"window", {{"first", r.window.first}, {"last", r.window.last}, {"count", r.window.count}}},
           {"per_feature", r.per_feature},
           {"verdict", to_string(r.verdict)},
           {"threshold_psi", r.threshold_psi},
           {"max_psi", r.max_psi},
           {"evaluated_at", format_timestamp(r.evaluated_at)},
           {"evaluated_at_ms", r.evaluated_at},
           {"evaluation", r.evaluation},
           {"event_id", r.event_id ? Json(*r.event_id) : Json(nullptr)}};
}

void from_json(const Json& j, DriftReport& r) {
  r.seq = field<std::uint64_t>(j, "seq");
  r.endpoint_id = field<std::string>(j, "endpoint_id");
  const Json& w = j.at("window");
  r.window = {field<Timestamp>(w, "first"), field<Timestamp>(w, "last"), field<std::size_t>(w, "count")};
  r.per_feature = field<std::vector<FeatureDrift>>(j, "per_feature");
  r.verdict = parse_verdict(field<std::string>(j, "verdict"));
  r.threshold_psi = field<double>(j, "threshold_psi");
  r.max_psi = field<double>(j, "max_psi");
  r.evaluated_at = field<Timestamp>(j, "evaluated_at_ms");
  r.evaluation = field<std::uint64_t>(j, "evaluation");
  r.event_id = optional_field<std::string>(j, "event_id");
}

void to_json(Json& j, const DriftEvent& e) {
  j = Json{{"event_id", e.event_id},       {"endpoint_id", e.endpoint_id},
           {"report_seq", e.report_seq},   {"verdict", to_string(e.verdict)},
           {"max_psi", e.max_psi},         {"emitted_at", format_timestamp(e.emitted_at)},
           {"emitted_at_ms", e.emitted_at}};
}

void from_json(const Json& j, DriftEvent& e) {
  e.event_id = field<std::string>(j, "event_id");
  e.endpoint_id = field<std::string>(j, "endpoint_id");
  e.report_seq = field<std::uint64_t>(j, "report_seq");
  e.verdict = parse_verdict(field<std::string>(j, "verdict"));
  e.max_psi = field<double>(j, "max_psi");
  e.emitted_at = field<Timestamp>(j, "emitted_at_ms");
}

}  // namespace saturn::monitor

namespace saturn::serving {

void to_json(Json& j, const Endpoint& e) {
  j = Json{{"endpoint_id", e.endpoint_id},
           {"route", e.route},
           {"bound_version", e.bound_version},
           {"model_id", e.model_id},
           {"artifact_digest", e.artifact_digest},
           {"status", to_string(e.status)},
           {"created_at", format_timestamp(e.created_at)},
           {"created_at_ms", e.created_at},
           {"updated_at", format_timestamp(e.updated_at)},
           {"updated_at_ms", e.updated_at}};
}

void to_json(Json& j, const InferenceResponse& r) {
  j = Json{{"endpoint_id", r.endpoint_id},
           {"model_version", r.model_version},
           {"prediction", r.prediction},
           {"latency_ms", r.latency_ms}};
  if (!r.embedding.empty()) j["embedding"] = r.embedding;
}

void to_json(Json& j, const BindingRecord& r) {
  j = Json{{"seq", r.seq},
           {"endpoint_id", r.endpoint_id},
           {"action", r.action},
           {"to_version", r.to_version},
           {"actor", r.actor},
           {"at", format_timestamp(r.at)},
           {"at_ms", r.at}};
  j["from_version"] = r.from_version ? Json(*r.from_version) : Json(nullptr);
}

}  // namespace saturn::serving

namespace saturn::orchestrator {

namespace {

Json optional_time(const std::optional<Timestamp>& t) { return t ? Json(*t) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const Trigger& t) {
  j = Json{{"trigger_id", t.trigger_id},
           {"kind", to_string(t.kind)},
           {"payload", t.payload},
           {"received_at", format_timestamp(t.received_at)},
           {"received_at_ms", t.received_at}};
}

void from_json(const Json& j, Trigger& t) {
  t.trigger_id = field<std::string>(j, "trigger_id");
  t.kind = parse_trigger_kind(field<std::string>(j, "kind"));
  t.payload = field<std::map<std::string, std::string>>(j, "payload");
  t.received_at = field<Timestamp>(j, "received_at_ms");
}

void to_json(Json& j, const StageRecord& s) {
  j = Json{{"name", to_string(s.name)},
           {"status", to_string(s.status)},
           {"started_at_ms", optional_time(s.started_at)},
           {"finished_at_ms", optional_time(s.finished_at)},
           {"message", s.message}};
}

void from_json(const Json& j, StageRecord& s) {
  s.name = parse_stage_name(field<std::string>(j, "name"));
  s.status = parse_stage_status(field<std::string>(j, "status"));
  s.started_at = optional_field<Timestamp>(j, "started_at_ms");
  s.finished_at = optional_field<Timestamp>(j, "finished_at_ms");
  s.message = optional_field<std::string>(j, "message").value_or("");
}

void to_json(Json& j, const PipelineRun& r) {
  j = Json{{"run_id", r.run_id},
           {"trigger", r.trigger},
           {"status", to_string(r.status)},
           {"stages", r.stages},
           {"spec", r.spec_text},
           {"base_dir", r.base_dir},
           {"model_key", r.model_key},
           {"rejected", r.rejected},
           {"logs", r.logs},
           {"finished_at_ms", optional_time(r.finished_at)}};
  j["artifact_digest"] = r.artifact_digest ? Json(*r.artifact_digest) : Json(nullptr);
  j["validation"] = r.validation ? Json(*r.validation) : Json(nullptr);
  j["produced_version"] = r.produced_version ? Json(*r.produced_version) : Json(nullptr);
  j["endpoint_id"] = r.endpoint_id ? Json(*r.endpoint_id) : Json(nullptr);
}

void from_json(const Json& j, PipelineRun& r) {
  r.run_id = field<std::string>(j, "run_id");
  r.trigger = field<Trigger>(j, "trigger");
  r.status = parse_run_status(field<std::string>(j, "status"));
  const auto stages = field<std::vector<StageRecord>>(j, "stages");
  require(stages.size() == r.stages.size(), ErrorCode::kInvalidInput, "run needs four stages");
  std::copy(stages.begin(), stages.end(), r.stages.begin());
  r.spec_text = field<std::string>(j, "spec");
  r.base_dir = field<std::string>(j, "base_dir");
  r.model_key = field<std::string>(j, "model_key");
  r.rejected = field<bool>(j, "rejected");
  r.logs = field<std::vector<std::string>>(j, "logs");
  r.finished_at = optional_field<Timestamp>(j, "finished_at_ms");
  r.artifact_digest = optional_field<std::string>(j, "artifact_digest");
  r.validation = optional_field<registry::ValidationReport>(j, "validation");
  r.produced_version = optional_field<std::string>(j, "produced_version");
  r.endpoint_id = optional_field<std::string>(j, "endpoint_id");
}

}  // namespace saturn::orchestrator

namespace saturn::feedback {

void to_json(Json& j, const Candidate& c) { j = Json{{"candidate_id", c.candidate_id}, {"features", c.features}}; }

void from_json(const Json& j, Candidate& c) {
  c.candidate_id = field<std::string>(j, "candidate_id");
  c.features = field<std::vector<double>>(j, "features");
}

void to_json(Json& j, const FeedbackRecord& r) {
  j = Json{{"record_id", r.record_id},
           {"prompt_id", r.prompt_id},
           {"candidates", r.candidates},
           {"ranking", r.ranking},
           {"labeler_id", r.labeler_id},
           {"submitted_at", format_timestamp(r.submitted_at)},
           {"submitted_at_ms", r.submitted_at}};
}

void from_json(const Json& j, FeedbackRecord& r) {
  r.record_id = optional_field<std::string>(j, "record_id").value_or("");
  r.prompt_id = field<std::string>(j, "prompt_id");
  r.candidates = field<std::vector<Candidate>>(j, "candidates");
  r.ranking = field<std::vector<std::size_t>>(j, "ranking");
  r.labeler_id = optional_field<std::string>(j, "labeler_id").value_or("");
  r.submitted_at = optional_field<Timestamp>(j, "submitted_at_ms").value_or(0);
}

void to_json(Json& j, const RewardModel& m) {
  j = Json{{"weights", m.weights},
           {"fit_loss", m.fit_loss},
           {"iterations_used", m.iterations_used},
           {"comparisons_count", m.comparisons_count},
           {"l2_lambda", m.l2_lambda}};
}

void from_json(const Json& j, RewardModel& m) {
  m.weights = field<std::vector<double>>(j, "weights");
  m.fit_loss = field<double>(j, "fit_loss");
  m.iterations_used = field<std::size_t>(j, "iterations_used");
  m.comparisons_count = field<std::size_t>(j, "comparisons_count");
  m.l2_lambda = field<double>(j, "l2_lambda");
}

void to_json(Json& j, const RewardOptions& o) {
  j = Json{{"l2_lambda", o.l2_lambda},
           {"learning_rate", o.learning_rate},
           {"max_iters", o.max_iters},
           {"tolerance", o.tolerance}};
}

// Missing keys keep their defaults, so a request may override only some.
void from_json(const Json& j, RewardOptions& o) {
  o.l2_lambda = optional_field<double>(j, "l2_lambda").value_or(o.l2_lambda);
  o.learning_rate = optional_field<double>(j, "learning_rate").value_or(o.learning_rate);
  o.max_iters = optional_field<std::size_t>(j, "max_iters").value_or(o.max_iters);
  o.tolerance = optional_field<double>(j, "tolerance").value_or(o.tolerance);
}

void to_json(Json& j, const StoredRewardModel& s) {
  j = Json{{"reward_model_id", s.reward_model_id},
           {"model", s.model},
           {"blob_digest", s.blob_digest},
           {"prompt_prefix", s.prompt_prefix},
           {"options", s.options},
           {"created_at", format_timestamp(s.created_at)},
           {"created_at_ms", s.created_at}};
}

}  // namespace saturn::feedback

namespace saturn::embedfarm {

void to_json(Json& j, const CollectionInfo& c) {
  j = Json{{"name", c.name},
           {"dim", c.dim},
           {"metric", to_string(c.metric)},
           {"entry_count", c.entry_count},
           {"index_fresh", c.index_fresh},
           {"created_at", format_timestamp(c.created_at)},
           {"created_at_ms", c.created_at}};
}

void to_json(Json& j, const Entry& e) {
  j = Json{{"key", e.key},
           {"vector", e.vector},
           {"tags", e.tags},
           {"updated_at", format_timestamp(e.updated_at)},
           {"updated_at_ms", e.updated_at}};
}

void to_json(Json& j, const SearchResult& r) { j = Json{{"key", r.key}, {"score", r.score}, {"rank", r.rank}}; }

}  // namespace saturn::embedfarm

namespace saturn::governance {

void to_json(Json& j, const MitigationResult& m) {
  j = Json{{"thresholds", m.thresholds},
           {"report", m.report},
           {"infeasible", m.infeasible},
           {"baseline_accuracy", m.baseline_accuracy},
           {"accuracy", m.accuracy}};
}

void to_json(Json& j, const DenyRecord& d) {
  j = Json{{"principal", d.principal},
           {"action", to_string(d.action)},
           {"resource", d.resource.to_string()},
           {"at", format_timestamp(d.at)},
           {"at_ms", d.at}};
}

}  // namespace saturn::governance
