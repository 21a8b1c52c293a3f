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

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/config.hpp"
#include "saturn/executor.hpp"
#include "saturn/governance.hpp"
#include "saturn/modelkit.hpp"
#include "saturn/monitor.hpp"
#include "saturn/registry.hpp"
#include "saturn/serving.hpp"
#include "saturn/store.hpp"

// Continuous-training pipeline: triggers in, TRAIN -> VALIDATE -> REGISTER
// -> DEPLOY out.

namespace saturn::orchestrator {

inline constexpr std::string_view kPipelineActor = "system:pipeline";

// ---- datasets

/// One row of a labeled dataset. Text files hold "label<TAB>group<TAB>text";
/// a first line of "#features" switches to "label<TAB>group<TAB>x1 x2 ...".
struct DatasetRow {
  int label = 0;
  std::string group;
  std::optional<modelkit::Document> tokens;
  std::optional<std::vector<double>> features;
};

std::vector<DatasetRow> parse_dataset(std::string_view text);
std::string format_feature_dataset(const std::vector<DatasetRow>& rows);

// ---- training spec

enum class Task { kPretrain, kFinetune };

std::string_view to_string(Task t);

struct GateConfig {
  double min_accuracy = 0.8;
  double min_auc = 0.8;
  double max_fairness_dpd = 0.1;

  /// sha256 of the canonical key=value rendering.
  std::string digest() const;
  std::string canonical() const;
};

/// Defaults from pipeline.gate.* keys.
GateConfig gate_from_config(const Config& config);

struct TrainingSpec {
  Task task = Task::kFinetune;
  std::optional<std::string> model_id;
  std::optional<std::string> model_name;
  std::optional<std::string> parent_version;
  std::vector<std::string> datasets;  // paths, or blob:<digest>
  std::string heldout;
  std::optional<std::string> deploy_route;
  int dim = 8;
  int window = 2;
  std::uint64_t seed = 42;
  modelkit::TrainOptions train;
  GateConfig gate;
};

/// Flat key=value text. Gate keys (gate.min_accuracy, ...) override the
/// defaults passed in.
TrainingSpec parse_training_spec(std::string_view text, const GateConfig& defaults);

// ---- runs

enum class TriggerKind { kCommit, kDrift, kManual };
enum class StageName { kTrain, kValidate, kRegister, kDeploy };
enum class StageStatus { kPending, kRunning, kSucceeded, kFailed, kSkipped };
enum class RunStatus { kPending, kRunning, kSucceeded, kFailed };

std::string_view to_string(TriggerKind k);
std::string_view to_string(StageName s);
std::string_view to_string(StageStatus s);
std::string_view to_string(RunStatus s);
TriggerKind parse_trigger_kind(std::string_view text);
RunStatus parse_run_status(std::string_view text);
StageName parse_stage_name(std::string_view text);
StageStatus parse_stage_status(std::string_view text);

struct Trigger {
  std::string trigger_id;
  TriggerKind kind = TriggerKind::kManual;
  std::map<std::string, std::string> payload;
  Timestamp received_at = 0;
};

struct StageRecord {
  StageName name = StageName::kTrain;
  StageStatus status = StageStatus::kPending;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
  std::string message;
};

struct PipelineRun {
  std::string run_id;
  Trigger trigger;
  RunStatus status = RunStatus::kPending;
  std::array<StageRecord, 4> stages;
  std::string spec_text;
  std::string base_dir;  // relative dataset paths resolve here
  std::string model_key;
  std::optional<std::string> artifact_digest;
  std::optional<registry::ValidationReport> validation;
  std::optional<std::string> produced_version;
  std::optional<std::string> endpoint_id;
  bool rejected = false;
  std::vector<std::string> logs;
  std::optional<Timestamp> finished_at;

  bool terminal() const { return status == RunStatus::kSucceeded || status == RunStatus::kFailed; }
};

struct SubmitResult {
  std::string run_id;
  bool duplicate = false;
};

/// Trigger input before resolution. trigger_id may be empty for manual
/// triggers, in which case a random uuid is assigned.
struct TriggerRequest {
  TriggerKind kind = TriggerKind::kManual;
  std::string trigger_id;
  std::map<std::string, std::string> payload;
};

/// Test hook consulted before each stage; returning true stops the run
/// where it is, as if the process had died.
using InterruptHook = std::function<bool(const PipelineRun&, StageName next)>;

class Orchestrator {
 public:
  Orchestrator(std::shared_ptr<store::Database> db, std::shared_ptr<registry::Registry> registry,
               std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<serving::Serving> serving,
               std::shared_ptr<monitor::Monitor> monitor, std::shared_ptr<const Clock> clock,
               std::shared_ptr<Executor> executor, GateConfig gate_defaults = {});

  /// Commit payload: ref (commit hash), spec (path). Drift payload:
  /// event_id. Manual payload: spec (path). A repeated trigger id returns
  /// the existing run.
  SubmitResult submit_trigger(std::string_view actor, const TriggerRequest& request);

  /// Runs from the first stage that has not finished. No-op on terminal runs.
  PipelineRun execute_run(const std::string& run_id);
  /// Re-enqueues every non-terminal run; called once at startup.
  std::size_t resume();

  PipelineRun get_run(std::string_view actor, const std::string& run_id) const;
  std::vector<PipelineRun> list_runs(std::string_view actor, std::optional<TriggerKind> kind = std::nullopt,
                                     std::optional<RunStatus> status = std::nullopt) const;
  std::size_t run_count() const;

  void set_interrupt_hook(InterruptHook hook);

 private:
  std::string resolve_drift(const TriggerRequest& request, std::string& base_dir, std::string& model_key);
  std::string resolve_spec_file(const TriggerRequest& request, std::string& base_dir, std::string& model_key);
  std::string model_key_for(const TrainingSpec& spec) const;

  void train(PipelineRun& run, const TrainingSpec& spec);
  void validate(PipelineRun& run, const TrainingSpec& spec);
  void register_version(PipelineRun& run, const TrainingSpec& spec);
  void deploy(PipelineRun& run, const TrainingSpec& spec);

  std::vector<DatasetRow> load_dataset(const PipelineRun& run, const std::string& ref) const;
  std::shared_ptr<const modelkit::EmbedderArtifact> embedder_for(const std::string& digest) const;
  std::vector<double> featurize(const DatasetRow& row, const modelkit::EmbedderArtifact* embedder) const;

  void publish(const PipelineRun& run);
  void load();
  std::mutex& model_mutex(const std::string& key);

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<serving::Serving> serving_;
  std::shared_ptr<monitor::Monitor> monitor_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<Executor> executor_;
  GateConfig gate_defaults_;

  mutable std::mutex mu_;
  std::map<std::string, PipelineRun> runs_;
  std::map<std::string, std::string> by_trigger_;
  std::vector<std::string> order_;
  std::map<std::string, std::unique_ptr<std::mutex>> model_locks_;
  // version_id -> (spec text, base dir) of orchestrator-produced versions
  std::map<std::string, std::pair<std::string, std::string>> version_specs_;
  std::size_t next_run_ = 1;
  InterruptHook interrupt_;
};

}  // namespace saturn::orchestrator
