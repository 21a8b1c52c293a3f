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


#include "saturn/orchestrator.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "saturn/bytes.hpp"
#include "saturn/digest.hpp"
#include "saturn/error.hpp"
#include "saturn/json_codec.hpp"

namespace saturn::orchestrator {

using governance::Action;
using governance::Resource;
using registry::Stage;

namespace {

constexpr std::array<StageName, 4> kStages{StageName::kTrain, StageName::kValidate, StageName::kRegister,
                                           StageName::kDeploy};

const std::set<std::string> kSpecKeys{"task",         "model_id",   "model_name", "parent_version", "dataset",
                                      "heldout",      "deploy_route", "dim",      "window",         "seed",
                                      "lr",           "iterations", "l2",         "gate.min_accuracy",
                                      "gate.min_auc", "gate.max_fairness_dpd"};

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string render(const Config& c) {
  std::string out;
  for (const auto& [k, v] : c.values()) out += k + " = " + v + "\n";
  return out;
}

std::string new_uuid() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  {
    std::lock_guard lock(mu);
    hi = rng();
    lo = rng();
  }
  hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
  lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%08llx-%04llx-%04llx-%04llx-%012llx", static_cast<unsigned long long>(hi >> 32),
                static_cast<unsigned long long>((hi >> 16) & 0xffff), static_cast<unsigned long long>(hi & 0xffff),
                static_cast<unsigned long long>(lo >> 48), static_cast<unsigned long long>(lo & 0xffffffffffffULL));
  return buf;
}

bool plain_id(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  for (unsigned char c : s) {
    if (!std::isalnum(c) && c != '-' && c != '_' && c != '.') return false;
  }
  return true;
}

// Resolution problems in a trigger payload are the caller's input errors.
template <typename F>
auto resolving(F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotFound || e.code() == ErrorCode::kIoError) fail(ErrorCode::kInvalidInput, e.what());
    throw;
  }
}

std::size_t id_number(const std::string& id) {
  auto dash = id.rfind('-');
  return dash == std::string::npos ? 0 : std::strtoul(id.c_str() + dash + 1, nullptr, 10);
}

}  // namespace

// ---- enums

std::string_view to_string(Task t) { return t == Task::kPretrain ? "pretrain" : "finetune"; }

std::string_view to_string(TriggerKind k) {
  switch (k) {
    case TriggerKind::kCommit:
      return "commit";
    case TriggerKind::kDrift:
      return "drift";
    case TriggerKind::kManual:
      return "manual";
  }
  return "manual";
}

std::string_view to_string(StageName s) {
  switch (s) {
    case StageName::kTrain:
      return "TRAIN";
    case StageName::kValidate:
      return "VALIDATE";
    case StageName::kRegister:
      return "REGISTER";
    case StageName::kDeploy:
      return "DEPLOY";
  }
  return "TRAIN";
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::kPending:
      return "pending";
    case StageStatus::kRunning:
      return "running";
    case StageStatus::kSucceeded:
      return "succeeded";
    case StageStatus::kFailed:
      return "failed";
    case StageStatus::kSkipped:
      return "skipped";
  }
  return "pending";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kPending:
      return "pending";
    case RunStatus::kRunning:
      return "running";
    case RunStatus::kSucceeded:
      return "succeeded";
    case RunStatus::kFailed:
      return "failed";
  }
  return "pending";
}

TriggerKind parse_trigger_kind(std::string_view text) {
  for (auto k : {TriggerKind::kCommit, TriggerKind::kDrift, TriggerKind::kManual}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::kInvalidInput, "unknown trigger kind: " + std::string(text));
}

RunStatus parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::kPending, RunStatus::kRunning, RunStatus::kSucceeded, RunStatus::kFailed}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::kInvalidInput, "unknown run status: " + std::string(text));
}

StageName parse_stage_name(std::string_view text) {
  for (auto s : kStages) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::kInvalidInput, "unknown stage: " + std::string(text));
}

StageStatus parse_stage_status(std::string_view text) {
  for (auto s : {StageStatus::kPending, StageStatus::kRunning, StageStatus::kSucceeded, StageStatus::kFailed,
                 StageStatus::kSkipped}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::kInvalidInput, "unknown stage status: " + std::string(text));
}

// ---- datasets

std::vector<DatasetRow> parse_dataset(std::string_view text) {
  std::vector<DatasetRow> rows;
  bool features = false;
  bool first = true;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (first && trim(line) == "#features") {
      features = true;
      first = false;
      continue;
    }
    first = false;
    if (line[0] == '#') continue;
    const auto where = "dataset line " + std::to_string(lineno) + ": ";
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    require(t2 != std::string::npos, ErrorCode::kInvalidInput, where + "expected label<TAB>group<TAB>value");
    DatasetRow row;
    const auto label = trim(line.substr(0, t1));
    require(label == "0" || label == "1", ErrorCode::kInvalidInput, where + "label must be 0 or 1");
    row.label = label == "1" ? 1 : 0;
    row.group = trim(line.substr(t1 + 1, t2 - t1 - 1));
    require(!row.group.empty(), ErrorCode::kInvalidInput, where + "empty group");
    const auto value = line.substr(t2 + 1);
    if (features) {
      std::vector<double> xs;
      for (const auto& tok : split_whitespace(value)) {
        try {
          std::size_t used = 0;
          xs.push_back(std::stod(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          fail(ErrorCode::kInvalidInput, where + "bad number " + tok);
        }
        require(std::isfinite(xs.back()), ErrorCode::kInvalidInput, where + "non-finite feature");
      }
      require(!xs.empty(), ErrorCode::kInvalidInput, where + "empty feature vector");
      row.features = std::move(xs);
    } else {
      row.tokens = modelkit::tokenize(value);
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::kInvalidInput, "dataset has no rows");
  return rows;
}

std::string format_feature_dataset(const std::vector<DatasetRow>& rows) {
  std::string out = "#features\n";
  for (const auto& r : rows) {
    require(r.features.has_value(), ErrorCode::kInvalidInput, "row has no feature vector");
    out += std::to_string(r.label) + "\t" + r.group + "\t";
    for (std::size_t i = 0; i < r.features->size(); ++i) {
      if (i) out += ' ';
      out += fmt((*r.features)[i]);
    }
    out += '\n';
  }
  return out;
}

// ---- spec

std::string GateConfig::canonical() const {
  return "max_fairness_dpd=" + fmt(max_fairness_dpd) + "\nmin_accuracy=" + fmt(min_accuracy) +
         "\nmin_auc=" + fmt(min_auc) + "\n";
}

std::string GateConfig::digest() const { return sha256_hex(std::string_view(canonical())); }

GateConfig gate_from_config(const Config& config) {
  GateConfig g;
  g.min_accuracy = config.get_double("pipeline.gate.min_accuracy", g.min_accuracy);
  g.min_auc = config.get_double("pipeline.gate.min_auc", g.min_auc);
  g.max_fairness_dpd = config.get_double("pipeline.gate.max_fairness_dpd", g.max_fairness_dpd);
  return g;
}

TrainingSpec parse_training_spec(std::string_view text, const GateConfig& defaults) {
  const auto c = Config::parse(text);
  for (const auto& [k, v] : c.values()) {
    require(kSpecKeys.count(k) != 0, ErrorCode::kInvalidInput, "unknown training spec key: " + k);
  }
  TrainingSpec s;
  const auto task = c.get("task");
  require(task.has_value(), ErrorCode::kInvalidInput, "training spec needs task");
  if (*task == "pretrain") {
    s.task = Task::kPretrain;
  } else if (*task == "finetune") {
    s.task = Task::kFinetune;
  } else {
    fail(ErrorCode::kInvalidInput, "task must be pretrain or finetune");
  }
  s.model_id = c.get("model_id");
  s.model_name = c.get("model_name");
  require(s.model_id.has_value() != s.model_name.has_value(), ErrorCode::kInvalidInput,
          "training spec needs exactly one of model_id, model_name");
  s.parent_version = c.get("parent_version");
  require(s.task == Task::kPretrain || s.parent_version.has_value(), ErrorCode::kInvalidInput,
          "finetune needs parent_version");
  for (const auto& d : split(c.get_or("dataset", ""), ',')) {
    auto t = trim(d);
    if (!t.empty()) s.datasets.push_back(t);
  }
  require(!s.datasets.empty(), ErrorCode::kInvalidInput, "training spec needs dataset");
  s.heldout = c.get_or("heldout", "");
  require(!s.heldout.empty(), ErrorCode::kInvalidInput, "training spec needs heldout");
  s.deploy_route = c.get("deploy_route");
  s.dim = static_cast<int>(c.get_int("dim", s.dim));
  s.window = static_cast<int>(c.get_int("window", s.window));
  s.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<long long>(s.seed)));
  s.train.learning_rate = c.get_double("lr", s.train.learning_rate);
  s.train.iterations = static_cast<int>(c.get_int("iterations", s.train.iterations));
  s.train.l2 = c.get_double("l2", s.train.l2);
  require(s.dim >= 1 && s.window >= 1 && s.train.iterations >= 0 && s.train.learning_rate > 0 && s.train.l2 >= 0,
          ErrorCode::kInvalidInput, "hyperparameter out of range");
  s.gate = defaults;
  s.gate.min_accuracy = c.get_double("gate.min_accuracy", s.gate.min_accuracy);
  s.gate.min_auc = c.get_double("gate.min_auc", s.gate.min_auc);
  s.gate.max_fairness_dpd = c.get_double("gate.max_fairness_dpd", s.gate.max_fairness_dpd);
  return s;
}

// ---- orchestrator

Orchestrator::Orchestrator(std::shared_ptr<store::Database> db, std::shared_ptr<registry::Registry> registry,
                           std::shared_ptr<governance::AccessControl> acl, std::shared_ptr<serving::Serving> serving,
                           std::shared_ptr<monitor::Monitor> monitor, std::shared_ptr<const Clock> clock,
                           std::shared_ptr<Executor> executor, GateConfig gate_defaults)
    : db_(std::move(db)),
      registry_(std::move(registry)),
      acl_(std::move(acl)),
      serving_(std::move(serving)),
      monitor_(std::move(monitor)),
      clock_(std::move(clock)),
      executor_(std::move(executor)),
      gate_defaults_(gate_defaults) {
  if (db_) {
    db_->exec(
        "CREATE TABLE IF NOT EXISTS pipeline_triggers (trigger_id TEXT PRIMARY KEY, run_id TEXT NOT NULL UNIQUE);"
        "CREATE TABLE IF NOT EXISTS pipeline_run_log (seq INTEGER PRIMARY KEY AUTOINCREMENT, run_id TEXT NOT NULL,"
        " body TEXT NOT NULL);"
        "CREATE TABLE IF NOT EXISTS pipeline_version_specs (version_id TEXT PRIMARY KEY, spec TEXT NOT NULL,"
        " base_dir TEXT NOT NULL);");
    load();
  }
}

void Orchestrator::load() {
  std::map<std::string, std::string> trigger_of;
  auto t = db_->prepare("SELECT trigger_id, run_id FROM pipeline_triggers");
  while (t.step()) trigger_of[t.column_text(1)] = t.column_text(0);
  auto q = db_->prepare("SELECT run_id, body FROM pipeline_run_log ORDER BY seq");
  while (q.step()) {
    PipelineRun run = Json::parse(q.column_text(1)).get<PipelineRun>();
    if (!runs_.count(run.run_id)) order_.push_back(run.run_id);
    next_run_ = std::max(next_run_, id_number(run.run_id) + 1);
    runs_[run.run_id] = std::move(run);
  }
  for (const auto& [run_id, trigger_id] : trigger_of) {
    if (runs_.count(run_id)) by_trigger_[trigger_id] = run_id;
  }
  std::stable_sort(order_.begin(), order_.end(), [&](const std::string& a, const std::string& b) {
    return runs_.at(a).trigger.received_at < runs_.at(b).trigger.received_at;
  });
  auto v = db_->prepare("SELECT version_id, spec, base_dir FROM pipeline_version_specs");
  while (v.step()) version_specs_[v.column_text(0)] = {v.column_text(1), v.column_text(2)};
}

void Orchestrator::publish(const PipelineRun& run) {
  if (db_) {
    db_->prepare("INSERT INTO pipeline_run_log (run_id, body) VALUES (?, ?)")
        .bind(1, run.run_id)
        .bind(2, Json(run).dump())
        .run();
  }
  std::lock_guard lock(mu_);
  runs_[run.run_id] = run;
}

std::mutex& Orchestrator::model_mutex(const std::string& key) {
  std::lock_guard lock(mu_);
  auto& m = model_locks_[key];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void Orchestrator::set_interrupt_hook(InterruptHook hook) {
  std::lock_guard lock(mu_);
  interrupt_ = std::move(hook);
}

std::string Orchestrator::model_key_for(const TrainingSpec& spec) const {
  return spec.model_id ? *spec.model_id : "name:" + *spec.model_name;
}

std::string Orchestrator::resolve_spec_file(const TriggerRequest& request, std::string& base_dir,
                                            std::string& model_key) {
  auto it = request.payload.find("spec");
  require(it != request.payload.end() && !it->second.empty(), ErrorCode::kInvalidInput,
          "trigger payload needs spec (a training spec path)");
  const auto path = std::filesystem::absolute(it->second);
  require(std::filesystem::is_regular_file(path), ErrorCode::kInvalidInput,
          "training spec not found: " + path.string());
  auto text = resolving([&] { return read_file(path); });
  const auto spec = parse_training_spec(text, gate_defaults_);
  resolving([&] {
    if (spec.model_id) registry_->get_model(kPipelineActor, *spec.model_id);
    if (spec.parent_version) registry_->get_version(kPipelineActor, *spec.parent_version);
    return 0;
  });
  base_dir = path.parent_path().string();
  model_key = model_key_for(spec);
  return text;
}

std::string Orchestrator::resolve_drift(const TriggerRequest& request, std::string& base_dir,
                                        std::string& model_key) {
  require(monitor_ && serving_, ErrorCode::kInvalidInput, "drift triggers need serving and monitoring");
  const auto event_id = request.trigger_id;
  std::optional<monitor::DriftEvent> event;
  for (const auto& e : monitor_->events()) {
    if (e.event_id == event_id) event = e;
  }
  require(event.has_value(), ErrorCode::kInvalidInput, "unknown drift event: " + event_id);
  const auto ep = resolving([&] { return serving_->get(event->endpoint_id); });
  std::pair<std::string, std::string> stored;
  {
    std::lock_guard lock(mu_);
    auto it = version_specs_.find(ep.bound_version);
    require(it != version_specs_.end(), ErrorCode::kInvalidInput,
            "deployed version " + ep.bound_version + " was not produced by the pipeline");
    stored = it->second;
  }
  auto config = Config::parse(stored.first);
  require(config.get_or("task", "") == "finetune", ErrorCode::kInvalidInput,
          "continuous training needs a fine-tuned deployment");

  // Latest data: the live window, labeled by the model that served it.
  std::vector<DatasetRow> rows;
  for (const auto& log : monitor_->window(ep.endpoint_id)) {
    rows.push_back({log.prediction >= 0.5 ? 1 : 0, "live", std::nullopt, log.features});
  }
  require(!rows.empty(), ErrorCode::kInvalidInput, "live window of " + ep.endpoint_id + " is empty");
  const auto blob = registry_->put_blob_unchecked(as_bytes(format_feature_dataset(rows)), "text/tab-separated-values");

  Config next;
  for (const auto& [k, v] : config.values()) {
    if (k != "model_name") next.set(k, v);
  }
  next.set("task", "finetune");
  next.set("model_id", ep.model_id);
  next.set("parent_version", ep.bound_version);
  next.set("deploy_route", ep.route);
  next.set("dataset", config.get_or("dataset", "") + ",blob:" + blob.digest);
  const auto text = render(next);
  parse_training_spec(text, gate_defaults_);
  base_dir = stored.second;
  model_key = ep.model_id;
  return text;
}

SubmitResult Orchestrator::submit_trigger(std::string_view actor, const TriggerRequest& request) {
  acl_->require(actor, Action::kWrite, Resource::pipeline());
  TriggerRequest req = request;
  switch (req.kind) {
    case TriggerKind::kCommit: {
      auto ref = req.payload.count("ref") ? req.payload.at("ref") : req.trigger_id;
      require(!ref.empty(), ErrorCode::kInvalidInput, "commit trigger needs ref (the commit hash)");
      require(req.trigger_id.empty() || req.trigger_id == ref, ErrorCode::kInvalidInput,
              "commit trigger id must equal its ref");
      req.trigger_id = ref;
      req.payload["ref"] = ref;
      break;
    }
    case TriggerKind::kDrift: {
      auto ev = req.payload.count("event_id") ? req.payload.at("event_id") : req.trigger_id;
      require(!ev.empty(), ErrorCode::kInvalidInput, "drift trigger needs event_id");
      req.trigger_id = ev;
      req.payload["event_id"] = ev;
      break;
    }
    case TriggerKind::kManual:
      if (req.trigger_id.empty()) req.trigger_id = new_uuid();
      break;
  }
  require(plain_id(req.trigger_id), ErrorCode::kInvalidInput, "trigger id must be 1-128 of [A-Za-z0-9._-]");
  {
    std::lock_guard lock(mu_);
    auto it = by_trigger_.find(req.trigger_id);
    if (it != by_trigger_.end()) return {it->second, true};
  }

  std::string base_dir;
  std::string model_key;
  const auto spec_text = req.kind == TriggerKind::kDrift ? resolve_drift(req, base_dir, model_key)
                                                         : resolve_spec_file(req, base_dir, model_key);

  PipelineRun run;
  {
    std::lock_guard lock(mu_);
    auto it = by_trigger_.find(req.trigger_id);
    if (it != by_trigger_.end()) return {it->second, true};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run-%06zu", next_run_++);
    run.run_id = buf;
    run.trigger = {req.trigger_id, req.kind, req.payload, clock_->now()};
    for (std::size_t i = 0; i < kStages.size(); ++i) run.stages[i].name = kStages[i];
    run.spec_text = spec_text;
    run.base_dir = base_dir;
    run.model_key = model_key;
    run.logs.push_back("received " + std::string(to_string(req.kind)) + " trigger " + req.trigger_id + " from " +
                       std::string(actor));
    if (db_) {
      store::Transaction tx(*db_);
      db_->prepare("INSERT INTO pipeline_triggers (trigger_id, run_id) VALUES (?, ?)")
          .bind(1, req.trigger_id)
          .bind(2, run.run_id)
          .run();
      db_->prepare("INSERT INTO pipeline_run_log (run_id, body) VALUES (?, ?)")
          .bind(1, run.run_id)
          .bind(2, Json(run).dump())
          .run();
      tx.commit();
    }
    by_trigger_[req.trigger_id] = run.run_id;
    runs_[run.run_id] = run;
    order_.push_back(run.run_id);
  }
  executor_->post([this, id = run.run_id] {
    try {
      execute_run(id);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "pipeline run %s: %s\n", id.c_str(), e.what());
    }
  });
  return {run.run_id, false};
}

std::size_t Orchestrator::resume() {
  std::vector<std::string> pending;
  {
    std::lock_guard lock(mu_);
    for (const auto& id : order_) {
      if (!runs_.at(id).terminal()) pending.push_back(id);
    }
  }
  for (const auto& id : pending) {
    executor_->post([this, id] {
      try {
        execute_run(id);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "pipeline run %s: %s\n", id.c_str(), e.what());
      }
    });
  }
  return pending.size();
}

PipelineRun Orchestrator::execute_run(const std::string& run_id) {
  std::string key;
  {
    std::lock_guard lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) fail(ErrorCode::kNotFound, "no run " + run_id);
    if (it->second.terminal()) return it->second;
    key = it->second.model_key;
  }
  std::lock_guard model_lock(model_mutex(key));
  PipelineRun run;
  InterruptHook interrupt;
  {
    std::lock_guard lock(mu_);
    run = runs_.at(run_id);
    interrupt = interrupt_;
  }
  if (run.terminal()) return run;

  run.status = RunStatus::kRunning;
  std::optional<TrainingSpec> spec;
  for (std::size_t i = 0; i < run.stages.size(); ++i) {
    auto& st = run.stages[i];
    if (st.status == StageStatus::kSucceeded || st.status == StageStatus::kSkipped) continue;
    if (interrupt && interrupt(run, st.name)) {
      publish(run);
      return run;
    }
    try {
      if (!spec) spec = parse_training_spec(run.spec_text, gate_defaults_);
      if (st.name == StageName::kDeploy && (run.rejected || !spec->deploy_route)) {
        st.status = StageStatus::kSkipped;
        st.message = run.rejected ? "version rejected by the validation gate" : "no deploy_route";
        continue;
      }
      st.status = StageStatus::kRunning;
      st.started_at = clock_->now();
      st.message.clear();
      publish(run);
      switch (st.name) {
        case StageName::kTrain:
          train(run, *spec);
          break;
        case StageName::kValidate:
          validate(run, *spec);
          break;
        case StageName::kRegister:
          register_version(run, *spec);
          break;
        case StageName::kDeploy:
          deploy(run, *spec);
          break;
      }
      st.status = StageStatus::kSucceeded;
      st.finished_at = clock_->now();
    } catch (const std::exception& e) {
      const auto* err = dynamic_cast<const Error*>(&e);
      const auto code = err ? err->code() : ErrorCode::kInternal;
      st.status = StageStatus::kFailed;
      if (!st.started_at) st.started_at = clock_->now();
      st.finished_at = clock_->now();
      st.message = std::string(to_string(code)) + ": " + e.what();
      for (std::size_t j = i + 1; j < run.stages.size(); ++j) run.stages[j].status = StageStatus::kSkipped;
      run.logs.push_back(std::string(to_string(st.name)) + " failed: " + st.message);
      run.status = RunStatus::kFailed;
      run.finished_at = clock_->now();
      publish(run);
      return run;
    }
  }
  run.status = RunStatus::kSucceeded;
  run.finished_at = clock_->now();
  publish(run);
  return run;
}

std::vector<DatasetRow> Orchestrator::load_dataset(const PipelineRun& run, const std::string& ref) const {
  if (ref.rfind("blob:", 0) == 0) {
    return parse_dataset(saturn::to_string(registry_->blobs().get(ref.substr(5))));
  }
  std::filesystem::path p(ref);
  if (p.is_relative()) p = std::filesystem::path(run.base_dir) / p;
  require(std::filesystem::is_regular_file(p), ErrorCode::kNotFound, "dataset not found: " + p.string());
  return parse_dataset(read_file(p));
}

std::shared_ptr<const modelkit::EmbedderArtifact> Orchestrator::embedder_for(const std::string& digest) const {
  const auto bytes = registry_->blobs().get(digest);
  const auto kind = modelkit::artifact_kind(bytes);
  require(kind.has_value(), ErrorCode::kInvalidInput, "blob " + digest + " is not a model artifact");
  if (*kind == modelkit::ArtifactKind::kEmbedder) {
    return std::make_shared<const modelkit::EmbedderArtifact>(modelkit::deserialize_embedder(bytes));
  }
  return embedder_for(modelkit::deserialize_classifier(bytes).parent);
}

std::vector<double> Orchestrator::featurize(const DatasetRow& row, const modelkit::EmbedderArtifact* embedder) const {
  if (row.features) {
    require(!embedder || row.features->size() == static_cast<std::size_t>(embedder->dim), ErrorCode::kInvalidInput,
            "feature row width differs from the embedding dimension");
    return *row.features;
  }
  require(embedder != nullptr, ErrorCode::kInvalidInput, "text rows need an embedder");
  return modelkit::embed_document(*embedder, *row.tokens);
}

void Orchestrator::train(PipelineRun& run, const TrainingSpec& spec) {
  if (spec.task == Task::kPretrain) {
    modelkit::Corpus corpus;
    for (const auto& ref : spec.datasets) {
      std::string text;
      if (ref.rfind("blob:", 0) == 0) {
        text = saturn::to_string(registry_->blobs().get(ref.substr(5)));
      } else {
        std::filesystem::path p(ref);
        if (p.is_relative()) p = std::filesystem::path(run.base_dir) / p;
        require(std::filesystem::is_regular_file(p), ErrorCode::kNotFound, "dataset not found: " + p.string());
        text = read_file(p);
      }
      auto part = modelkit::parse_corpus(text);
      for (auto& d : part.documents) corpus.documents.push_back(std::move(d));
    }
    const auto artifact = modelkit::pretrain_embedder(corpus, spec.dim, spec.window, spec.seed);
    run.artifact_digest = registry_->put_blob_unchecked(modelkit::serialize(artifact), modelkit::kEmbedderMediaType).digest;
    run.logs.push_back("pretrained embedder dim=" + std::to_string(spec.dim) + " vocabulary=" +
                       std::to_string(artifact.vocabulary.size()) + " -> " + *run.artifact_digest);
    return;
  }
  const auto parent = registry_->get_version(kPipelineActor, *spec.parent_version);
  const auto embedder = embedder_for(parent.artifact_digest);
  const auto embedder_digest = sha256_hex(modelkit::serialize(*embedder));
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (const auto& ref : spec.datasets) {
    for (const auto& row : load_dataset(run, ref)) {
      xs.push_back(featurize(row, embedder.get()));
      ys.push_back(row.label);
    }
  }
  const auto classifier = modelkit::fit_logistic(xs, ys, spec.train, embedder_digest);
  run.artifact_digest =
      registry_->put_blob_unchecked(modelkit::serialize(classifier), modelkit::kClassifierMediaType).digest;
  run.logs.push_back("fine-tuned classifier on " + std::to_string(xs.size()) + " examples -> " + *run.artifact_digest);
}

void Orchestrator::validate(PipelineRun& run, const TrainingSpec& spec) {
  require(run.artifact_digest.has_value(), ErrorCode::kInternal, "VALIDATE without a trained artifact");
  const auto heldout = load_dataset(run, spec.heldout);
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> groups;
  if (spec.task == Task::kFinetune) {
    const auto classifier = modelkit::deserialize_classifier(registry_->blobs().get(*run.artifact_digest));
    const auto embedder = embedder_for(classifier.parent);
    for (const auto& row : heldout) {
      scores.push_back(modelkit::predict(classifier, featurize(row, embedder.get())));
      labels.push_back(row.label);
      groups.push_back(row.group);
    }
  } else {
    // Linear probe: fit on the even rows, score the odd ones.
    const auto embedder = modelkit::deserialize_embedder(registry_->blobs().get(*run.artifact_digest));
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < heldout.size(); i += 2) {
      train_x.push_back(featurize(heldout[i], &embedder));
      train_y.push_back(heldout[i].label);
    }
    const auto probe = modelkit::fit_logistic(train_x, train_y, spec.train, *run.artifact_digest);
    for (std::size_t i = 1; i < heldout.size(); i += 2) {
      scores.push_back(modelkit::predict(probe, featurize(heldout[i], &embedder)));
      labels.push_back(heldout[i].label);
      groups.push_back(heldout[i].group);
    }
    require(!scores.empty(), ErrorCode::kInvalidInput, "held-out set too small for a probe");
  }
  registry::ValidationReport report;
  report.metrics = modelkit::evaluate_scores(scores, labels);
  std::vector<int> predictions;
  for (double s : scores) predictions.push_back(s >= 0.5 ? 1 : 0);
  if (std::set<std::string>(groups.begin(), groups.end()).size() >= 2) {
    report.fairness = governance::compute_fairness(predictions, labels, groups, scores);
  }
  report.passed = report.metrics.accuracy >= spec.gate.min_accuracy && report.metrics.auc >= spec.gate.min_auc &&
                  (!report.fairness || report.fairness->dpd <= spec.gate.max_fairness_dpd);
  report.gate_config_digest = spec.gate.digest();
  report.evaluated_at = clock_->now();
  run.validation = report;
  run.logs.push_back("validation accuracy=" + fmt(report.metrics.accuracy) + " auc=" + fmt(report.metrics.auc) +
                     (report.fairness ? " dpd=" + fmt(report.fairness->dpd) : std::string()) +
                     (report.passed ? " passed" : " failed the gate"));
}

void Orchestrator::register_version(PipelineRun& run, const TrainingSpec& spec) {
  require(run.artifact_digest && run.validation, ErrorCode::kInternal, "REGISTER before TRAIN/VALIDATE");
  std::string model_id;
  if (spec.model_id) {
    model_id = *spec.model_id;
  } else {
    for (const auto& m : registry_->list_models(kPipelineActor)) {
      if (m.name == *spec.model_name && m.owner == kPipelineActor) model_id = m.model_id;
    }
    if (model_id.empty()) {
      model_id = registry_
                     ->register_model(kPipelineActor, *spec.model_name, registry::Modality::kText,
                                      std::string(kPipelineActor))
                     .model_id;
    }
  }
  const bool finetune = spec.task == Task::kFinetune;
  auto v = registry_->create_version(kPipelineActor, model_id, *run.artifact_digest,
                                     finetune ? spec.parent_version : std::nullopt,
                                     finetune ? Stage::kFineTuning : Stage::kPretraining, run.trigger.trigger_id);
  if (v.stage == Stage::kPretraining || v.stage == Stage::kFineTuning) {
    v = registry_->transition_stage(kPipelineActor, v.version_id, Stage::kTesting);
  }
  if (v.stage == Stage::kTesting) {
    v = registry_->transition_stage(kPipelineActor, v.version_id,
                                    run.validation->passed ? Stage::kReleased : Stage::kRejected, run.validation);
  }
  run.produced_version = v.version_id;
  run.rejected = v.stage == Stage::kRejected;
  {
    std::lock_guard lock(mu_);
    version_specs_[v.version_id] = {run.spec_text, run.base_dir};
  }
  if (db_) {
    db_->prepare("INSERT OR REPLACE INTO pipeline_version_specs (version_id, spec, base_dir) VALUES (?, ?, ?)")
        .bind(1, v.version_id)
        .bind(2, run.spec_text)
        .bind(3, run.base_dir)
        .run();
  }
  run.logs.push_back("registered " + v.version_id + " in " + std::string(registry::to_string(v.stage)));
}

void Orchestrator::deploy(PipelineRun& run, const TrainingSpec& spec) {
  require(serving_ != nullptr, ErrorCode::kUnavailable, "no serving layer configured");
  auto v = registry_->get_version(kPipelineActor, *run.produced_version);
  if (v.stage == Stage::kReleased) v = registry_->transition_stage(kPipelineActor, v.version_id, Stage::kMonitored);
  require(v.stage == Stage::kMonitored, ErrorCode::kInvalidTransition,
          "cannot deploy a version in " + std::string(registry::to_string(v.stage)));
  serving::Endpoint ep;
  if (auto existing = serving_->find_by_route(*spec.deploy_route)) {
    ep = existing->bound_version == v.version_id ? *existing
                                                   : serving_->rebind(kPipelineActor, existing->endpoint_id, v.version_id);
  } else {
    ep = serving_->create_endpoint(kPipelineActor, v.version_id, *spec.deploy_route);
  }
  // Reference = the first traffic the new version sees.
  if (monitor_) monitor_->refreeze_on_next(ep.endpoint_id);
  run.endpoint_id = ep.endpoint_id;
  run.logs.push_back("deployed " + v.version_id + " on " + ep.endpoint_id + " (/" + ep.route + ")");
}

PipelineRun Orchestrator::get_run(std::string_view actor, const std::string& run_id) const {
  acl_->require(actor, Action::kRead, Resource::pipeline());
  std::lock_guard lock(mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) fail(ErrorCode::kNotFound, "no run " + run_id);
  return it->second;
}

std::vector<PipelineRun> Orchestrator::list_runs(std::string_view actor, std::optional<TriggerKind> kind,
                                                 std::optional<RunStatus> status) const {
  acl_->require(actor, Action::kRead, Resource::pipeline());
  std::lock_guard lock(mu_);
  std::vector<PipelineRun> out;
  for (const auto& id : order_) {
    const auto& r = runs_.at(id);
    if (kind && r.trigger.kind != *kind) continue;
    if (status && r.status != *status) continue;
    out.push_back(r);
  }
  return out;
}

std::size_t Orchestrator::run_count() const {
  std::lock_guard lock(mu_);
  return runs_.size();
}

}  // namespace saturn::orchestrator
