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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "saturn/error.hpp"
#include "saturn/json_codec.hpp"
#include "scenario_fixtures.hpp"
#include "test_util.hpp"

namespace saturn::orchestrator {
namespace {

using governance::Resource;
using governance::Role;
using registry::Stage;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kInternal;
}

// Accepts work and never runs it.
class DroppingExecutor final : public Executor {
 public:
  void post(saturn::Task) override { ++posted; }
  void drain() override {}
  std::size_t posted = 0;
};

TEST(Dataset, ParsesTextAndFeatureFormats) {
  auto text = parse_dataset("1\ta\tGood Movie\n\n0\tb\tbad  film\n");
  ASSERT_EQ(text.size(), 2u);
  EXPECT_EQ(text[0].label, 1);
  EXPECT_EQ(text[0].group, "a");
  EXPECT_EQ(*text[0].tokens, (modelkit::Document{"good", "movie"}));
  EXPECT_FALSE(text[0].features);

  auto feats = parse_dataset("#features\n0\tlive\t1.5 -2 3e-1\n");
  ASSERT_EQ(feats.size(), 1u);
  EXPECT_EQ(*feats[0].features, (std::vector<double>{1.5, -2, 0.3}));
  EXPECT_EQ(parse_dataset(format_feature_dataset(feats))[0].features, feats[0].features);

  EXPECT_EQ(code_of([] { parse_dataset(""); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { parse_dataset("2\ta\tx\n"); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { parse_dataset("1\tx\n"); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { parse_dataset("1\t\tx\n"); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { parse_dataset("#features\n1\ta\t1 nan\n"); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { parse_dataset("#features\n1\ta\t1 x\n"); }), ErrorCode::kInvalidInput);
}

TEST(Spec, ParsesDefaultsOverridesAndRejectsUnknownKeys) {
  GateConfig defaults;
  defaults.min_auc = 0.7;
  auto s = parse_training_spec(
      "task = finetune\nmodel_id = model-000001\nparent_version = ver-000001\n"
      "dataset = a.tsv, b.tsv\nheldout = h.tsv\ngate.min_accuracy = 1.01\nlr = 0.2\n",
      defaults);
  EXPECT_EQ(s.task, Task::kFinetune);
  EXPECT_EQ(s.datasets, (std::vector<std::string>{"a.tsv", "b.tsv"}));
  EXPECT_EQ(s.gate.min_accuracy, 1.01);
  EXPECT_EQ(s.gate.min_auc, 0.7);
  EXPECT_EQ(s.gate.max_fairness_dpd, 0.1);
  EXPECT_EQ(s.train.learning_rate, 0.2);
  EXPECT_EQ(s.train.iterations, 500);
  EXPECT_FALSE(s.deploy_route);

  const GateConfig g;
  EXPECT_EQ(code_of([&] { parse_training_spec("model_id=m\ndataset=d\nheldout=h\n", g); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { parse_training_spec("task=finetune\nmodel_id=m\ndataset=d\nheldout=h\n", g); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { parse_training_spec("task=pretrain\nmodel_id=m\ndataset=d\nheldout=h\nbogus=1\n", g); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { parse_training_spec("task=pretrain\nmodel_id=m\nmodel_name=n\ndataset=d\nheldout=h\n", g); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { parse_training_spec("task=pretrain\nmodel_name=n\ndataset=d\nheldout=h\ndim=0\n", g); }),
            ErrorCode::kInvalidInput);
  EXPECT_NE(GateConfig{}.digest(), s.gate.digest());
}

class OrchestratorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_scenario_data(dir_.path(), 11);
    open();
  }

  void open(std::shared_ptr<Executor> executor = std::make_shared<InlineExecutor>(),
            std::shared_ptr<const Clock> clock = nullptr) {
    orch_.reset();
    if (!clock) clock = clock_;
    if (!db_) db_ = store::Database::open((dir_ / "saturn.db").string());
    acl_ = std::make_shared<governance::AccessControl>(db_, clock);
    acl_->grant({std::string(kPipelineActor), Role::kAdmin, Resource::any()});
    acl_->grant({"dev", Role::kWriter, Resource::pipeline()});
    acl_->grant({"viewer", Role::kReader, Resource::pipeline()});
    registry_ = std::make_shared<registry::Registry>(db_, dir_ / "blobs", acl_, clock);
    monitor_ = std::make_shared<monitor::Monitor>(db_, clock, std::make_shared<InlineExecutor>());
    tokens_ = std::make_shared<serving::TokenStore>(serving::TokenStore::parse("pipeline=t-pipe\n"));
    serving_ = std::make_shared<serving::Serving>(db_, registry_, acl_, monitor_, tokens_, clock);
    orch_ = std::make_unique<Orchestrator>(db_, registry_, acl_, serving_, monitor_, clock, std::move(executor));
  }

  std::string spec_file(const std::string& name, const std::string& body) {
    testing::write_text(dir_ / name, body);
    return (dir_ / name).string();
  }

  SubmitResult commit(const std::string& ref, const std::string& spec) {
    return orch_->submit_trigger("dev", {TriggerKind::kCommit, "", {{"ref", ref}, {"spec", spec}}});
  }

  // Pretrained embedder released in S4; returns its version id.
  std::string pretrain() {
    auto r = commit("c0ffee0", spec_file("pretrain.txt",
                                         "task = pretrain\nmodel_name = sentiment-base\ndataset = corpus.txt\n"
                                         "heldout = heldout.tsv\ndim = 4\nwindow = 2\nseed = 7\n"));
    const auto run = orch_->get_run("dev", r.run_id);
    EXPECT_EQ(run.status, RunStatus::kSucceeded) << run.stages[0].message << run.stages[1].message;
    return run.produced_version.value_or("");
  }

  std::string finetune_spec(const std::string& parent, const std::string& extra = "") {
    return spec_file("finetune.txt", "task = finetune\nmodel_name = sentiment\nparent_version = " + parent +
                                         "\ndataset = train.tsv\nheldout = heldout.tsv\n" + extra);
  }

  testing::TempDir dir_;
  std::shared_ptr<ManualClock> clock_ = std::make_shared<ManualClock>();
  std::shared_ptr<store::Database> db_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<monitor::Monitor> monitor_;
  std::shared_ptr<serving::TokenStore> tokens_;
  std::shared_ptr<serving::Serving> serving_;
  std::unique_ptr<Orchestrator> orch_;
};

TEST_F(OrchestratorTest, PretrainThenFinetuneDeploys) {
  const auto base = pretrain();
  ASSERT_FALSE(base.empty());
  const auto bv = registry_->get_version(kPipelineActor, base);
  EXPECT_EQ(bv.stage, Stage::kReleased);
  ASSERT_TRUE(bv.validation);
  EXPECT_TRUE(bv.validation->passed);

  auto r = commit("deadbeef", finetune_spec(base, "deploy_route = sentiment\n"));
  EXPECT_FALSE(r.duplicate);
  const auto run = orch_->get_run("viewer", r.run_id);
  ASSERT_EQ(run.status, RunStatus::kSucceeded) << run.stages[0].message;
  for (const auto& st : run.stages) EXPECT_EQ(st.status, StageStatus::kSucceeded) << to_string(st.name);
  ASSERT_TRUE(run.produced_version && run.endpoint_id && run.validation);
  EXPECT_GE(run.validation->metrics.accuracy, 0.95);
  EXPECT_EQ(run.validation->gate_config_digest, GateConfig{}.digest());
  ASSERT_TRUE(run.validation->fairness);

  const auto v = registry_->get_version(kPipelineActor, *run.produced_version);
  EXPECT_EQ(v.stage, Stage::kMonitored);
  EXPECT_EQ(v.parent_version, base);
  const auto ep = serving_->get(*run.endpoint_id);
  EXPECT_EQ(ep.status, serving::EndpointStatus::kLive);
  EXPECT_EQ(ep.bound_version, v.version_id);
  EXPECT_TRUE(monitor_->has_endpoint(ep.endpoint_id));
}

TEST_F(OrchestratorTest, DuplicateTriggerReturnsTheSameRun) {
  const auto base = pretrain();
  const auto spec = finetune_spec(base);
  auto a = commit("abc123", spec);
  auto b = commit("abc123", spec);
  EXPECT_FALSE(a.duplicate);
  EXPECT_TRUE(b.duplicate);
  EXPECT_EQ(a.run_id, b.run_id);
  EXPECT_EQ(orch_->run_count(), 2u);
  // A duplicate is answered before the payload is looked at.
  std::filesystem::remove(spec);
  EXPECT_TRUE(commit("abc123", spec).duplicate);
}

TEST_F(OrchestratorTest, UnsatisfiableGateRejectsAndSkipsDeploy) {
  const auto base = pretrain();
  auto r = commit("feed01", finetune_spec(base, "deploy_route = sentiment\ngate.min_accuracy = 1.01\n"));
  const auto run = orch_->get_run("dev", r.run_id);
  EXPECT_EQ(run.status, RunStatus::kSucceeded);
  EXPECT_TRUE(run.rejected);
  EXPECT_EQ(run.stages[2].status, StageStatus::kSucceeded);
  EXPECT_EQ(run.stages[3].status, StageStatus::kSkipped);
  EXPECT_EQ(registry_->get_version(kPipelineActor, *run.produced_version).stage, Stage::kRejected);
  EXPECT_FALSE(serving_->find_by_route("sentiment"));
}

TEST_F(OrchestratorTest, MissingDatasetFailsTrainAndSkipsTheRest) {
  const auto spec = spec_file("bad.txt", "task = pretrain\nmodel_name = m\ndataset = nowhere.txt\nheldout = heldout.tsv\n");
  auto r = commit("0badf00d", spec);
  const auto run = orch_->get_run("dev", r.run_id);
  EXPECT_EQ(run.status, RunStatus::kFailed);
  EXPECT_EQ(run.stages[0].status, StageStatus::kFailed);
  EXPECT_NE(run.stages[0].message.find("not-found"), std::string::npos);
  for (int i = 1; i < 4; ++i) {
    EXPECT_EQ(run.stages[i].status, StageStatus::kSkipped);
    EXPECT_FALSE(run.stages[i].started_at);
  }
  EXPECT_FALSE(run.produced_version);
  EXPECT_EQ(orch_->list_runs("dev", std::nullopt, RunStatus::kFailed).size(), 1u);
}

TEST_F(OrchestratorTest, UnresolvablePayloadsAreInvalidInput) {
  EXPECT_EQ(code_of([&] { commit("aa11", (dir_ / "missing.txt").string()); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { commit("aa12", finetune_spec("ver-999999")); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { commit("", finetune_spec("ver-999999")); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] {
              orch_->submit_trigger("dev", {TriggerKind::kDrift, "", {{"event_id", "no-such-event"}}});
            }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { commit("aa13", spec_file("s.txt", "task = finetune\n")); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(orch_->run_count(), 0u);
  EXPECT_EQ(code_of([&] { orch_->submit_trigger("viewer", {TriggerKind::kManual, "", {}}); }),
            ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] { orch_->get_run("dev", "run-000042"); }), ErrorCode::kNotFound);
}

TEST_F(OrchestratorTest, ManualTriggersGetUuids) {
  auto d = std::make_shared<DroppingExecutor>();
  open(d);
  const auto spec = spec_file("p.txt", "task = pretrain\nmodel_name = m\ndataset = corpus.txt\nheldout = heldout.tsv\n");
  auto a = orch_->submit_trigger("dev", {TriggerKind::kManual, "", {{"spec", spec}}});
  auto b = orch_->submit_trigger("dev", {TriggerKind::kManual, "", {{"spec", spec}}});
  EXPECT_NE(a.run_id, b.run_id);
  const auto id = orch_->get_run("dev", a.run_id).trigger.trigger_id;
  EXPECT_EQ(id.size(), 36u);
  EXPECT_EQ(id[14], '4');
  auto c = orch_->submit_trigger("dev", {TriggerKind::kManual, id, {{"spec", spec}}});
  EXPECT_TRUE(c.duplicate);
  EXPECT_EQ(c.run_id, a.run_id);
  EXPECT_EQ(d->posted, 2u);
}

TEST_F(OrchestratorTest, RunsCreatedEqualDistinctTriggerIds) {
  const auto spec = spec_file("p.txt", "task = pretrain\nmodel_name = m\ndataset = corpus.txt\nheldout = heldout.tsv\n");
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 200; ++c) {
    auto d = std::make_shared<DroppingExecutor>();
    db_.reset();
    std::filesystem::remove(dir_ / "saturn.db");
    open(d);
    std::set<std::string> distinct;
    std::map<std::string, std::string> first_run;
    const int n = 1 + static_cast<int>(rng() % 20);
    const int pool = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const auto kind = rng() % 2 ? TriggerKind::kCommit : TriggerKind::kManual;
      const std::string id = (kind == TriggerKind::kCommit ? "c" : "m") + std::to_string(rng() % pool);
      auto r = kind == TriggerKind::kCommit ? commit(id, spec)
                                            : orch_->submit_trigger("dev", {kind, id, {{"spec", spec}}});
      EXPECT_EQ(r.duplicate, distinct.count(id) == 1);
      if (!distinct.insert(id).second) EXPECT_EQ(r.run_id, first_run[id]);
      first_run.emplace(id, r.run_id);
    }
    ASSERT_EQ(orch_->run_count(), distinct.size()) << "case " << c;
    ASSERT_EQ(d->posted, distinct.size());
  }
}

TEST_F(OrchestratorTest, StageTimestampsAreMonotone) {
  open(std::make_shared<InlineExecutor>(), std::make_shared<SystemClock>());
  const auto base = pretrain();
  auto r = commit("beef", finetune_spec(base, "deploy_route = s\n"));
  for (const auto& run : orch_->list_runs("dev")) {
    Timestamp last = run.trigger.received_at;
    for (const auto& st : run.stages) {
      if (st.status == StageStatus::kSkipped) continue;
      ASSERT_TRUE(st.started_at && st.finished_at);
      EXPECT_LE(last, *st.started_at);
      EXPECT_LE(*st.started_at, *st.finished_at);
      last = *st.finished_at;
    }
  }
  EXPECT_EQ(orch_->get_run("dev", r.run_id).status, RunStatus::kSucceeded);
}

TEST_F(OrchestratorTest, InterruptedRunResumesFromFirstUnfinishedStage) {
  const auto base = pretrain();
  int interrupts = 0;
  orch_->set_interrupt_hook([&](const PipelineRun&, StageName next) {
    if (next == StageName::kDeploy && interrupts == 0) {
      ++interrupts;
      return true;
    }
    return false;
  });
  auto r = commit("cafe", finetune_spec(base, "deploy_route = sentiment\n"));
  const auto partial = orch_->get_run("dev", r.run_id);
  ASSERT_EQ(partial.status, RunStatus::kRunning);
  EXPECT_EQ(partial.stages[2].status, StageStatus::kSucceeded);
  EXPECT_EQ(partial.stages[3].status, StageStatus::kPending);
  const auto versions_before = registry_->all_versions().size();

  clock_->advance(5000);
  open();  // fresh process on the same store
  EXPECT_EQ(orch_->get_run("dev", r.run_id).status, RunStatus::kRunning);
  EXPECT_EQ(orch_->resume(), 1u);
  const auto done = orch_->get_run("dev", r.run_id);
  EXPECT_EQ(done.status, RunStatus::kSucceeded);
  EXPECT_EQ(done.stages[0].started_at, partial.stages[0].started_at);
  EXPECT_EQ(*done.stages[3].started_at, clock_->now());
  EXPECT_EQ(done.produced_version, partial.produced_version);
  EXPECT_EQ(registry_->all_versions().size(), versions_before);
  EXPECT_EQ(serving_->get(*done.endpoint_id).bound_version, *done.produced_version);
  EXPECT_EQ(orch_->resume(), 0u);
}

TEST_F(OrchestratorTest, RegisterIsIdempotentWhenReplayed) {
  const auto base = pretrain();
  bool interrupted = false;
  // Interrupt after REGISTER ran but pretend its completion was lost.
  orch_->set_interrupt_hook([&](const PipelineRun&, StageName next) {
    if (next == StageName::kDeploy && !interrupted) {
      interrupted = true;
      return true;
    }
    return false;
  });
  auto r = commit("f00d", finetune_spec(base));
  auto run = orch_->get_run("dev", r.run_id);
  const auto produced = *run.produced_version;
  run.stages[2].status = StageStatus::kRunning;
  db_->prepare("INSERT INTO pipeline_run_log (run_id, body) VALUES (?, ?)").bind(1, run.run_id).bind(2, Json(run).dump()).run();
  const auto count = registry_->all_versions().size();
  open();
  orch_->resume();
  const auto done = orch_->get_run("dev", r.run_id);
  EXPECT_EQ(done.status, RunStatus::kSucceeded);
  EXPECT_EQ(done.produced_version, produced);
  EXPECT_EQ(registry_->all_versions().size(), count);
}

TEST_F(OrchestratorTest, TerminalRunsAreStableAndPersisted) {
  const auto base = pretrain();
  auto r = commit("1234", finetune_spec(base));
  const auto a = Json(orch_->get_run("dev", r.run_id)).dump();
  EXPECT_EQ(a, Json(orch_->get_run("dev", r.run_id)).dump());
  EXPECT_EQ(orch_->execute_run(r.run_id).status, RunStatus::kSucceeded);
  EXPECT_EQ(a, Json(orch_->get_run("dev", r.run_id)).dump());
  open();
  EXPECT_EQ(a, Json(orch_->get_run("dev", r.run_id)).dump());
  EXPECT_TRUE(commit("1234", finetune_spec(base)).duplicate);
  EXPECT_TRUE(orch_->list_runs("dev", std::nullopt, RunStatus::kFailed).empty());
  EXPECT_EQ(orch_->list_runs("dev", TriggerKind::kCommit).size(), 2u);
}

TEST_F(OrchestratorTest, DriftEventRetrainsFromTheDeployedVersion) {
  const auto base = pretrain();
  auto r = commit("ab12", finetune_spec(base, "deploy_route = sentiment\n"));
  const auto deployed = orch_->get_run("dev", r.run_id);
  ASSERT_EQ(deployed.status, RunStatus::kSucceeded);
  monitor_->add_sink([&](const monitor::DriftEvent& e, const monitor::DriftReport&) {
    orch_->submit_trigger(kPipelineActor, {TriggerKind::kDrift, "", {{"event_id", e.event_id}}});
  });
  acl_->grant({"pipeline", Role::kReader, Resource::all(governance::ResourceKind::kEndpoint)});

  const auto held = parse_dataset(read_file(dir_ / "heldout.tsv"));
  const auto ep = serving_->get(*deployed.endpoint_id);
  const auto embedder = modelkit::deserialize_embedder(registry_->blobs().get(
      modelkit::deserialize_classifier(registry_->blobs().get(ep.artifact_digest)).parent));
  std::vector<std::vector<double>> rows;
  for (const auto& row : held) rows.push_back(modelkit::embed_document(embedder, *row.tokens));
  std::vector<double> sd(rows[0].size());
  for (std::size_t f = 0; f < sd.size(); ++f) {
    double m = 0, s = 0;
    for (const auto& x : rows) m += x[f];
    m /= rows.size();
    for (const auto& x : rows) s += (x[f] - m) * (x[f] - m);
    sd[f] = std::sqrt(s / rows.size());
  }
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto x = rows[rng() % rows.size()];
    if (i >= 500) {
      for (std::size_t f = 0; f < x.size(); ++f) x[f] += 3 * sd[f];
    }
    clock_->advance(10);
    serving_->infer("sentiment", {std::nullopt, x}, "t-pipe");
  }
  ASSERT_EQ(monitor_->events().size(), 1u);
  const auto drift_runs = orch_->list_runs("dev", TriggerKind::kDrift);
  ASSERT_EQ(drift_runs.size(), 1u);
  const auto& ct = drift_runs[0];
  EXPECT_EQ(ct.trigger.trigger_id, monitor_->events()[0].event_id);
  ASSERT_EQ(ct.status, RunStatus::kSucceeded) << ct.stages[0].message << ct.stages[1].message;
  ASSERT_TRUE(ct.produced_version);
  EXPECT_FALSE(ct.rejected);
  const auto lineage = registry_->lineage(kPipelineActor, *ct.produced_version);
  ASSERT_GE(lineage.size(), 2u);
  EXPECT_EQ(lineage[lineage.size() - 2].version_id, *deployed.produced_version);
  EXPECT_EQ(serving_->get(ep.endpoint_id).bound_version, *ct.produced_version);
}

}  // namespace
}  // namespace saturn::orchestrator
