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


// Acceptance suite: one PASS/FAIL line per criterion, each timed against
// its budget. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fairness_oracle.hpp"
#include "knn_oracle.hpp"
#include "saturn/bytes.hpp"
#include "saturn/config.hpp"
#include "saturn/digest.hpp"
#include "saturn/embedfarm.hpp"
#include "saturn/error.hpp"
#include "saturn/executor.hpp"
#include "saturn/feedback.hpp"
#include "saturn/governance.hpp"
#include "saturn/modelkit.hpp"
#include "saturn/monitor.hpp"
#include "saturn/orchestrator.hpp"
#include "saturn/platform.hpp"
#include "saturn/registry.hpp"
#include "saturn/serving.hpp"
#include "saturn/store.hpp"
#include "scenario_fixtures.hpp"
#include "test_util.hpp"

namespace saturn {
namespace {

using governance::AccessControl;
using governance::Resource;
using governance::ResourceKind;
using governance::Role;

// Collects failure notes; a criterion passes when none were recorded.
struct Check {
  std::vector<std::string> failures;
  std::map<std::string, std::string> measured;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
  void note(const std::string& k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    measured[k] = buf;
  }
};

std::vector<float> gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g;
  std::vector<float> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

std::string key_of(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "k%05d", i);
  return buf;
}

// 1 ------------------------------------------------------------------------

void lifecycle(Check& c) {
  testing::TempDir dir;
  auto clock = std::make_shared<ManualClock>();
  auto db = store::Database::open((dir / "saturn.db").string());
  auto acl = std::make_shared<AccessControl>(db, clock);
  acl->grant({"alice", Role::kWriter, Resource::all(ResourceKind::kModel)});
  registry::Registry reg(db, dir / "blobs", acl, clock);

  std::mt19937_64 rng(1);
  auto m = reg.register_model("alice", "m", registry::Modality::kText, "alice");
  std::vector<std::string> ids;
  auto add_version = [&] {
    auto d = reg.put_blob("alice", as_bytes("artifact-" + std::to_string(ids.size()))).digest;
    std::optional<std::string> parent;
    auto s = registry::Stage::kPretraining;
    if (!ids.empty() && rng() % 2) {
      parent = ids[rng() % ids.size()];
      s = registry::Stage::kFineTuning;
    }
    ids.push_back(reg.create_version("alice", m.model_id, d, parent, s).version_id);
  };
  for (int i = 0; i < 20; ++i) add_version();
  int accepted = 0, illegal = 0;
  for (int i = 0; i < 10'000; ++i) {
    if (i % 20 == 0) add_version();  // keep live versions in the pool
    const auto& id = ids[rng() % ids.size()];
    auto to = static_cast<registry::Stage>(rng() % 7);
    std::optional<registry::ValidationReport> r;
    if (rng() % 2 == 0) {
      r.emplace();
      r->metrics = {0.9, 0.9, 100};
      r->passed = rng() % 3 != 0;
      r->gate_config_digest = sha256_hex(std::string_view("gate"));
      r->evaluated_at = clock->now();
    }
    const auto before = reg.get_version("alice", id).stage;
    try {
      reg.transition_stage("alice", id, to, r);
      ++accepted;
      illegal += !registry::is_legal_transition(before, to);
    } catch (const Error&) {
      c.expect(reg.get_version("alice", id).stage == before, "rejected transition changed state");
    }
  }
  c.expect(illegal == 0, "accepted an illegal transition");

  // Replay the persisted audit log.
  std::map<std::string, registry::Stage> stage;
  for (const auto& a : reg.audit_log()) {
    if (a.from) {
      c.expect(stage.count(a.version_id) && stage[a.version_id] == *a.from, "audit chain broken");
      c.expect(registry::is_legal_transition(*a.from, a.to), "illegal transition persisted");
    }
    stage[a.version_id] = a.to;
  }
  std::size_t released = 0;
  for (const auto& v : reg.all_versions()) {
    c.expect(stage[v.version_id] == v.stage, "audit log disagrees with stored stage");
    if (registry::is_released(v.stage)) {
      ++released;
      c.expect(v.validation && v.validation->passed, v.version_id + " released without a passing report");
    }
  }
  c.note("accepted", accepted);
  c.note("released", static_cast<double>(released));
  c.expect(accepted > 100 && released > 0, "too few accepted transitions to be meaningful");
}

// 2 ------------------------------------------------------------------------

void content_addressing(Check& c) {
  testing::TempDir dir;
  registry::BlobStore store(dir / "blobs");
  std::mt19937_64 rng(2);
  std::size_t dups = 0;
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::uint8_t> bytes(rng() % 4096);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() % (i % 7 == 0 ? 2 : 256));
    const auto want = sha256_hex(std::span<const std::uint8_t>(bytes));
    const auto got = store.put(bytes);
    dups += !seen.insert(want).second;
    c.expect(got == want, "digest mismatch on blob " + std::to_string(i));
    c.expect(store.get(want) == bytes, "round trip mismatch on blob " + std::to_string(i));
  }
  c.note("duplicates", static_cast<double>(dups));
  c.expect(sha256_hex(std::span<const std::uint8_t>()) ==
               "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
           "empty digest");
}

// 3, 4, 5 ------------------------------------------------------------------

struct Farm {
  testing::TempDir dir;
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  std::shared_ptr<store::Database> db = store::Database::open((dir / "saturn.db").string());
  std::shared_ptr<AccessControl> acl = [&] {
    auto a = std::make_shared<AccessControl>(db, clock);
    a->grant({"ds", Role::kAdmin, Resource::any()});
    return a;
  }();
  embedfarm::EmbeddingFarm farm{nullptr, acl, clock, std::make_shared<InlineExecutor>()};

  std::vector<testing::OracleEntry> fill(const std::string& name, embedfarm::Metric metric, int n, std::size_t dim,
                                         std::uint64_t seed) {
    farm.create_collection("ds", name, static_cast<std::uint32_t>(dim), metric);
    std::mt19937_64 rng(seed);
    std::vector<testing::OracleEntry> out;
    for (int i = 0; i < n; ++i) {
      testing::OracleEntry e{key_of(i), gaussian(rng, dim), {}};
      farm.upsert("ds", name, e.key, e.vector);
      out.push_back(std::move(e));
    }
    return out;
  }
};

void exact_knn(Check& c) {
  Farm f;
  for (int m = 0; m < 3; ++m) {
    const auto metric = static_cast<embedfarm::Metric>(m);
    const std::string name = "c" + std::to_string(m);
    auto entries = f.fill(name, metric, 1000, 32, 30 + m);
    std::mt19937_64 rng(300 + m);
    for (int q = 0; q < 50; ++q) {
      auto query = q % 10 == 0 ? entries[q].vector : gaussian(rng, 32);
      const std::size_t k = q % 5 == 0 ? 1000 : 10;
      auto got = f.farm.search_exact("ds", name, query, k);
      auto want = testing::oracle_knn(m, entries, query, k);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].key == want[i].first;
      c.expect(same, std::string(embedfarm::to_string(metric)) + " query " + std::to_string(q) + " differs");
    }
  }
}

void ann_recall(Check& c) {
  Farm f;
  for (int m = 0; m < 3; ++m) {
    const auto metric = static_cast<embedfarm::Metric>(m);
    const std::string name = "c" + std::to_string(m);
    f.fill(name, metric, 10'000, 32, 40 + m);
    f.farm.build_index("ds", name);
    std::mt19937_64 rng(400 + m);
    double recall = 0;
    for (int q = 0; q < 100; ++q) {
      auto query = gaussian(rng, 32);
      std::set<std::string> truth;
      for (const auto& r : f.farm.search_exact("ds", name, query, 10)) truth.insert(r.key);
      int hit = 0;
      for (const auto& r : f.farm.search_ann("ds", name, query, 10)) hit += static_cast<int>(truth.count(r.key));
      recall += hit / 10.0;
    }
    recall /= 100;
    c.note(std::string("recall_") + std::string(embedfarm::to_string(metric)), recall);
    c.expect(recall >= 0.9, std::string(embedfarm::to_string(metric)) + " recall below 0.9");
  }
}

void persistence(Check& c) {
  Farm f;
  std::mt19937_64 rng(5);
  std::size_t corruptions = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const std::string name = "r" + std::to_string(trial);
    const auto metric = static_cast<embedfarm::Metric>(trial % 3);
    const std::size_t dim = 1 + rng() % 24;
    f.farm.create_collection("ds", name, static_cast<std::uint32_t>(dim), metric);
    const int n = static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> tags;
      for (auto t = rng() % 3; t > 0; --t) tags.push_back("t" + std::to_string(rng() % 5));
      auto v = gaussian(rng, dim);
      if (i % 9 == 0) v[0] = -0.0f;
      f.farm.upsert("ds", name, "key-" + std::to_string(rng() % 500), v, tags);
    }
    const auto bytes = f.farm.export_bytes("ds", name);
    f.farm.import_bytes("ds", bytes, name + "-copy");
    c.expect(f.farm.export_bytes("ds", name + "-copy") == bytes, name + " re-export differs");
    for (const auto& e : embedfarm::decode_collection(bytes).entries) {
      auto a = f.farm.get("ds", name, e.key);
      auto b = f.farm.get("ds", name + "-copy", e.key);
      bool bits = a.vector.size() == b.vector.size() &&
                  std::memcmp(a.vector.data(), b.vector.data(), a.vector.size() * sizeof(float)) == 0;
      c.expect(bits && a.tags == b.tags, name + "/" + e.key + " not bit-exact");
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      auto bad = bytes;
      bad[i] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      ++corruptions;
      bool detected = false;
      try {
        embedfarm::decode_collection(bad);
      } catch (const Error& e) {
        detected = e.code() == ErrorCode::kIntegrityError;
      }
      c.expect(detected, name + " corruption at byte " + std::to_string(i) + " undetected");
    }
  }
  c.note("corruptions", static_cast<double>(corruptions));
}

// 6 ------------------------------------------------------------------------

void drift_statistics(Check& c) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p(1 + rng() % 12);
    double s = 0;
    for (auto& x : p) s += (x = u(rng));
    for (auto& x : p) x /= s;
    worst = std::max(worst, std::abs(monitor::compute_psi(p, p)));
  }
  c.expect(worst <= 1e-12, "PSI(p,p) not zero");
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  const double psi = monitor::compute_psi(p, q);
  c.note("psi_hand", psi);
  c.expect(std::abs(psi - 0.27465) <= 1e-4, "PSI hand value");

  std::vector<double> ref, live;
  for (int i = 0; i < 10; ++i) ref.push_back(i);
  for (int i = 5; i < 15; ++i) live.push_back(i);
  c.expect(monitor::compute_ks(ref, live).stat == 0.5, "KS disjoint shift is not 0.5");

  std::mt19937_64 mc(2024);
  std::normal_distribution<double> n;
  int rejections = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(200), b(200);
    for (auto& x : a) x = n(mc);
    for (auto& x : b) x = n(mc);
    auto ks = monitor::compute_ks(a, b);
    rejections += ks.stat >= ks.critical;
  }
  c.note("null_reject_rate", rejections / 1000.0);
  c.expect(rejections <= 70, "null rejection rate above 7%");
}

// 7 ------------------------------------------------------------------------

struct LoopOutcome {
  bool ok = false;
  std::string fingerprint;
};

LoopOutcome closed_loop_once(Check& c) {
  testing::TempDir dir;
  testing::write_scenario_data(dir.path(), 11);
  testing::write_text(dir / "tokens", "client=t-client\n");
  auto clock = std::make_shared<ManualClock>();
  PlatformOverrides ov;
  ov.clock = clock;
  ov.monitor_executor = std::make_shared<InlineExecutor>();
  ov.pipeline_executor = std::make_shared<InlineExecutor>();
  ov.index_executor = std::make_shared<InlineExecutor>();
  ov.webhook_executor = std::make_shared<InlineExecutor>();
  auto config = Config::parse("data.dir = " + (dir / "data").string() + "\nserve.tokens = " + (dir / "tokens").string() +
                              "\n");
  auto p = Platform::open(config, ov);
  p->acl()->grant({"dev", Role::kWriter, Resource::pipeline()});
  p->acl()->grant({"client", Role::kReader, Resource::all(ResourceKind::kEndpoint)});
  auto& orch = *p->orchestrator();
  const auto actor = std::string(orchestrator::kPipelineActor);

  auto commit = [&](const std::string& ref, const std::string& file, const std::string& body) {
    testing::write_text(dir / file, body);
    auto r = orch.submit_trigger(
        "dev", {orchestrator::TriggerKind::kCommit, "", {{"ref", ref}, {"spec", (dir / file).string()}}});
    return orch.get_run("dev", r.run_id);
  };
  const auto d = dir.path().string() + "/";
  auto base = commit("c0ffee0", "pretrain.spec",
                     "task = pretrain\nmodel_name = sentiment-base\ndataset = " + d + "corpus.txt\nheldout = " + d +
                         "heldout.tsv\ndim = 4\nwindow = 2\nseed = 7\n");
  c.expect(base.status == orchestrator::RunStatus::kSucceeded && base.produced_version, "pretrain run failed");
  if (!base.produced_version) return {};
  auto run = commit("deadbeef", "finetune.spec",
                    "task = finetune\nmodel_name = sentiment\nparent_version = " + *base.produced_version +
                        "\ndataset = " + d + "train.tsv\nheldout = " + d + "heldout.tsv\ndeploy_route = sentiment\n");
  c.expect(run.status == orchestrator::RunStatus::kSucceeded && run.endpoint_id && run.validation,
           "commit run did not deploy");
  if (!run.endpoint_id || !run.validation) return {};
  c.note("accuracy", run.validation->metrics.accuracy);
  c.expect(run.validation->metrics.accuracy >= 0.95, "accuracy below 0.95");
  c.expect(run.validation->passed, "default gate not passed");

  // Requests built from held-out documents, embedded like the endpoint does.
  const auto ep = p->serving()->get(*run.endpoint_id);
  const auto& blobs = p->registry()->blobs();
  const auto embedder = modelkit::deserialize_embedder(
      blobs.get(modelkit::deserialize_classifier(blobs.get(ep.artifact_digest)).parent));
  std::vector<std::vector<double>> rows;
  for (const auto& row : orchestrator::parse_dataset(read_file(dir / "heldout.tsv")))
    rows.push_back(modelkit::embed_document(embedder, *row.tokens));
  std::vector<double> sd(rows[0].size());
  for (std::size_t f = 0; f < sd.size(); ++f) {
    double m = 0, s = 0;
    for (const auto& x : rows) m += x[f];
    m /= static_cast<double>(rows.size());
    for (const auto& x : rows) s += (x[f] - m) * (x[f] - m);
    sd[f] = std::sqrt(s / static_cast<double>(rows.size()));
  }
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    auto x = rows[rng() % rows.size()];
    if (i >= 500)
      for (std::size_t f = 0; f < x.size(); ++f) x[f] += 3 * sd[f];
    clock->advance(10);
    p->serving()->infer("sentiment", {std::nullopt, x}, "t-client");
  }
  p->drain();

  const auto events = p->monitor()->events();
  c.note("drift_events", static_cast<double>(events.size()));
  c.expect(events.size() == 1, "expected exactly one drift event");
  const auto ct = orch.list_runs("dev", orchestrator::TriggerKind::kDrift);
  c.expect(ct.size() == 1, "expected exactly one CT run");
  if (events.size() != 1 || ct.size() != 1) return {};
  c.expect(ct[0].trigger.trigger_id == events[0].event_id, "CT run not keyed by the drift event");
  c.expect(ct[0].status == orchestrator::RunStatus::kSucceeded && ct[0].produced_version, "CT run failed");
  if (!ct[0].produced_version) return {};
  const auto v = p->registry()->get_version(actor, *ct[0].produced_version);
  c.expect(v.parent_version == run.produced_version, "CT lineage parent is not the deployed version");
  const auto after = p->serving()->get(ep.endpoint_id);
  c.expect(after.bound_version == *ct[0].produced_version, "endpoint not rebound to the CT version");

  std::ostringstream fp;
  fp << run.produced_version.value_or("") << '|' << ep.artifact_digest << '|' << events[0].event_id << '|'
     << events[0].report_seq << '|' << events[0].max_psi << '|' << v.artifact_digest << '|' << after.artifact_digest;
  return {true, fp.str()};
}

void closed_loop(Check& c) {
  auto a = closed_loop_once(c);
  auto b = closed_loop_once(c);
  c.expect(a.ok && b.ok && a.fingerprint == b.fingerprint, "scenario not deterministic across runs");
}

// 8 ------------------------------------------------------------------------

std::vector<feedback::PairwiseComparison> planted(const std::vector<double>& w, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<feedback::PairwiseComparison> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> a(w.size()), b(w.size());
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    double m = 0;
    for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * (a[i] - b[i]);
    if (u(rng) < 1.0 / (1.0 + std::exp(-m)))
      out.push_back({a, b, ""});
    else
      out.push_back({b, a, ""});
  }
  return out;
}

void reward_fitting(Check& c) {
  auto pairs = planted({1.0, -2.0, 0.5, 0.0}, 60, 1);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  double worst = 0;
  for (int point = 0; point < 20; ++point) {
    std::vector<double> w(4);
    for (auto& x : w) x = g(rng);
    auto analytic = feedback::reward_gradient(w, pairs, 1e-3);
    double num2 = 0, diff2 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto up = w, down = w;
      up[i] += 1e-5;
      down[i] -= 1e-5;
      double fd = (feedback::reward_loss(up, pairs, 1e-3) - feedback::reward_loss(down, pairs, 1e-3)) / 2e-5;
      num2 += fd * fd;
      diff2 += (fd - analytic[i]) * (fd - analytic[i]);
    }
    worst = std::max(worst, std::sqrt(diff2 / num2));
  }
  c.note("grad_rel_err", worst);
  c.expect(worst < 1e-4, "gradient disagrees with finite differences");

  const std::vector<double> truth{1.5, -1.0, 0.8, 0.0, -2.0};
  auto m = feedback::fit_reward(planted(truth, 500, 7));
  auto test = planted(truth, 500, 9);
  std::size_t agree = 0;
  for (const auto& p : test) {
    double mt = 0, mf = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      mt += truth[i] * (p.winner[i] - p.loser[i]);
      mf += m.weights[i] * (p.winner[i] - p.loser[i]);
    }
    agree += (mt > 0) == (mf > 0);
  }
  c.note("heldout_acc", agree / 500.0);
  c.expect(agree >= 450, "held-out pairwise accuracy below 0.9");

  std::vector<double> a{0.3, -1.0, 2.0}, b{1.0, 0.5, -0.5};
  auto z = feedback::fit_reward({{a, b, ""}, {b, a, ""}});
  double wmax = 0;
  for (double w : z.weights) wmax = std::max(wmax, std::abs(w));
  c.note("contradictory_max_w", wmax);
  c.expect(wmax < 1e-6, "contradictory pair produced nonzero weights");
}

// 9 ------------------------------------------------------------------------

void fairness(Check& c) {
  std::vector<int> pred{1, 1, 1, 0, 0, 1, 0, 0, 0, 0};
  std::vector<int> label{1, 1, 0, 0, 1, 1, 1, 0, 0, 0};
  std::vector<std::string> group{"A", "A", "A", "A", "A", "B", "B", "B", "B", "B"};
  auto r = governance::compute_fairness(pred, label, group);
  c.expect(r.dpd == 0.4, "dpd != 0.4");
  c.expect(r.dir == 1.0 / 3.0, "dir != 1/3");

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int feasible = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 10 + rng() % 21;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    std::vector<std::string> groups(n);
    for (std::size_t i = 0; i < n; ++i) {
      groups[i] = i % 2 == 0 ? "g0" : "g1";
      const double bias = groups[i] == "g0" ? 0.15 : -0.15;
      labels[i] = uni(rng) < 0.5 ? 1 : 0;
      scores[i] = std::clamp(0.5 + (labels[i] ? 0.2 : -0.2) + bias + (uni(rng) - 0.5) * 0.6, 0.0, 1.0);
    }
    const double budget = 0.02 * static_cast<double>(trial % 5);
    auto m = governance::mitigate_by_threshold(scores, labels, groups, budget);
    auto o = testing::mitigation_oracle(scores, labels, groups, budget);
    c.expect(m.thresholds == o.thresholds && m.infeasible == o.infeasible,
             "trial " + std::to_string(trial) + " differs from the grid oracle");
    if (!m.infeasible) {
      ++feasible;
      c.expect(m.accuracy >= m.baseline_accuracy - budget - 1e-12,
               "trial " + std::to_string(trial) + " violates the accuracy budget");
    }
  }
  c.note("feasible", feasible);
}

// 10 -----------------------------------------------------------------------

class DroppingExecutor final : public Executor {
 public:
  void post(Task) override { ++posted; }
  void drain() override {}
  std::size_t posted = 0;
};

void trigger_idempotence(Check& c) {
  testing::TempDir dir;
  testing::write_scenario_data(dir.path(), 11);
  const auto spec = (dir / "p.spec").string();
  testing::write_text(spec, "task = pretrain\nmodel_name = m\ndataset = " + (dir / "corpus.txt").string() +
                                "\nheldout = " + (dir / "heldout.tsv").string() + "\n");
  std::mt19937_64 rng(10);
  std::size_t total = 0;
  for (int k = 0; k < 200; ++k) {
    const auto data = dir / ("case" + std::to_string(k));
    auto exec = std::make_shared<DroppingExecutor>();
    PlatformOverrides ov;
    ov.clock = std::make_shared<ManualClock>();
    ov.pipeline_executor = exec;
    ov.monitor_executor = std::make_shared<InlineExecutor>();
    ov.index_executor = std::make_shared<InlineExecutor>();
    ov.webhook_executor = std::make_shared<InlineExecutor>();
    auto p = Platform::open(Config::parse("data.dir = " + data.string() + "\n"), ov);
    p->acl()->grant({"dev", Role::kWriter, Resource::pipeline()});
    std::set<std::string> distinct;
    std::map<std::string, std::string> first;
    const int n = 1 + static_cast<int>(rng() % 30);
    const int pool = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      const bool is_commit = rng() % 2;
      const std::string id = (is_commit ? "c" : "m") + std::to_string(rng() % pool);
      auto r = is_commit ? p->orchestrator()->submit_trigger(
                               "dev", {orchestrator::TriggerKind::kCommit, "", {{"ref", id}, {"spec", spec}}})
                         : p->orchestrator()->submit_trigger(
                               "dev", {orchestrator::TriggerKind::kManual, id, {{"spec", spec}}});
      c.expect(r.duplicate == (distinct.count(id) == 1), "duplicate flag wrong in case " + std::to_string(k));
      if (auto it = first.find(id); it != first.end())
        c.expect(r.run_id == it->second, "duplicate got a new run in case " + std::to_string(k));
      first.emplace(id, r.run_id);
      distinct.insert(id);
      ++total;
    }
    c.expect(p->orchestrator()->run_count() == distinct.size(), "runs != distinct ids in case " + std::to_string(k));
    c.expect(exec->posted == distinct.size(), "jobs != distinct ids in case " + std::to_string(k));
  }
  c.note("triggers", static_cast<double>(total));
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Check&)> run;
};

}  // namespace
}  // namespace saturn

int main() {
  using namespace saturn;
  const std::vector<Criterion> criteria{
      {1, "lifecycle soundness", 10, lifecycle},
      {2, "content addressing", 5, content_addressing},
      {3, "exact k-NN oracle equivalence", 5, exact_knn},
      {4, "ANN recall@10", 60, ann_recall},
      {5, "export/import persistence", 5, persistence},
      {6, "drift statistics", 30, drift_statistics},
      {7, "closed loop end to end", 120, closed_loop},
      {8, "reward fitting", 10, reward_fitting},
      {9, "fairness", 20, fairness},
      {10, "trigger idempotence", 10, trigger_idempotence},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= cr.limit_s) c.failures.push_back("over time budget");
    const bool ok = c.failures.empty();
    failed += !ok;
    std::string extra;
    for (const auto& [k, v] : c.measured) extra += " " + k + "=" + v;
    std::printf("%s [%d] %s (%.2fs < %.0fs)%s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs, cr.limit_s,
                extra.c_str());
    for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
