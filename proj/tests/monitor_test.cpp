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
#include "saturn/monitor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "saturn/error.hpp"
#include "test_util.hpp"

namespace saturn::monitor {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kInternal;
}

// Direct transcription of the smoothed formula.
double psi_oracle(std::vector<double> p, std::vector<double> q) {
  auto smooth = [](std::vector<double>& v) {
    double s = 0;
    for (double& x : v) s += (x = x < 1e-6 ? 1e-6 : x);
    for (double& x : v) x /= s;
  };
  smooth(p);
  smooth(q);
  double out = 0;
  for (std::size_t i = 0; i < p.size(); ++i) out += (p[i] - q[i]) * std::log(p[i] / q[i]);
  return out;
}

// sup |F - G| evaluated at every pooled point by counting.
double ks_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double x : pooled) {
    double fa = 0, fb = 0;
    for (double y : a) fa += y <= x;
    for (double y : b) fb += y <= x;
    d = std::max(d, std::abs(fa / a.size() - fb / b.size()));
  }
  return d;
}

std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0;
  for (auto& x : p) s += (x = std::uniform_real_distribution<double>(0, 1)(rng));
  for (auto& x : p) x /= s;
  return p;
}

TEST(Psi, IdenticalDistributionsGiveZero) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto p = random_distribution(rng, 10);
    EXPECT_NEAR(compute_psi(p, p), 0.0, 1e-12);
  }
  std::vector<double> sparse{1, 0, 0, 0};
  EXPECT_NEAR(compute_psi(sparse, sparse), 0.0, 1e-12);
}

TEST(Psi, HandValue) {
  std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  const double expected = 0.25 * std::log(2.0) - 0.25 * std::log(2.0 / 3.0);
  EXPECT_NEAR(compute_psi(p, q), expected, 1e-12);
  EXPECT_NEAR(compute_psi(p, q), 0.27465, 1e-4);
}

TEST(Psi, MatchesOracleAndIsNonnegative) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    auto p = random_distribution(rng, 1 + rng() % 12);
    auto q = random_distribution(rng, p.size());
    if (i % 5 == 0 && q.size() > 1) q[rng() % q.size()] = 0.0;
    double s = 0;
    for (double x : q) s += x;
    for (double& x : q) x /= s;
    EXPECT_NEAR(compute_psi(p, q), psi_oracle(p, q), 1e-12);
    EXPECT_GE(compute_psi(p, q), 0.0);
  }
}

TEST(Psi, GrowsAsMassConcentrates) {
  std::vector<double> p(10, 0.1);
  double prev = 0.0;
  for (int step = 1; step <= 100; ++step) {
    const double t = step / 100.0;
    std::vector<double> q(10);
    for (int i = 0; i < 10; ++i) q[i] = (1 - t) * 0.1 + (i == 3 ? t : 0.0);
    double psi = compute_psi(p, q);
    EXPECT_NEAR(psi, psi_oracle(p, q), 1e-12);
    EXPECT_GT(psi, prev) << "t=" << t;
    prev = psi;
  }
  EXPECT_GT(prev, 2.0);
}

TEST(Psi, LengthMismatch) {
  std::vector<double> a{0.5, 0.5}, b{1.0};
  EXPECT_EQ(code_of([&] { compute_psi(a, b); }), ErrorCode::kInvalidInput);
}

TEST(Ks, HandCases) {
  std::vector<double> ref, live;
  for (int i = 0; i < 10; ++i) ref.push_back(i);
  for (int i = 5; i < 15; ++i) live.push_back(i);
  EXPECT_EQ(compute_ks(ref, live).stat, 0.5);
  EXPECT_EQ(compute_ks(ref, ref).stat, 0.0);
  EXPECT_DOUBLE_EQ(compute_ks(ref, live).critical, 1.358 * std::sqrt(20.0 / 100.0));
  std::vector<double> empty;
  EXPECT_EQ(code_of([&] { compute_ks(ref, empty); }), ErrorCode::kInvalidInput);
}

TEST(Ks, MatchesOracleWithTiesAndIsTransformInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng() % 40), b(1 + rng() % 40);
    for (auto& x : a) x = static_cast<double>(rng() % 15);
    for (auto& x : b) x = static_cast<double>(rng() % 15) + (trial % 3);
    double d = compute_ks(a, b).stat;
    EXPECT_NEAR(d, ks_oracle(a, b), 1e-15);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    std::vector<double> ta(a), tb(b);
    for (auto& x : ta) x = std::exp(x / 3.0) + x * x * x;
    for (auto& x : tb) x = std::exp(x / 3.0) + x * x * x;
    EXPECT_EQ(compute_ks(ta, tb).stat, d);
  }
}

TEST(Ks, NullHypothesisRejectionRate) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0, 1);
  int rejections = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(200), b(200);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    auto ks = compute_ks(a, b);
    rejections += ks.stat >= ks.critical;
  }
  EXPECT_LE(rejections, 70);
}

TEST(Histogram, EqualFrequencyOnUniformSamples) {
  std::mt19937_64 rng(4);
  std::vector<double> s(100);
  for (auto& x : s) x = std::uniform_real_distribution<double>(0, 1)(rng);
  auto h = equal_frequency_histogram(s, 10);
  ASSERT_EQ(h.edges.size(), 9u);
  ASSERT_EQ(h.counts.size(), 10u);
  for (auto c : h.counts) EXPECT_EQ(c, 10u);
  auto p = bin_distribution(h, s);
  for (double x : p) EXPECT_DOUBLE_EQ(x, 0.1);
}

TEST(Histogram, CountsSumWithTies) {
  std::vector<double> s(137, 1.0);
  for (int i = 0; i < 40; ++i) s[i] = i;
  auto h = equal_frequency_histogram(s, 10);
  std::uint64_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 137u);
}

TEST(Classify, Thresholds) {
  MonitorOptions o;
  EXPECT_EQ(classify(0.05, o), Verdict::kNone);
  EXPECT_EQ(classify(0.1, o), Verdict::kNone);
  EXPECT_EQ(classify(0.15, o), Verdict::kModerate);
  EXPECT_EQ(classify(0.2, o), Verdict::kModerate);
  EXPECT_EQ(classify(0.2000001, o), Verdict::kDrift);
}

class MonitorTest : public ::testing::Test {
 protected:
  MonitorTest() { monitor_ = std::make_unique<Monitor>(nullptr, clock_, std::make_shared<InlineExecutor>()); }

  std::vector<std::vector<double>> normal_rows(std::size_t n, double shift = 0.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> rows(n, std::vector<double>(3));
    for (auto& r : rows)
      for (auto& x : r) x = g(rng_) + shift;
    return rows;
  }

  void log_rows(const std::string& ep, const std::vector<std::vector<double>>& rows) {
    for (const auto& r : rows) {
      clock_->advance(10);
      monitor_->ingest({ep, r, 0.5, 1.0, clock_->now()});
    }
  }

  std::mt19937_64 rng_{99};
  std::shared_ptr<ManualClock> clock_ = std::make_shared<ManualClock>();
  std::unique_ptr<Monitor> monitor_;
};

TEST_F(MonitorTest, UnknownEndpointAndBadLogs) {
  EXPECT_EQ(code_of([&] { monitor_->ingest({"nope", {1.0}, 0, 0, 0}); }), ErrorCode::kNotFound);
  monitor_->register_endpoint("ep");
  log_rows("ep", {{1.0, 2.0, 3.0}});
  EXPECT_EQ(code_of([&] { monitor_->ingest({"ep", {1.0, NAN, 3.0}, 0, 0, clock_->now()}); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { monitor_->ingest({"ep", {1.0, 2.0}, 0, 0, clock_->now()}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { monitor_->ingest({"ep", {1.0, 2.0, 3.0}, 0, -1, clock_->now()}); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(monitor_->buffered("ep"), 1u);
}

TEST_F(MonitorTest, LateLogsWithinToleranceOnly) {
  monitor_->register_endpoint("ep");
  const Timestamp t = clock_->now();
  monitor_->ingest({"ep", {1, 1, 1}, 0, 0, t});
  monitor_->ingest({"ep", {1, 1, 1}, 0, 0, t - 1000});
  EXPECT_EQ(code_of([&] { monitor_->ingest({"ep", {1, 1, 1}, 0, 0, t - 1001}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(monitor_->buffered("ep"), 2u);
}

TEST_F(MonitorTest, FreezeRequiresEnoughSamplesAndForce) {
  monitor_->register_endpoint("ep");
  log_rows("ep", normal_rows(50));
  EXPECT_EQ(code_of([&] { monitor_->freeze_reference("ep"); }), ErrorCode::kNotReady);
  log_rows("ep", normal_rows(50));
  auto ref = monitor_->freeze_reference("ep");
  EXPECT_EQ(ref.sample_count, 100u);
  ASSERT_EQ(ref.features.size(), 3u);
  for (const auto& h : ref.features)
    for (auto c : h.counts) EXPECT_EQ(c, 10u);
  EXPECT_EQ(monitor_->buffered("ep"), 0u);
  log_rows("ep", normal_rows(100));
  EXPECT_EQ(code_of([&] { monitor_->freeze_reference("ep"); }), ErrorCode::kConflict);
  EXPECT_EQ(monitor_->reference("ep")->frozen_at, ref.frozen_at);
  auto replaced = monitor_->freeze_reference("ep", true);
  EXPECT_GT(replaced.frozen_at, ref.frozen_at);
}

TEST_F(MonitorTest, EvaluateNeedsReferenceAndWindow) {
  monitor_->register_endpoint("ep");
  log_rows("ep", normal_rows(120));
  EXPECT_EQ(code_of([&] { monitor_->evaluate_drift("ep"); }), ErrorCode::kNotReady);
  monitor_->freeze_reference("ep");
  log_rows("ep", normal_rows(20));
  EXPECT_EQ(code_of([&] { monitor_->evaluate_drift("ep"); }), ErrorCode::kNotReady);
}

TEST_F(MonitorTest, CadenceProducesOneReportPerHundred) {
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(200));
  log_rows("ep", normal_rows(99));
  EXPECT_EQ(monitor_->reports("ep").size(), 0u);
  log_rows("ep", normal_rows(1));
  EXPECT_EQ(monitor_->reports("ep").size(), 1u);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const std::string ep = "e" + std::to_string(trial);
    monitor_->register_endpoint(ep);
    monitor_->freeze_reference_from(ep, normal_rows(100));
    const std::size_t n = rng() % 1200;
    log_rows(ep, normal_rows(n));
    EXPECT_EQ(monitor_->reports(ep).size(), n / 100);
    EXPECT_EQ(monitor_->buffered(ep), std::min<std::size_t>(n, 500));
  }
}

TEST_F(MonitorTest, SameDistributionIsNotDrift) {
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(500));
  log_rows("ep", normal_rows(500));
  auto reports = monitor_->reports("ep");
  ASSERT_EQ(reports.size(), 5u);
  // Small windows carry a sampling floor of about 9(1/n + 1/m) PSI, so only
  // the full window is held to "none".
  for (const auto& r : reports) EXPECT_NE(r.verdict, Verdict::kDrift) << r.max_psi;
  EXPECT_EQ(reports.back().verdict, Verdict::kNone);
  EXPECT_LT(reports.back().max_psi, 0.1);
  for (const auto& f : reports.back().per_feature) EXPECT_LT(f.ks_stat, f.ks_critical);
  EXPECT_TRUE(monitor_->events().empty());
}

TEST_F(MonitorTest, ShiftedDistributionRaisesOneEvent) {
  monitor_->register_endpoint("ep");
  std::vector<std::pair<DriftEvent, DriftReport>> seen;
  monitor_->add_sink([&](const DriftEvent& e, const DriftReport& r) { seen.emplace_back(e, r); });
  monitor_->freeze_reference_from("ep", normal_rows(500));
  log_rows("ep", normal_rows(100, 3.0));
  ASSERT_EQ(seen.size(), 1u);
  const auto& [event, report] = seen[0];
  EXPECT_EQ(report.verdict, Verdict::kDrift);
  EXPECT_GT(report.max_psi, 0.2);
  EXPECT_EQ(event.event_id, drift_event_id("ep", report.window));
  EXPECT_EQ(report.event_id, event.event_id);
  for (const auto& f : report.per_feature) EXPECT_GT(f.ks_stat, f.ks_critical);

  // Same window again: deduplicated.
  auto again = monitor_->evaluate_drift("ep");
  EXPECT_EQ(again.verdict, Verdict::kDrift);
  EXPECT_FALSE(again.event_id.has_value());
  EXPECT_EQ(monitor_->events().size(), 1u);
}

TEST_F(MonitorTest, CooldownSkipsTheNextWindow) {
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(500));
  log_rows("ep", normal_rows(100, 3.0));  // evaluation 1: event
  log_rows("ep", normal_rows(100, 3.0));  // evaluation 2: cooldown
  log_rows("ep", normal_rows(100, 3.0));  // evaluation 3: new event
  auto reports = monitor_->reports("ep");
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_TRUE(reports[0].event_id.has_value());
  EXPECT_EQ(reports[1].verdict, Verdict::kDrift);
  EXPECT_FALSE(reports[1].event_id.has_value());
  EXPECT_TRUE(reports[2].event_id.has_value());
}

TEST_F(MonitorTest, EventsPerWindowAtMostOne) {
  std::mt19937_64 rng(6);
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(300));
  for (int step = 0; step < 60; ++step) {
    log_rows("ep", normal_rows(rng() % 150, (rng() % 2) * 3.0));
    if (rng() % 3 == 0) {
      try {
        monitor_->evaluate_drift("ep");
      } catch (const Error&) {
      }
    }
  }
  std::map<std::string, int> per_window;
  for (const auto& e : monitor_->events()) ++per_window[e.event_id];
  EXPECT_FALSE(per_window.empty());
  for (const auto& [id, n] : per_window) EXPECT_EQ(n, 1);
}

TEST_F(MonitorTest, OutOfOrderLogsAreSortedOnEvaluation) {
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(100));
  const Timestamp t0 = clock_->now();
  auto rows = normal_rows(100);
  for (int i = 0; i < 100; ++i) monitor_->ingest({"ep", rows[i], 0, 0, t0 + 10 * i - (i % 2 ? 500 : 0)});
  auto r = monitor_->reports("ep").at(0);
  EXPECT_EQ(r.window.first, t0 - 490);
  EXPECT_EQ(r.window.last, t0 + 980);
  EXPECT_EQ(r.window.count, 100u);
}

TEST_F(MonitorTest, RefreezeUsesTheNextLogs) {
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(500));
  log_rows("ep", normal_rows(150));
  ASSERT_EQ(monitor_->reports("ep").size(), 1u);
  EXPECT_NE(monitor_->reports("ep")[0].verdict, Verdict::kDrift);
  monitor_->refreeze_on_next("ep");
  EXPECT_FALSE(monitor_->reference("ep").has_value());
  EXPECT_EQ(monitor_->buffered("ep"), 0u);
  log_rows("ep", normal_rows(499, 3.0));
  EXPECT_FALSE(monitor_->reference("ep").has_value());
  log_rows("ep", normal_rows(1, 3.0));
  ASSERT_TRUE(monitor_->reference("ep").has_value());
  EXPECT_EQ(monitor_->reference("ep")->sample_count, 500u);
  EXPECT_EQ(monitor_->buffered("ep"), 0u);
  log_rows("ep", normal_rows(500, 3.0));
  auto reports = monitor_->reports("ep");
  ASSERT_EQ(reports.size(), 6u);  // 1 before, 5 after
  EXPECT_NE(reports[1].verdict, Verdict::kDrift);
  EXPECT_EQ(reports[5].verdict, Verdict::kNone);
  EXPECT_TRUE(monitor_->events().empty());
}

TEST_F(MonitorTest, ConcurrentProducers) {
  auto exec = std::make_shared<ThreadExecutor>(2);
  monitor_ = std::make_unique<Monitor>(nullptr, clock_, exec);
  monitor_->register_endpoint("ep");
  monitor_->freeze_reference_from("ep", normal_rows(100));
  const Timestamp t = clock_->now();
  std::vector<std::thread> producers;
  for (int p = 0; p < 4; ++p) {
    producers.emplace_back([&, p] {
      for (int i = 0; i < 250; ++i) monitor_->ingest({"ep", {double(i), double(p), 1.0}, 0, 0, t});
    });
  }
  for (auto& th : producers) th.join();
  exec->drain();
  EXPECT_EQ(monitor_->reports("ep").size(), 10u);
  EXPECT_EQ(monitor_->buffered("ep"), 500u);
}

TEST_F(MonitorTest, StateSurvivesReopen) {
  testing::TempDir dir;
  auto db = store::Database::open((dir / "m.db").string());
  monitor_ = std::make_unique<Monitor>(db, clock_, std::make_shared<InlineExecutor>());
  monitor_->register_endpoint("ep");
  auto ref = monitor_->freeze_reference_from("ep", normal_rows(300));
  log_rows("ep", normal_rows(100, 3.0));
  ASSERT_EQ(monitor_->events().size(), 1u);
  monitor_ = std::make_unique<Monitor>(db, clock_, std::make_shared<InlineExecutor>());
  EXPECT_TRUE(monitor_->has_endpoint("ep"));
  EXPECT_EQ(monitor_->reference("ep")->features[0].edges, ref.features[0].edges);
  EXPECT_EQ(monitor_->reports("ep").size(), 1u);
  EXPECT_EQ(monitor_->events().size(), 1u);
  // Cooldown carries over: the next window is quiet.
  log_rows("ep", normal_rows(100, 3.0));
  EXPECT_EQ(monitor_->events().size(), 1u);
  EXPECT_EQ(monitor_->reports("ep").back().evaluation, 2u);
}

}  // namespace
}  // namespace saturn::monitor
