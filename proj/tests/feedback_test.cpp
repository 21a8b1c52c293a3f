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
#include "saturn/feedback.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "saturn/bytes.hpp"
#include "saturn/error.hpp"
#include "test_util.hpp"

namespace saturn::feedback {
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

FeedbackRecord ranking_of(std::vector<std::vector<double>> features, std::vector<std::size_t> order,
                          std::string prompt = "p1") {
  FeedbackRecord r;
  r.prompt_id = std::move(prompt);
  for (std::size_t i = 0; i < features.size(); ++i) r.candidates.push_back({"c" + std::to_string(i), features[i]});
  r.ranking = std::move(order);
  return r;
}

// Pairs drawn from a Bradley-Terry model with planted weights.
std::vector<PairwiseComparison> planted(const std::vector<double>& w, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PairwiseComparison> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> a(w.size()), b(w.size());
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    double m = 0;
    for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * (a[i] - b[i]);
    if (u(rng) < 1.0 / (1.0 + std::exp(-m))) {
      out.push_back({a, b, ""});
    } else {
      out.push_back({b, a, ""});
    }
  }
  return out;
}

TEST(Expand, CountsAndOrder) {
  auto three = expand(ranking_of({{1}, {2}, {3}}, {2, 0, 1}));
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].winner, std::vector<double>{3});
  EXPECT_EQ(three[0].loser, std::vector<double>{1});
  EXPECT_EQ(three[1].winner, std::vector<double>{3});
  EXPECT_EQ(three[1].loser, std::vector<double>{2});
  EXPECT_EQ(three[2].winner, std::vector<double>{1});
  EXPECT_EQ(three[2].loser, std::vector<double>{2});
  EXPECT_EQ(expand(ranking_of({{1}, {2}}, {1, 0})).size(), 1u);
  for (std::size_t n = 2; n < 12; ++n) {
    std::vector<std::vector<double>> f(n, {0.0});
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = n - 1 - i;
    EXPECT_EQ(expand(ranking_of(f, order)).size(), n * (n - 1) / 2);
  }
}

TEST(Expand, RejectsBadRankings) {
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}, {2}, {3}}, {0, 0, 1})); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}, {2}, {3}}, {0, 1, 3})); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}, {2}, {3}}, {0, 1})); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}}, {0})); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}, {2, 3}}, {0, 1})); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { expand(ranking_of({{1}, {NAN}}, {0, 1})); }), ErrorCode::kInvalidInput);
}

TEST(Reward, GradientMatchesFiniteDifferences) {
  auto pairs = planted({1.0, -2.0, 0.5, 0.0}, 60, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  const double h = 1e-5;
  for (int point = 0; point < 10; ++point) {
    std::vector<double> w(4);
    for (auto& x : w) x = g(rng);
    auto analytic = reward_gradient(w, pairs, 1e-3);
    double num2 = 0, diff2 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto up = w, down = w;
      up[i] += h;
      down[i] -= h;
      double fd = (reward_loss(up, pairs, 1e-3) - reward_loss(down, pairs, 1e-3)) / (2 * h);
      num2 += fd * fd;
      diff2 += (fd - analytic[i]) * (fd - analytic[i]);
    }
    EXPECT_LT(std::sqrt(diff2) / std::sqrt(num2), 1e-4) << "point " << point;
  }
}

TEST(Reward, SingleComparisonForcesSign) {
  std::vector<PairwiseComparison> one{{{1, 0, 0}, {0, 0, 0}, ""}};
  auto m = fit_reward(one);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_EQ(m.weights[1], 0.0);
  EXPECT_EQ(m.weights[2], 0.0);
  EXPECT_EQ(pairwise_accuracy(m, one), 1.0);
  EXPECT_GE(m.fit_loss, 0.0);
  EXPECT_EQ(m.comparisons_count, 1u);
}

TEST(Reward, ContradictoryPairGivesZeroWeights) {
  std::vector<double> a{0.3, -1.0, 2.0}, b{1.0, 0.5, -0.5};
  auto m = fit_reward({{a, b, ""}, {b, a, ""}});
  for (double w : m.weights) EXPECT_LT(std::abs(w), 1e-6);
}

TEST(Reward, RecoversPlantedWeights) {
  const std::vector<double> truth{1.5, -1.0, 0.8, 0.0, -2.0};
  auto train = planted(truth, 500, 7);
  auto m = fit_reward(train);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i]) > 0.5) EXPECT_EQ(m.weights[i] > 0, truth[i] > 0) << i;
  }
  // Held-out agreement with the planted preference direction.
  auto test = planted(truth, 500, 8);
  std::size_t agree = 0;
  for (const auto& c : test) {
    double mt = 0, mf = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      mt += truth[i] * (c.winner[i] - c.loser[i]);
      mf += m.weights[i] * (c.winner[i] - c.loser[i]);
    }
    agree += (mt > 0) == (mf > 0);
  }
  EXPECT_GE(agree / 500.0, 0.9);
}

TEST(Reward, DependsOnlyOnDifferences) {
  // Dyadic values keep (a + c) - (b + c) == a - b exact.
  std::mt19937_64 rng(3);
  std::vector<PairwiseComparison> base, shifted;
  const std::vector<double> c{4.0, -8.0, 0.5};
  for (int k = 0; k < 40; ++k) {
    std::vector<double> a(3), b(3);
    for (auto& x : a) x = static_cast<double>(static_cast<int>(rng() % 64) - 32) / 8.0;
    for (auto& x : b) x = static_cast<double>(static_cast<int>(rng() % 64) - 32) / 8.0;
    base.push_back({a, b, ""});
    for (int i = 0; i < 3; ++i) {
      a[i] += c[i];
      b[i] += c[i];
    }
    shifted.push_back({a, b, ""});
  }
  EXPECT_EQ(fit_reward(base).weights, fit_reward(shifted).weights);
}

TEST(Reward, ConstantColumnLeavesScoreDifferencesUnchanged) {
  auto pairs = planted({1.0, -1.0, 0.5}, 100, 4);
  auto augmented = pairs;
  for (auto& p : augmented) {
    p.winner.push_back(1.0);
    p.loser.push_back(1.0);
  }
  auto m = fit_reward(pairs);
  auto ma = fit_reward(augmented);
  EXPECT_EQ(ma.weights.back(), 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x{g(rng), g(rng), g(rng)}, y{g(rng), g(rng), g(rng)};
    auto xa = x, ya = y;
    xa.push_back(1.0);
    ya.push_back(1.0);
    EXPECT_NEAR(score(m, x) - score(m, y), score(ma, xa) - score(ma, ya), 1e-12);
  }
}

// Holds at the optimum, so the fixtures are noisy enough (not separable)
// for the default iteration budget to converge.
TEST(Reward, DoublingAConsistentComparisonNeverShrinksItsMargin) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    auto pairs = planted({0.4, -0.2, 0.5}, 60, seed);
    auto m = fit_reward(pairs);
    ASSERT_LT(m.iterations_used, 2000u) << "seed " << seed;
    for (std::size_t k = 0; k < pairs.size(); k += 7) {
      const auto& c = pairs[k];
      auto margin = [&](const RewardModel& r) { return score(r, c.winner) - score(r, c.loser); };
      if (margin(m) <= 0) continue;  // only consistent comparisons
      auto doubled = pairs;
      doubled.push_back(c);
      auto md = fit_reward(doubled);
      ASSERT_LT(md.iterations_used, 2000u);
      EXPECT_GE(margin(md), margin(m)) << "seed " << seed << " pair " << k;
    }
  }
}

TEST(Reward, ScoreArithmetic) {
  RewardModel zero{{0, 0, 0}, 0, 0, 0, 0};
  EXPECT_EQ(score(zero, std::vector<double>{5, -3, 2}), 0.0);
  RewardModel m{{1, 2, 3}, 0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(score(m, std::vector<double>{0.5, -1, 2}), 4.5);
  EXPECT_EQ(code_of([&] { score(m, std::vector<double>{1, 2}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { fit_reward({}); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { fit_reward({{{1}, {2}, ""}, {{1, 2}, {2, 3}, ""}}); }), ErrorCode::kInvalidInput);
}

TEST(Reward, Deterministic) {
  auto pairs = planted({1, 2}, 50, 6);
  auto a = fit_reward(pairs);
  auto b = fit_reward(pairs);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.iterations_used, b.iterations_used);
}

TEST(Reward, StopsAtTolerance) {
  std::vector<double> a{1, 0}, b{0, 1};
  auto m = fit_reward({{a, b, ""}, {b, a, ""}});
  EXPECT_EQ(m.iterations_used, 0u);  // gradient is exactly zero at the start
  auto capped = fit_reward({{a, b, ""}}, {1e-3, 0.05, 7, 0.0});
  EXPECT_EQ(capped.iterations_used, 7u);
}

class FeedbackStoreTest : public ::testing::Test {
 protected:
  void open() {
    store_.reset();
    registry_.reset();
    acl_ = std::make_shared<governance::AccessControl>(db_, clock_);
    acl_->grant({"labeler", governance::Role::kWriter, governance::Resource::feedback()});
    acl_->grant({"analyst", governance::Role::kReader, governance::Resource::feedback()});
    registry_ = std::make_shared<registry::Registry>(db_, dir_ / "blobs", acl_, clock_);
    store_ = std::make_unique<FeedbackStore>(db_, acl_, registry_, clock_);
  }
  void SetUp() override {
    db_ = store::Database::open((dir_ / "f.db").string());
    open();
  }

  testing::TempDir dir_;
  std::shared_ptr<ManualClock> clock_ = std::make_shared<ManualClock>();
  std::shared_ptr<store::Database> db_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<registry::Registry> registry_;
  std::unique_ptr<FeedbackStore> store_;
};

TEST_F(FeedbackStoreTest, SubmitFitAndReload) {
  auto r1 = store_->submit_ranking("labeler", ranking_of({{1, 0}, {0, 1}, {0, 0}}, {0, 2, 1}, "chat/1"));
  EXPECT_EQ(r1.labeler_id, "labeler");
  store_->submit_ranking("labeler", ranking_of({{2, 0}, {0, 0}}, {0, 1}, "chat/2"));
  store_->submit_ranking("labeler", ranking_of({{0, 5}, {0, 0}}, {0, 1}, "search/1"));
  EXPECT_EQ(store_->comparisons("analyst", "chat/").size(), 4u);
  EXPECT_EQ(store_->comparisons("analyst").size(), 5u);
  EXPECT_EQ(code_of([&] { store_->submit_ranking("analyst", ranking_of({{1}, {2}}, {0, 1})); }),
            ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] { store_->submit_ranking("labeler", ranking_of({{1}, {2}}, {1, 1})); }),
            ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([&] { store_->fit("labeler", "nothing/"); }), ErrorCode::kInvalidInput);

  auto fitted = store_->fit("labeler", "chat/");
  EXPECT_EQ(fitted.model.comparisons_count, 4u);
  EXPECT_GT(fitted.model.weights[0], 0.0);
  auto blob = registry_->blobs().get(fitted.blob_digest);
  EXPECT_EQ(registry_->blob_info(fitted.blob_digest)->media_type, kRewardMediaType);
  EXPECT_FALSE(blob.empty());

  open();
  EXPECT_EQ(store_->records("analyst").size(), 3u);
  auto again = store_->get_reward_model("analyst", fitted.reward_model_id);
  EXPECT_EQ(again.model.weights, fitted.model.weights);
  EXPECT_EQ(again.prompt_prefix, "chat/");
  auto r4 = store_->submit_ranking("labeler", ranking_of({{1}, {2}}, {0, 1}, "x"));
  EXPECT_NE(r4.record_id, r1.record_id);
  EXPECT_EQ(code_of([&] { store_->get_reward_model("analyst", "reward-999999"); }), ErrorCode::kNotFound);
}

}  // namespace
}  // namespace saturn::feedback
