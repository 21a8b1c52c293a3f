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

// Human preference data: rankings over candidate outputs, their pairwise
// expansion, and a linear reward model fit by pairwise logistic loss.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/governance.hpp"
#include "saturn/registry.hpp"
#include "saturn/store.hpp"

namespace saturn::feedback {

struct Candidate {
  std::string candidate_id;
  std::vector<double> features;
};

struct FeedbackRecord {
  std::string record_id;
  std::string prompt_id;
  std::vector<Candidate> candidates;
  std::vector<std::size_t> ranking;  // candidate indices, best first
  std::string labeler_id;
  Timestamp submitted_at = 0;
};

struct PairwiseComparison {
  std::vector<double> winner;
  std::vector<double> loser;
  std::string record_id;
};

struct RewardOptions {
  double l2_lambda = 1e-3;
  double learning_rate = 0.05;
  std::size_t max_iters = 2000;
  double tolerance = 1e-8;
};

struct RewardModel {
  std::vector<double> weights;
  double fit_loss = 0.0;
  std::size_t iterations_used = 0;
  std::size_t comparisons_count = 0;
  double l2_lambda = 0.0;
};

/// Throws invalid-input unless the record is a well-formed ranking.
void validate_record(const FeedbackRecord& record);
/// Every ordered pair (earlier rank beats later rank): n(n-1)/2 of them.
std::vector<PairwiseComparison> expand(const FeedbackRecord& record);

/// sum ln(1 + exp(-w.(x_win - x_lose))) + lambda |w|^2
double reward_loss(std::span<const double> w, const std::vector<PairwiseComparison>& comparisons, double l2_lambda);
std::vector<double> reward_gradient(std::span<const double> w, const std::vector<PairwiseComparison>& comparisons,
                                    double l2_lambda);
/// Full-batch gradient descent from zero with step learning_rate / count;
/// stops when that scaled gradient's norm drops below tolerance.
RewardModel fit_reward(const std::vector<PairwiseComparison>& comparisons, const RewardOptions& options = {});

double score(const RewardModel& model, std::span<const double> features);
/// Fraction of comparisons whose winner scores strictly higher.
double pairwise_accuracy(const RewardModel& model, const std::vector<PairwiseComparison>& comparisons);

inline constexpr char kRewardMediaType[] = "application/x-saturn-reward+json";

struct StoredRewardModel {
  std::string reward_model_id;
  RewardModel model;
  std::string blob_digest;
  std::string prompt_prefix;
  RewardOptions options;
  Timestamp created_at = 0;
};

/// Append-only ranking store plus a catalog of fitted reward models, whose
/// bodies live in the registry blob store.
class FeedbackStore {
 public:
  FeedbackStore(std::shared_ptr<store::Database> db, std::shared_ptr<governance::AccessControl> acl,
                std::shared_ptr<registry::Registry> registry, std::shared_ptr<const Clock> clock);

  FeedbackRecord submit_ranking(std::string_view actor, FeedbackRecord record);
  std::vector<FeedbackRecord> records(std::string_view actor, std::string_view prompt_prefix = {}) const;
  std::vector<PairwiseComparison> comparisons(std::string_view actor, std::string_view prompt_prefix = {}) const;

  StoredRewardModel fit(std::string_view actor, const std::string& prompt_prefix, const RewardOptions& options = {});
  StoredRewardModel get_reward_model(std::string_view actor, const std::string& reward_model_id) const;

 private:
  void load();

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex mu_;
  std::vector<FeedbackRecord> records_;
  std::map<std::string, StoredRewardModel> models_;
  std::size_t next_record_ = 1;
  std::size_t next_model_ = 1;
};

}  // namespace saturn::feedback
