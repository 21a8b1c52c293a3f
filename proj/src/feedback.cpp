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

#include <cmath>
#include <cstdio>
#include <numeric>

#include "saturn/bytes.hpp"
#include "saturn/error.hpp"
#include "saturn/json_codec.hpp"

namespace saturn::feedback {

using governance::Action;
using governance::Resource;

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double margin(std::span<const double> w, const PairwiseComparison& c) {
  double m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * (c.winner[i] - c.loser[i]);
  return m;
}

std::size_t shared_dimension(const std::vector<PairwiseComparison>& comparisons) {
  require(!comparisons.empty(), ErrorCode::kInvalidInput, "no comparisons to fit");
  const std::size_t d = comparisons.front().winner.size();
  require(d >= 1, ErrorCode::kInvalidInput, "feature vectors must be nonempty");
  for (const auto& c : comparisons) {
    require(c.winner.size() == d && c.loser.size() == d, ErrorCode::kInvalidInput,
            "comparisons do not share one feature dimension");
  }
  return d;
}

std::string make_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, n);
  return buf;
}

std::size_t id_number(const std::string& id) {
  auto dash = id.rfind('-');
  return dash == std::string::npos ? 0 : std::strtoul(id.c_str() + dash + 1, nullptr, 10);
}

}  // namespace

void validate_record(const FeedbackRecord& record) {
  require(!record.prompt_id.empty(), ErrorCode::kInvalidInput, "prompt_id must be nonempty");
  const std::size_t n = record.candidates.size();
  require(n >= 2, ErrorCode::kInvalidInput, "a ranking needs at least two candidates");
  require(record.ranking.size() == n, ErrorCode::kInvalidInput, "ranking must list every candidate once");
  std::vector<bool> seen(n, false);
  for (std::size_t idx : record.ranking) {
    require(idx < n && !seen[idx], ErrorCode::kInvalidInput, "ranking is not a permutation of candidate indices");
    seen[idx] = true;
  }
  const std::size_t d = record.candidates.front().features.size();
  require(d >= 1, ErrorCode::kInvalidInput, "feature vectors must be nonempty");
  for (const auto& c : record.candidates) {
    require(c.features.size() == d, ErrorCode::kInvalidInput, "candidate feature dimensions differ");
    for (double x : c.features) require(std::isfinite(x), ErrorCode::kInvalidInput, "non-finite feature");
  }
}

std::vector<PairwiseComparison> expand(const FeedbackRecord& record) {
  validate_record(record);
  std::vector<PairwiseComparison> out;
  const auto& r = record.ranking;
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = i + 1; j < r.size(); ++j) {
      out.push_back({record.candidates[r[i]].features, record.candidates[r[j]].features, record.record_id});
    }
  }
  return out;
}

double reward_loss(std::span<const double> w, const std::vector<PairwiseComparison>& comparisons, double l2_lambda) {
  require(w.size() == shared_dimension(comparisons), ErrorCode::kInvalidInput, "weight dimension mismatch");
  double loss = 0.0;
  for (const auto& c : comparisons) loss += softplus(-margin(w, c));
  double reg = 0.0;
  for (double x : w) reg += x * x;
  return loss + l2_lambda * reg;
}

std::vector<double> reward_gradient(std::span<const double> w, const std::vector<PairwiseComparison>& comparisons,
                                    double l2_lambda) {
  const std::size_t d = shared_dimension(comparisons);
  require(w.size() == d, ErrorCode::kInvalidInput, "weight dimension mismatch");
  std::vector<double> g(d, 0.0);
  for (const auto& c : comparisons) {
    const double s = logistic(-margin(w, c));
    for (std::size_t i = 0; i < d; ++i) g[i] -= s * (c.winner[i] - c.loser[i]);
  }
  for (std::size_t i = 0; i < d; ++i) g[i] += 2.0 * l2_lambda * w[i];
  return g;
}

RewardModel fit_reward(const std::vector<PairwiseComparison>& comparisons, const RewardOptions& options) {
  const std::size_t d = shared_dimension(comparisons);
  require(options.l2_lambda >= 0.0 && options.learning_rate > 0.0 && options.tolerance >= 0.0,
          ErrorCode::kInvalidInput, "bad reward fitting options");
  RewardModel m;
  m.weights.assign(d, 0.0);
  m.comparisons_count = comparisons.size();
  m.l2_lambda = options.l2_lambda;
  // Steps follow the gradient divided by the comparison count, so one
  // learning rate is stable for any data size; the minimizer is unchanged.
  const double n = static_cast<double>(comparisons.size());
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    auto g = reward_gradient(m.weights, comparisons, options.l2_lambda);
    for (double& x : g) x /= n;
    const double norm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    if (norm < options.tolerance) break;
    for (std::size_t i = 0; i < d; ++i) m.weights[i] -= options.learning_rate * g[i];
    m.iterations_used = it + 1;
  }
  for (double x : m.weights) require(std::isfinite(x), ErrorCode::kInternal, "reward fit diverged");
  m.fit_loss = reward_loss(m.weights, comparisons, options.l2_lambda);
  return m;
}

double score(const RewardModel& model, std::span<const double> features) {
  require(features.size() == model.weights.size(), ErrorCode::kInvalidInput, "feature dimension mismatch");
  return std::inner_product(features.begin(), features.end(), model.weights.begin(), 0.0);
}

double pairwise_accuracy(const RewardModel& model, const std::vector<PairwiseComparison>& comparisons) {
  if (comparisons.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& c : comparisons) correct += score(model, c.winner) > score(model, c.loser);
  return static_cast<double>(correct) / static_cast<double>(comparisons.size());
}

// ---- store ---------------------------------------------------------------

FeedbackStore::FeedbackStore(std::shared_ptr<store::Database> db, std::shared_ptr<governance::AccessControl> acl,
                             std::shared_ptr<registry::Registry> registry, std::shared_ptr<const Clock> clock)
    : db_(std::move(db)), acl_(std::move(acl)), registry_(std::move(registry)), clock_(std::move(clock)) {
  require(acl_ != nullptr && registry_ != nullptr && clock_ != nullptr, ErrorCode::kInternal,
          "feedback store needs an access list, a registry and a clock");
  if (db_) {
    db_->exec(
        "CREATE TABLE IF NOT EXISTS feedback_records (record_id TEXT PRIMARY KEY, body TEXT NOT NULL);"
        "CREATE TABLE IF NOT EXISTS reward_models (reward_model_id TEXT PRIMARY KEY, blob_digest TEXT NOT NULL,"
        " prompt_prefix TEXT NOT NULL, options TEXT NOT NULL, created_at INTEGER NOT NULL);");
    load();
  }
}

void FeedbackStore::load() {
  auto rs = db_->prepare("SELECT body FROM feedback_records ORDER BY rowid");
  while (rs.step()) {
    records_.push_back(Json::parse(rs.column_text(0)).get<FeedbackRecord>());
    next_record_ = std::max(next_record_, id_number(records_.back().record_id) + 1);
  }
  auto ms = db_->prepare("SELECT reward_model_id, blob_digest, prompt_prefix, options, created_at FROM reward_models");
  while (ms.step()) {
    StoredRewardModel s;
    s.reward_model_id = ms.column_text(0);
    s.blob_digest = ms.column_text(1);
    s.prompt_prefix = ms.column_text(2);
    s.options = Json::parse(ms.column_text(3)).get<RewardOptions>();
    s.created_at = ms.column_int(4);
    auto body = registry_->blobs().get(s.blob_digest);
    s.model = Json::parse(saturn::to_string(body)).get<RewardModel>();
    next_model_ = std::max(next_model_, id_number(s.reward_model_id) + 1);
    models_.emplace(s.reward_model_id, std::move(s));
  }
}

FeedbackRecord FeedbackStore::submit_ranking(std::string_view actor, FeedbackRecord record) {
  acl_->require(actor, Action::kWrite, Resource::feedback());
  validate_record(record);
  if (record.labeler_id.empty()) record.labeler_id = std::string(actor);
  std::lock_guard lock(mu_);
  record.record_id = make_id("fb-", next_record_);
  record.submitted_at = clock_->now();
  if (db_) {
    db_->prepare("INSERT INTO feedback_records (record_id, body) VALUES (?, ?)")
        .bind(1, record.record_id)
        .bind(2, Json(record).dump())
        .run();
  }
  ++next_record_;
  records_.push_back(record);
  return record;
}

std::vector<FeedbackRecord> FeedbackStore::records(std::string_view actor, std::string_view prompt_prefix) const {
  acl_->require(actor, Action::kRead, Resource::feedback());
  std::lock_guard lock(mu_);
  std::vector<FeedbackRecord> out;
  for (const auto& r : records_) {
    if (std::string_view(r.prompt_id).substr(0, prompt_prefix.size()) == prompt_prefix) out.push_back(r);
  }
  return out;
}

std::vector<PairwiseComparison> FeedbackStore::comparisons(std::string_view actor,
                                                           std::string_view prompt_prefix) const {
  std::vector<PairwiseComparison> out;
  for (const auto& r : records(actor, prompt_prefix)) {
    auto pairs = expand(r);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

StoredRewardModel FeedbackStore::fit(std::string_view actor, const std::string& prompt_prefix,
                                     const RewardOptions& options) {
  acl_->require(actor, Action::kWrite, Resource::feedback());
  auto pairs = comparisons(actor, prompt_prefix);
  StoredRewardModel s;
  s.model = fit_reward(pairs, options);
  s.prompt_prefix = prompt_prefix;
  s.options = options;
  auto body = Json(s.model).dump();
  s.blob_digest = registry_->put_blob_unchecked(as_bytes(body), kRewardMediaType).digest;
  const Json opts = options;
  std::lock_guard lock(mu_);
  s.reward_model_id = make_id("reward-", next_model_);
  s.created_at = clock_->now();
  if (db_) {
    db_->prepare(
           "INSERT INTO reward_models (reward_model_id, blob_digest, prompt_prefix, options, created_at)"
           " VALUES (?, ?, ?, ?, ?)")
        .bind(1, s.reward_model_id)
        .bind(2, s.blob_digest)
        .bind(3, s.prompt_prefix)
        .bind(4, opts.dump())
        .bind(5, s.created_at)
        .run();
  }
  ++next_model_;
  models_.emplace(s.reward_model_id, s);
  return s;
}

StoredRewardModel FeedbackStore::get_reward_model(std::string_view actor, const std::string& reward_model_id) const {
  acl_->require(actor, Action::kRead, Resource::feedback());
  std::lock_guard lock(mu_);
  auto it = models_.find(reward_model_id);
  if (it == models_.end()) fail(ErrorCode::kNotFound, "no reward model " + reward_model_id);
  return it->second;
}

}  // namespace saturn::feedback
