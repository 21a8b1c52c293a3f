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
#include "saturn/governance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>

#include "saturn/error.hpp"

namespace saturn::governance {
namespace {

constexpr std::size_t kMaxDenyLog = 10000;
constexpr int kGridSteps = 100;
constexpr double kTieTolerance = 1e-12;

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kReader:
      return "reader";
    case Role::kWriter:
      return "writer";
    case Role::kAdmin:
      return "admin";
  }
  return "reader";
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::kRead:
      return "read";
    case Action::kWrite:
      return "write";
    case Action::kAdmin:
      return "admin";
  }
  return "read";
}

std::string_view to_string(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::kAny:
      return "*";
    case ResourceKind::kModel:
      return "model";
    case ResourceKind::kCollection:
      return "collection";
    case ResourceKind::kEndpoint:
      return "endpoint";
    case ResourceKind::kFeedback:
      return "feedback";
    case ResourceKind::kPipeline:
      return "pipeline";
  }
  return "*";
}

Role parse_role(std::string_view text) {
  if (text == "reader") return Role::kReader;
  if (text == "writer") return Role::kWriter;
  if (text == "admin") return Role::kAdmin;
  fail(ErrorCode::kInvalidInput, "unknown role: " + std::string(text));
}

Action parse_action(std::string_view text) {
  if (text == "read") return Action::kRead;
  if (text == "write") return Action::kWrite;
  if (text == "admin") return Action::kAdmin;
  fail(ErrorCode::kInvalidInput, "unknown action: " + std::string(text));
}

bool Resource::covers(const Resource& target) const {
  if (kind == ResourceKind::kAny) return true;
  if (kind != target.kind) return false;
  return id == "*" || id == target.id;
}

std::string Resource::to_string() const {
  if (kind == ResourceKind::kAny) return "*";
  return std::string(governance::to_string(kind)) + ":" + id;
}

Resource parse_resource(std::string_view text) {
  if (text == "*") return Resource::any();
  auto colon = text.find(':');
  require(colon != std::string_view::npos && colon + 1 < text.size(), ErrorCode::kInvalidInput,
          "resource must be '*' or 'kind:id'");
  std::string_view kind = text.substr(0, colon);
  std::string id(text.substr(colon + 1));
  for (auto k : {ResourceKind::kModel, ResourceKind::kCollection, ResourceKind::kEndpoint, ResourceKind::kFeedback,
                 ResourceKind::kPipeline}) {
    if (governance::to_string(k) == kind) return {k, id};
  }
  fail(ErrorCode::kInvalidInput, "unknown resource kind: " + std::string(kind));
}

AccessControl::AccessControl(std::shared_ptr<store::Database> db, std::shared_ptr<const Clock> clock)
    : db_(std::move(db)), clock_(std::move(clock)) {
  if (!db_) return;
  db_->exec(
      "CREATE TABLE IF NOT EXISTS grants ("
      " principal TEXT NOT NULL, role TEXT NOT NULL, resource TEXT NOT NULL,"
      " PRIMARY KEY (principal, role, resource))");
  auto st = db_->prepare("SELECT principal, role, resource FROM grants ORDER BY rowid");
  while (st.step()) {
    grants_.push_back({st.column_text(0), parse_role(st.column_text(1)), parse_resource(st.column_text(2))});
  }
}

void AccessControl::grant(const Grant& g) {
  saturn::require(!g.principal.empty(), ErrorCode::kInvalidInput, "grant needs a principal");
  std::unique_lock lock(mu_);
  for (const auto& existing : grants_) {
    if (existing.principal == g.principal && existing.role == g.role && existing.resource == g.resource) return;
  }
  if (db_) {
    db_->prepare("INSERT OR IGNORE INTO grants (principal, role, resource) VALUES (?, ?, ?)")
        .bind(1, g.principal)
        .bind(2, to_string(g.role))
        .bind(3, g.resource.to_string())
        .run();
  }
  grants_.push_back(g);
}

std::vector<Grant> AccessControl::grants() const {
  std::shared_lock lock(mu_);
  return grants_;
}

bool AccessControl::permits(std::string_view principal, Action action, const Resource& resource) const {
  std::shared_lock lock(mu_);
  for (const auto& g : grants_) {
    if (g.principal == principal && static_cast<int>(g.role) >= static_cast<int>(action) &&
        g.resource.covers(resource)) {
      return true;
    }
  }
  return false;
}

bool AccessControl::check(std::string_view principal, Action action, const Resource& resource) const {
  if (permits(principal, action, resource)) return true;
  std::lock_guard lock(deny_mu_);
  if (denies_.size() >= kMaxDenyLog) denies_.erase(denies_.begin());
  denies_.push_back({std::string(principal), action, resource, clock_ ? clock_->now() : 0});
  return false;
}

void AccessControl::require(std::string_view principal, Action action, const Resource& resource) const {
  if (!check(principal, action, resource)) {
    fail(ErrorCode::kForbidden, std::string(principal) + " may not " + std::string(to_string(action)) + " " +
                                    resource.to_string());
  }
}

std::vector<DenyRecord> AccessControl::deny_log() const {
  std::lock_guard lock(deny_mu_);
  return denies_;
}

FairnessReport compute_fairness(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const std::string> groups, std::optional<std::span<const double>> scores) {
  require(predictions.size() == labels.size() && labels.size() == groups.size(), ErrorCode::kInvalidInput,
          "predictions, labels and groups must have equal length");
  if (scores) {
    require(scores->size() == predictions.size(), ErrorCode::kInvalidInput, "scores length mismatch");
    for (double s : *scores) require(s >= 0.0 && s <= 1.0, ErrorCode::kInvalidInput, "scores must lie in [0, 1]");
  }

  struct Tally {
    std::size_t n = 0, predicted_pos = 0, pos = 0, neg = 0, tp = 0, fp = 0;
  };
  std::map<std::string, Tally> tallies;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(predictions[i] == 0 || predictions[i] == 1, ErrorCode::kInvalidInput, "predictions must be 0 or 1");
    require(labels[i] == 0 || labels[i] == 1, ErrorCode::kInvalidInput, "labels must be 0 or 1");
    Tally& t = tallies[groups[i]];
    ++t.n;
    t.predicted_pos += static_cast<std::size_t>(predictions[i]);
    if (labels[i] == 1) {
      ++t.pos;
      t.tp += static_cast<std::size_t>(predictions[i]);
    } else {
      ++t.neg;
      t.fp += static_cast<std::size_t>(predictions[i]);
    }
  }
  require(tallies.size() >= 2, ErrorCode::kInvalidInput, "fairness needs at least two distinct groups");

  FairnessReport r;
  for (const auto& [g, t] : tallies) {
    r.group_counts[g] = t.n;
    r.group_rates[g] = static_cast<double>(t.predicted_pos) / static_cast<double>(t.n);
    r.group_tpr[g] = t.pos ? static_cast<double>(t.tp) / static_cast<double>(t.pos) : 0.0;
    r.group_fpr[g] = t.neg ? static_cast<double>(t.fp) / static_cast<double>(t.neg) : 0.0;
    if (t.pos == 0 || t.neg == 0) r.degenerate_groups.insert(g);
  }
  // Gaps and ratios from exact integer fractions, rounded once.
  using Frac = std::pair<std::uint64_t, std::uint64_t>;
  auto less = [](Frac a, Frac b) { return a.first * b.second < b.first * a.second; };
  auto spread = [&](auto num, auto den) {
    Frac lo{0, 0}, hi{0, 0};
    for (const auto& [g, t] : tallies) {
      Frac f{num(t), den(t)};
      if (f.second == 0) f = {0, 1};
      if (lo.second == 0 || less(f, lo)) lo = f;
      if (hi.second == 0 || less(hi, f)) hi = f;
    }
    return std::pair{lo, hi};
  };
  auto gap = [](Frac lo, Frac hi) {
    return static_cast<double>(hi.first * lo.second - lo.first * hi.second) /
           static_cast<double>(hi.second * lo.second);
  };
  auto [rate_lo, rate_hi] = spread([](const Tally& t) { return t.predicted_pos; }, [](const Tally& t) { return t.n; });
  auto [tpr_lo, tpr_hi] = spread([](const Tally& t) { return t.tp; }, [](const Tally& t) { return t.pos; });
  auto [fpr_lo, fpr_hi] = spread([](const Tally& t) { return t.fp; }, [](const Tally& t) { return t.neg; });
  r.dpd = gap(rate_lo, rate_hi);
  r.eod = std::max(gap(tpr_lo, tpr_hi), gap(fpr_lo, fpr_hi));
  r.dir = rate_hi.first == 0 ? 1.0
                             : static_cast<double>(rate_lo.first * rate_hi.second) /
                                   static_cast<double>(rate_hi.first * rate_lo.second);
  return r;
}

MitigationResult mitigate_by_threshold(std::span<const double> scores, std::span<const int> labels,
                                       std::span<const std::string> groups, double max_accuracy_drop) {
  require(scores.size() == labels.size() && labels.size() == groups.size(), ErrorCode::kInvalidInput,
          "scores, labels and groups must have equal length");
  require(!scores.empty(), ErrorCode::kInvalidInput, "no rows");
  for (double s : scores) require(s >= 0.0 && s <= 1.0, ErrorCode::kInvalidInput, "scores must lie in [0, 1]");

  std::map<std::string, std::vector<std::size_t>> rows_by_group;
  for (std::size_t i = 0; i < groups.size(); ++i) rows_by_group[groups[i]].push_back(i);
  require(rows_by_group.size() >= 2, ErrorCode::kInvalidInput, "fairness needs at least two distinct groups");

  // Per group and grid step: positive-prediction rate and correct count.
  struct GroupTable {
    std::string name;
    std::array<double, kGridSteps + 1> rate{};
    std::array<std::size_t, kGridSteps + 1> correct{};
    std::size_t best_correct = 0;
  };
  std::vector<GroupTable> tables;
  for (const auto& [name, rows] : rows_by_group) {
    GroupTable t;
    t.name = name;
    for (int step = 0; step <= kGridSteps; ++step) {
      double threshold = step / static_cast<double>(kGridSteps);
      std::size_t pos = 0;
      std::size_t correct = 0;
      for (std::size_t i : rows) {
        int pred = scores[i] >= threshold ? 1 : 0;
        pos += static_cast<std::size_t>(pred);
        if (pred == labels[i]) ++correct;
      }
      t.rate[static_cast<std::size_t>(step)] = static_cast<double>(pos) / static_cast<double>(rows.size());
      t.correct[static_cast<std::size_t>(step)] = correct;
      t.best_correct = std::max(t.best_correct, correct);
    }
    tables.push_back(std::move(t));
  }

  const std::size_t n = scores.size();
  const std::size_t mid = kGridSteps / 2;
  std::size_t baseline_correct = 0;
  for (const auto& t : tables) baseline_correct += t.correct[mid];
  const double baseline_accuracy = static_cast<double>(baseline_correct) / static_cast<double>(n);
  auto feasible = [&](std::size_t correct) {
    return static_cast<double>(correct) / static_cast<double>(n) >= baseline_accuracy - max_accuracy_drop - 1e-12;
  };

  // Suffix bound on reachable correct counts, for pruning.
  std::vector<std::size_t> best_remaining(tables.size() + 1, 0);
  for (std::size_t g = tables.size(); g-- > 0;) best_remaining[g] = best_remaining[g + 1] + tables[g].best_correct;

  struct Candidate {
    double dpd = 0.0;
    int distance = 0;
    std::vector<int> steps;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.dpd < b.dpd - kTieTolerance) return true;
    if (a.dpd > b.dpd + kTieTolerance) return false;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.steps < b.steps;
  };

  std::optional<Candidate> best;
  std::vector<int> steps(tables.size(), 0);
  std::function<void(std::size_t, double, double, std::size_t, int)> search =
      [&](std::size_t g, double lo, double hi, std::size_t correct, int distance) {
        if (best && hi - lo > best->dpd + kTieTolerance) return;
        if (!feasible(correct + best_remaining[g])) return;
        if (g == tables.size()) {
          Candidate c{hi - lo, distance, steps};
          if (!best || better(c, *best)) best = std::move(c);
          return;
        }
        const GroupTable& t = tables[g];
        for (int step = 0; step <= kGridSteps; ++step) {
          double r = t.rate[static_cast<std::size_t>(step)];
          steps[g] = step;
          search(g + 1, g == 0 ? r : std::min(lo, r), g == 0 ? r : std::max(hi, r),
                 correct + t.correct[static_cast<std::size_t>(step)],
                 distance + std::abs(step - static_cast<int>(mid)));
        }
      };
  search(0, 0.0, 0.0, 0, 0);

  double baseline_dpd = 0.0;
  {
    double lo = tables[0].rate[mid];
    double hi = lo;
    for (const auto& t : tables) {
      lo = std::min(lo, t.rate[mid]);
      hi = std::max(hi, t.rate[mid]);
    }
    baseline_dpd = hi - lo;
  }

  MitigationResult out;
  out.baseline_accuracy = baseline_accuracy;
  std::vector<int> chosen(tables.size(), static_cast<int>(mid));
  // The baseline vector is always feasible, so best is set.
  if (baseline_dpd > kTieTolerance && best->dpd >= baseline_dpd - kTieTolerance) {
    out.infeasible = true;
  } else {
    chosen = best->steps;
  }

  std::vector<int> predictions(n);
  std::size_t correct = 0;
  for (std::size_t g = 0; g < tables.size(); ++g) {
    double threshold = chosen[g] / static_cast<double>(kGridSteps);
    out.thresholds[tables[g].name] = threshold;
    for (std::size_t i : rows_by_group[tables[g].name]) {
      predictions[i] = scores[i] >= threshold ? 1 : 0;
      if (predictions[i] == labels[i]) ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  out.report = compute_fairness(predictions, labels, groups);
  out.report.thresholds_used = out.thresholds;
  return out;
}

}  // namespace saturn::governance
