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

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/store.hpp"

namespace saturn::governance {

// ---- access control ------------------------------------------------------

enum class Role { kReader = 1, kWriter = 2, kAdmin = 3 };
enum class Action { kRead = 1, kWrite = 2, kAdmin = 3 };
enum class ResourceKind { kAny, kModel, kCollection, kEndpoint, kFeedback, kPipeline };

std::string_view to_string(Role role);
std::string_view to_string(Action action);
std::string_view to_string(ResourceKind kind);
Role parse_role(std::string_view text);
Action parse_action(std::string_view text);

/// "kind:id"; id "*" means every resource of the kind, and the bare "*"
/// means every resource of every kind.
struct Resource {
  ResourceKind kind = ResourceKind::kAny;
  std::string id = "*";

  static Resource any() { return {}; }
  static Resource all(ResourceKind kind) { return {kind, "*"}; }
  static Resource model(std::string id) { return {ResourceKind::kModel, std::move(id)}; }
  static Resource collection(std::string id) { return {ResourceKind::kCollection, std::move(id)}; }
  static Resource endpoint(std::string id) { return {ResourceKind::kEndpoint, std::move(id)}; }
  static Resource feedback(std::string id = "*") { return {ResourceKind::kFeedback, std::move(id)}; }
  static Resource pipeline(std::string id = "*") { return {ResourceKind::kPipeline, std::move(id)}; }

  bool covers(const Resource& target) const;
  std::string to_string() const;
  friend bool operator==(const Resource&, const Resource&) = default;
};

Resource parse_resource(std::string_view text);

struct Grant {
  std::string principal;
  Role role = Role::kReader;
  Resource resource;
};

struct DenyRecord {
  std::string principal;
  Action action = Action::kRead;
  Resource resource;
  Timestamp at = 0;
};

/// Deny-by-default role checks. Grants persist in the shared store when
/// one is supplied.
class AccessControl {
 public:
  AccessControl(std::shared_ptr<store::Database> db, std::shared_ptr<const Clock> clock);

  void grant(const Grant& g);
  std::vector<Grant> grants() const;

  /// allow iff some grant with role >= action covers the resource.
  bool check(std::string_view principal, Action action, const Resource& resource) const;
  /// check() without recording a deny; for filtering listings.
  bool permits(std::string_view principal, Action action, const Resource& resource) const;
  /// Throws forbidden when check() denies.
  void require(std::string_view principal, Action action, const Resource& resource) const;

  std::vector<DenyRecord> deny_log() const;

 private:
  std::shared_ptr<store::Database> db_;
  std::shared_ptr<const Clock> clock_;
  mutable std::shared_mutex mu_;
  std::vector<Grant> grants_;
  mutable std::mutex deny_mu_;
  mutable std::vector<DenyRecord> denies_;
};

// ---- fairness ------------------------------------------------------------

struct FairnessReport {
  std::map<std::string, double> group_rates;  // positive-prediction rate
  std::map<std::string, double> group_tpr;
  std::map<std::string, double> group_fpr;
  std::map<std::string, std::size_t> group_counts;
  std::map<std::string, double> thresholds_used;
  std::set<std::string> degenerate_groups;  // no positives or no negatives
  double dpd = 0.0;
  double eod = 0.0;
  double dir = 1.0;
};

/// Demographic parity difference, equalized odds difference and disparate
/// impact ratio over binary predictions. scores, when given, must match in
/// length and lie in [0, 1]; they do not enter the metrics.
FairnessReport compute_fairness(std::span<const int> predictions, std::span<const int> labels,
                                std::span<const std::string> groups,
                                std::optional<std::span<const double>> scores = std::nullopt);

struct MitigationResult {
  std::map<std::string, double> thresholds;
  FairnessReport report;
  bool infeasible = false;
  double baseline_accuracy = 0.0;
  double accuracy = 0.0;
};

/// Per-group threshold search over {0.00, 0.01, ..., 1.00}: minimize dpd
/// subject to accuracy >= baseline(0.5) - max_accuracy_drop. Ties go to the
/// smallest total distance from 0.5 (in grid steps), then to the
/// lexicographically smallest threshold vector in group order. When no
/// feasible vector improves on a nonzero baseline dpd the baseline is
/// returned flagged infeasible. A row is positive when score >= threshold.
MitigationResult mitigate_by_threshold(std::span<const double> scores, std::span<const int> labels,
                                       std::span<const std::string> groups, double max_accuracy_drop = 0.05);

}  // namespace saturn::governance
