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

// Continuous monitoring: inference logs per endpoint, a frozen reference
// distribution, PSI and two-sample KS drift statistics, and drift events.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "saturn/clock.hpp"
#include "saturn/executor.hpp"
#include "saturn/store.hpp"

namespace saturn::monitor {

inline constexpr double kEpsilon = 1e-6;

struct InferenceLog {
  std::string endpoint_id;
  std::vector<double> features;
  double prediction = 0.0;
  double latency_ms = 0.0;
  Timestamp timestamp = 0;
};

/// Equal-frequency bins: edges holds the B-1 interior edges; bin i covers
/// [edges[i-1], edges[i]).
struct FeatureHistogram {
  std::vector<double> edges;
  std::vector<std::uint64_t> counts;
};

struct ReferenceSnapshot {
  std::string endpoint_id;
  std::vector<FeatureHistogram> features;
  std::vector<std::vector<double>> samples;  // per feature, sorted; kept for KS
  std::size_t sample_count = 0;
  Timestamp frozen_at = 0;
};

enum class Verdict { kNone, kModerate, kDrift };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct FeatureDrift {
  std::size_t feature = 0;
  double psi = 0.0;
  double ks_stat = 0.0;
  double ks_critical = 0.0;
};

struct DriftWindow {
  Timestamp first = 0;
  Timestamp last = 0;
  std::size_t count = 0;
};

struct DriftReport {
  std::uint64_t seq = 0;
  std::string endpoint_id;
  DriftWindow window;
  std::vector<FeatureDrift> per_feature;
  Verdict verdict = Verdict::kNone;
  double threshold_psi = 0.2;
  double max_psi = 0.0;
  Timestamp evaluated_at = 0;
  std::uint64_t evaluation = 0;  // per-endpoint ordinal, 1-based
  std::optional<std::string> event_id;
};

struct DriftEvent {
  std::string event_id;
  std::string endpoint_id;
  std::uint64_t report_seq = 0;
  Verdict verdict = Verdict::kDrift;
  double max_psi = 0.0;
  Timestamp emitted_at = 0;
};

struct MonitorOptions {
  std::size_t capacity = 500;
  std::size_t cadence = 100;
  std::size_t bins = 10;
  std::size_t min_samples = 100;
  std::size_t refreeze_samples = 500;  // logs collected after refreeze_on_next
  double psi_moderate = 0.1;
  double psi_drift = 0.2;
  Timestamp late_tolerance_ms = 1000;
};

/// Floors every probability at kEpsilon, then renormalizes.
std::vector<double> smooth_distribution(std::span<const double> p);
/// sum (p_i - q_i) ln(p_i / q_i) over smoothed inputs.
double compute_psi(std::span<const double> reference, std::span<const double> live);

struct KsResult {
  double stat = 0.0;
  double critical = 0.0;
};

double ks_critical(std::size_t n, std::size_t m);
KsResult compute_ks(std::span<const double> reference, std::span<const double> live);

FeatureHistogram equal_frequency_histogram(std::span<const double> samples, std::size_t bins);
std::size_t bin_of(const FeatureHistogram& h, double x);
/// Fraction of samples falling in each bin of h.
std::vector<double> bin_distribution(const FeatureHistogram& h, std::span<const double> samples);

Verdict classify(double max_psi, const MonitorOptions& options);

/// Deterministic id of a drift event for (endpoint, window).
std::string drift_event_id(const std::string& endpoint_id, const DriftWindow& window);

using DriftSink = std::function<void(const DriftEvent&, const DriftReport&)>;

class Monitor {
 public:
  Monitor(std::shared_ptr<store::Database> db, std::shared_ptr<const Clock> clock, std::shared_ptr<Executor> executor,
          MonitorOptions options = {});
  ~Monitor();

  void register_endpoint(const std::string& endpoint_id);
  bool has_endpoint(const std::string& endpoint_id) const;

  /// Every cadence-th ingest after a freeze schedules an evaluation on the
  /// executor over the window as it stood at that ingest.
  void ingest(const InferenceLog& log);

  /// From the live buffer; an existing reference is replaced only with force.
  ReferenceSnapshot freeze_reference(const std::string& endpoint_id, bool force = false);
  /// From supplied feature rows, e.g. held-out data at deploy time.
  ReferenceSnapshot freeze_reference_from(const std::string& endpoint_id,
                                          const std::vector<std::vector<double>>& rows, bool force = false);
  /// Drops the reference and the buffer; the next refreeze_samples logs
  /// become the new reference.
  void refreeze_on_next(const std::string& endpoint_id);

  std::optional<ReferenceSnapshot> reference(const std::string& endpoint_id) const;
  DriftReport evaluate_drift(const std::string& endpoint_id);

  std::vector<DriftReport> reports(const std::string& endpoint_id) const;
  std::vector<DriftEvent> events() const;
  std::size_t buffered(const std::string& endpoint_id) const;
  /// Copy of the live buffer, oldest first.
  std::vector<InferenceLog> window(const std::string& endpoint_id) const;
  void add_sink(DriftSink sink);
  const MonitorOptions& options() const { return options_; }

 private:
  struct Endpoint;

  Endpoint& endpoint_locked(const std::string& endpoint_id);
  const Endpoint& endpoint_locked(const std::string& endpoint_id) const;
  ReferenceSnapshot make_reference(const std::string& endpoint_id, const std::vector<std::vector<double>>& rows) const;
  void install_reference_locked(Endpoint& ep, ReferenceSnapshot ref);
  DriftReport evaluate_window(const std::string& endpoint_id, std::vector<InferenceLog> window,
                              std::shared_ptr<const ReferenceSnapshot> ref);
  void load();

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<Executor> executor_;
  MonitorOptions options_;

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Endpoint>> endpoints_;
  std::vector<DriftEvent> events_;
  std::set<std::string> event_ids_;
  std::uint64_t next_report_ = 1;
  std::vector<DriftSink> sinks_;
};

}  // namespace saturn::monitor
