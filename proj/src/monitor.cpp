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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saturn/digest.hpp"
#include "saturn/error.hpp"
#include "saturn/json_codec.hpp"

namespace saturn::monitor {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kNone:
      return "none";
    case Verdict::kModerate:
      return "moderate";
    case Verdict::kDrift:
      return "drift";
  }
  return "none";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "none") return Verdict::kNone;
  if (text == "moderate") return Verdict::kModerate;
  if (text == "drift") return Verdict::kDrift;
  fail(ErrorCode::kInvalidInput, "unknown verdict: " + std::string(text));
}

// ---- statistics ----------------------------------------------------------

std::vector<double> smooth_distribution(std::span<const double> p) {
  require(!p.empty(), ErrorCode::kInvalidInput, "empty distribution");
  std::vector<double> out(p.begin(), p.end());
  double total = 0.0;
  for (double& x : out) {
    require(std::isfinite(x) && x >= 0.0, ErrorCode::kInvalidInput, "probabilities must be finite and nonnegative");
    x = std::max(x, kEpsilon);
    total += x;
  }
  for (double& x : out) x /= total;
  return out;
}

double compute_psi(std::span<const double> reference, std::span<const double> live) {
  require(reference.size() == live.size(), ErrorCode::kInvalidInput, "histogram lengths differ");
  auto p = smooth_distribution(reference);
  auto q = smooth_distribution(live);
  double psi = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) psi += (p[i] - q[i]) * std::log(p[i] / q[i]);
  return std::max(psi, 0.0);
}

double ks_critical(std::size_t n, std::size_t m) {
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return 1.358 * std::sqrt((dn + dm) / (dn * dm));
}

KsResult compute_ks(std::span<const double> reference, std::span<const double> live) {
  require(!reference.empty() && !live.empty(), ErrorCode::kInvalidInput, "KS needs two nonempty samples");
  std::vector<double> a(reference.begin(), reference.end());
  std::vector<double> b(live.begin(), live.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Step through pooled values; both ECDFs are evaluated after all ties.
  while (i < a.size() || j < b.size()) {
    double x = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return {d, ks_critical(a.size(), b.size())};
}

FeatureHistogram equal_frequency_histogram(std::span<const double> samples, std::size_t bins) {
  require(bins >= 1, ErrorCode::kInvalidInput, "need at least one bin");
  require(samples.size() >= bins, ErrorCode::kNotReady, "fewer samples than bins");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  FeatureHistogram h;
  for (std::size_t i = 1; i < bins; ++i) h.edges.push_back(s[i * s.size() / bins]);
  h.counts.assign(bins, 0);
  for (double x : s) ++h.counts[bin_of(h, x)];
  return h;
}

std::size_t bin_of(const FeatureHistogram& h, double x) {
  return static_cast<std::size_t>(std::upper_bound(h.edges.begin(), h.edges.end(), x) - h.edges.begin());
}

std::vector<double> bin_distribution(const FeatureHistogram& h, std::span<const double> samples) {
  std::vector<double> p(h.edges.size() + 1, 0.0);
  if (samples.empty()) return p;
  for (double x : samples) p[bin_of(h, x)] += 1.0;
  for (double& x : p) x /= static_cast<double>(samples.size());
  return p;
}

Verdict classify(double max_psi, const MonitorOptions& options) {
  if (max_psi > options.psi_drift) return Verdict::kDrift;
  if (max_psi > options.psi_moderate) return Verdict::kModerate;
  return Verdict::kNone;
}

std::string drift_event_id(const std::string& endpoint_id, const DriftWindow& window) {
  return sha256_hex(endpoint_id + "|" + std::to_string(window.first) + "|" + std::to_string(window.last) + "|" +
                    std::to_string(window.count));
}

// ---- monitor -------------------------------------------------------------

struct Monitor::Endpoint {
  std::string id;
  std::deque<InferenceLog> buffer;
  std::size_t dim = 0;  // 0 until the first log or reference fixes it
  Timestamp latest = 0;
  std::shared_ptr<const ReferenceSnapshot> reference;
  bool autofreeze = false;
  std::uint64_t since_freeze = 0;
  std::uint64_t evaluations = 0;
  std::uint64_t last_event_evaluation = 0;
  std::vector<DriftReport> reports;
  std::mutex eval_mu;  // one evaluation in flight per endpoint
};

Monitor::Monitor(std::shared_ptr<store::Database> db, std::shared_ptr<const Clock> clock,
                 std::shared_ptr<Executor> executor, MonitorOptions options)
    : db_(std::move(db)), clock_(std::move(clock)), executor_(std::move(executor)), options_(options) {
  require(clock_ != nullptr && executor_ != nullptr, ErrorCode::kInternal, "monitor needs a clock and an executor");
  require(options_.cadence >= 1 && options_.capacity >= options_.min_samples && options_.min_samples >= options_.bins &&
              options_.refreeze_samples >= options_.min_samples && options_.refreeze_samples <= options_.capacity,
          ErrorCode::kInvalidInput, "inconsistent monitor options");
  if (db_) {
    db_->exec(
        "CREATE TABLE IF NOT EXISTS monitor_endpoints (endpoint_id TEXT PRIMARY KEY, reference TEXT);"
        "CREATE TABLE IF NOT EXISTS monitor_reports (seq INTEGER PRIMARY KEY, endpoint_id TEXT NOT NULL,"
        " body TEXT NOT NULL);"
        "CREATE TABLE IF NOT EXISTS monitor_events (event_id TEXT PRIMARY KEY, body TEXT NOT NULL);");
    load();
  }
}

Monitor::~Monitor() = default;

void Monitor::load() {
  auto eps = db_->prepare("SELECT endpoint_id, reference FROM monitor_endpoints");
  while (eps.step()) {
    auto ep = std::make_unique<Endpoint>();
    ep->id = eps.column_text(0);
    if (!eps.column_is_null(1)) {
      ep->reference = std::make_shared<const ReferenceSnapshot>(Json::parse(eps.column_text(1)).get<ReferenceSnapshot>());
      ep->dim = ep->reference->features.size();
    } else {
      // The buffer is not persisted, so a pending refreeze resumes from scratch.
      ep->autofreeze = true;
    }
    endpoints_.emplace(ep->id, std::move(ep));
  }
  auto reps = db_->prepare("SELECT seq, body FROM monitor_reports ORDER BY seq");
  while (reps.step()) {
    auto r = Json::parse(reps.column_text(1)).get<DriftReport>();
    next_report_ = std::max<std::uint64_t>(next_report_, r.seq + 1);
    auto it = endpoints_.find(r.endpoint_id);
    if (it == endpoints_.end()) continue;
    auto& ep = *it->second;
    ep.evaluations = std::max(ep.evaluations, r.evaluation);
    if (r.event_id) ep.last_event_evaluation = std::max(ep.last_event_evaluation, r.evaluation);
    ep.reports.push_back(std::move(r));
  }
  auto evs = db_->prepare("SELECT body FROM monitor_events");
  while (evs.step()) {
    auto e = Json::parse(evs.column_text(0)).get<DriftEvent>();
    event_ids_.insert(e.event_id);
    events_.push_back(std::move(e));
  }
  std::sort(events_.begin(), events_.end(),
            [](const DriftEvent& a, const DriftEvent& b) { return a.report_seq < b.report_seq; });
}

Monitor::Endpoint& Monitor::endpoint_locked(const std::string& endpoint_id) {
  auto it = endpoints_.find(endpoint_id);
  if (it == endpoints_.end()) fail(ErrorCode::kNotFound, "no monitored endpoint " + endpoint_id);
  return *it->second;
}

const Monitor::Endpoint& Monitor::endpoint_locked(const std::string& endpoint_id) const {
  auto it = endpoints_.find(endpoint_id);
  if (it == endpoints_.end()) fail(ErrorCode::kNotFound, "no monitored endpoint " + endpoint_id);
  return *it->second;
}

void Monitor::register_endpoint(const std::string& endpoint_id) {
  require(!endpoint_id.empty(), ErrorCode::kInvalidInput, "endpoint id must be nonempty");
  std::lock_guard lock(mu_);
  if (endpoints_.count(endpoint_id)) return;
  auto ep = std::make_unique<Endpoint>();
  ep->id = endpoint_id;
  if (db_) {
    db_->prepare("INSERT OR IGNORE INTO monitor_endpoints (endpoint_id, reference) VALUES (?, NULL)")
        .bind(1, endpoint_id)
        .run();
  }
  endpoints_.emplace(endpoint_id, std::move(ep));
}

bool Monitor::has_endpoint(const std::string& endpoint_id) const {
  std::lock_guard lock(mu_);
  return endpoints_.count(endpoint_id) > 0;
}

ReferenceSnapshot Monitor::make_reference(const std::string& endpoint_id,
                                          const std::vector<std::vector<double>>& rows) const {
  if (rows.size() < options_.min_samples) {
    fail(ErrorCode::kNotReady, "reference needs at least " + std::to_string(options_.min_samples) + " samples, have " +
                                   std::to_string(rows.size()));
  }
  const std::size_t dim = rows.front().size();
  require(dim >= 1, ErrorCode::kInvalidInput, "feature vectors must be nonempty");
  ReferenceSnapshot ref;
  ref.endpoint_id = endpoint_id;
  ref.sample_count = rows.size();
  ref.frozen_at = clock_->now();
  for (std::size_t f = 0; f < dim; ++f) {
    std::vector<double> column;
    column.reserve(rows.size());
    for (const auto& row : rows) {
      require(row.size() == dim, ErrorCode::kInvalidInput, "reference rows differ in length");
      require(std::isfinite(row[f]), ErrorCode::kInvalidInput, "non-finite reference feature");
      column.push_back(row[f]);
    }
    std::sort(column.begin(), column.end());
    ref.features.push_back(equal_frequency_histogram(column, options_.bins));
    ref.samples.push_back(std::move(column));
  }
  return ref;
}

// The live window always post-dates the reference, so the buffer restarts.
void Monitor::install_reference_locked(Endpoint& ep, ReferenceSnapshot ref) {
  if (db_) {
    db_->prepare("UPDATE monitor_endpoints SET reference = ? WHERE endpoint_id = ?")
        .bind(1, Json(ref).dump())
        .bind(2, ep.id)
        .run();
  }
  ep.dim = ref.features.size();
  ep.reference = std::make_shared<const ReferenceSnapshot>(std::move(ref));
  ep.buffer.clear();
  ep.since_freeze = 0;
  ep.autofreeze = false;
}

ReferenceSnapshot Monitor::freeze_reference(const std::string& endpoint_id, bool force) {
  std::lock_guard lock(mu_);
  auto& ep = endpoint_locked(endpoint_id);
  if (ep.reference && !force) fail(ErrorCode::kConflict, "reference already frozen; pass force to replace it");
  std::vector<std::vector<double>> rows;
  for (const auto& log : ep.buffer) rows.push_back(log.features);
  auto ref = make_reference(endpoint_id, rows);
  install_reference_locked(ep, ref);
  return ref;
}

ReferenceSnapshot Monitor::freeze_reference_from(const std::string& endpoint_id,
                                                 const std::vector<std::vector<double>>& rows, bool force) {
  auto ref = make_reference(endpoint_id, rows);
  std::lock_guard lock(mu_);
  auto& ep = endpoint_locked(endpoint_id);
  if (ep.reference && !force) fail(ErrorCode::kConflict, "reference already frozen; pass force to replace it");
  install_reference_locked(ep, ref);
  return ref;
}

void Monitor::refreeze_on_next(const std::string& endpoint_id) {
  std::lock_guard lock(mu_);
  auto& ep = endpoint_locked(endpoint_id);
  if (db_) {
    db_->prepare("UPDATE monitor_endpoints SET reference = NULL WHERE endpoint_id = ?").bind(1, endpoint_id).run();
  }
  ep.reference.reset();
  ep.buffer.clear();
  ep.since_freeze = 0;
  ep.dim = 0;
  ep.autofreeze = true;
}

std::optional<ReferenceSnapshot> Monitor::reference(const std::string& endpoint_id) const {
  std::lock_guard lock(mu_);
  const auto& ep = endpoint_locked(endpoint_id);
  if (!ep.reference) return std::nullopt;
  return *ep.reference;
}

void Monitor::ingest(const InferenceLog& log) {
  require(!log.features.empty(), ErrorCode::kInvalidInput, "feature vector must be nonempty");
  for (double x : log.features) require(std::isfinite(x), ErrorCode::kInvalidInput, "non-finite feature");
  require(std::isfinite(log.prediction), ErrorCode::kInvalidInput, "non-finite prediction");
  require(std::isfinite(log.latency_ms) && log.latency_ms >= 0.0, ErrorCode::kInvalidInput,
          "latency must be finite and nonnegative");

  std::vector<InferenceLog> window;
  std::shared_ptr<const ReferenceSnapshot> ref;
  {
    std::lock_guard lock(mu_);
    auto& ep = endpoint_locked(log.endpoint_id);
    if (ep.dim != 0 && log.features.size() != ep.dim) {
      fail(ErrorCode::kInvalidInput, "endpoint " + ep.id + " expects " + std::to_string(ep.dim) + " features");
    }
    if (!ep.buffer.empty() && log.timestamp < ep.latest - options_.late_tolerance_ms) {
      fail(ErrorCode::kInvalidInput, "log is more than the late tolerance older than the newest log");
    }
    ep.dim = log.features.size();
    ep.latest = std::max(ep.latest, log.timestamp);
    ep.buffer.push_back(log);
    if (ep.buffer.size() > options_.capacity) ep.buffer.pop_front();

    if (ep.autofreeze && ep.buffer.size() >= options_.refreeze_samples) {
      std::vector<std::vector<double>> rows;
      for (const auto& l : ep.buffer) rows.push_back(l.features);
      install_reference_locked(ep, make_reference(ep.id, rows));
      return;
    }
    if (!ep.reference) return;
    ++ep.since_freeze;
    if (ep.since_freeze % options_.cadence != 0 || ep.buffer.size() < options_.min_samples) return;
    window.assign(ep.buffer.begin(), ep.buffer.end());
    ref = ep.reference;
  }
  executor_->post([this, id = log.endpoint_id, window = std::move(window), ref = std::move(ref)]() mutable {
    evaluate_window(id, std::move(window), std::move(ref));
  });
}

DriftReport Monitor::evaluate_drift(const std::string& endpoint_id) {
  std::vector<InferenceLog> window;
  std::shared_ptr<const ReferenceSnapshot> ref;
  {
    std::lock_guard lock(mu_);
    auto& ep = endpoint_locked(endpoint_id);
    if (!ep.reference) fail(ErrorCode::kNotReady, "no reference frozen for " + endpoint_id);
    if (ep.buffer.size() < options_.min_samples) {
      fail(ErrorCode::kNotReady, "live window has " + std::to_string(ep.buffer.size()) + " samples, need " +
                                     std::to_string(options_.min_samples));
    }
    window.assign(ep.buffer.begin(), ep.buffer.end());
    ref = ep.reference;
  }
  return evaluate_window(endpoint_id, std::move(window), std::move(ref));
}

DriftReport Monitor::evaluate_window(const std::string& endpoint_id, std::vector<InferenceLog> window,
                                     std::shared_ptr<const ReferenceSnapshot> ref) {
  Endpoint* ep = nullptr;
  {
    std::lock_guard lock(mu_);
    ep = &endpoint_locked(endpoint_id);
  }
  std::unique_lock eval_lock(ep->eval_mu);

  std::stable_sort(window.begin(), window.end(),
                   [](const InferenceLog& a, const InferenceLog& b) { return a.timestamp < b.timestamp; });
  DriftReport report;
  report.endpoint_id = endpoint_id;
  report.window = {window.front().timestamp, window.back().timestamp, window.size()};
  report.threshold_psi = options_.psi_drift;
  for (std::size_t f = 0; f < ref->features.size(); ++f) {
    std::vector<double> live;
    live.reserve(window.size());
    for (const auto& log : window) live.push_back(log.features[f]);
    const auto& hist = ref->features[f];
    std::vector<double> p(hist.counts.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = static_cast<double>(hist.counts[i]) / static_cast<double>(ref->sample_count);
    }
    auto ks = compute_ks(ref->samples[f], live);
    FeatureDrift fd{f, compute_psi(p, bin_distribution(hist, live)), ks.stat, ks.critical};
    report.max_psi = std::max(report.max_psi, fd.psi);
    report.per_feature.push_back(fd);
  }
  report.verdict = classify(report.max_psi, options_);

  std::optional<DriftEvent> event;
  std::vector<DriftSink> sinks;
  {
    std::lock_guard lock(mu_);
    report.seq = next_report_++;
    report.evaluated_at = clock_->now();
    report.evaluation = ++ep->evaluations;
    // Cooldown: the evaluation right after an event never emits.
    const bool cooling = ep->last_event_evaluation != 0 && report.evaluation <= ep->last_event_evaluation + 1;
    std::string id = drift_event_id(endpoint_id, report.window);
    if (report.verdict == Verdict::kDrift && !cooling && !event_ids_.count(id)) {
      event = DriftEvent{id, endpoint_id, report.seq, report.verdict, report.max_psi, report.evaluated_at};
      report.event_id = id;
      ep->last_event_evaluation = report.evaluation;
      event_ids_.insert(id);
      events_.push_back(*event);
    }
    if (db_) {
      store::Transaction tx(*db_);
      db_->prepare("INSERT INTO monitor_reports (seq, endpoint_id, body) VALUES (?, ?, ?)")
          .bind(1, static_cast<std::int64_t>(report.seq))
          .bind(2, endpoint_id)
          .bind(3, Json(report).dump())
          .run();
      if (event) {
        db_->prepare("INSERT INTO monitor_events (event_id, body) VALUES (?, ?)")
            .bind(1, event->event_id)
            .bind(2, Json(*event).dump())
            .run();
      }
      tx.commit();
    }
    ep->reports.push_back(report);
    if (event) sinks = sinks_;
  }
  eval_lock.unlock();
  for (const auto& sink : sinks) sink(*event, report);
  return report;
}

std::vector<DriftReport> Monitor::reports(const std::string& endpoint_id) const {
  std::lock_guard lock(mu_);
  return endpoint_locked(endpoint_id).reports;
}

std::vector<DriftEvent> Monitor::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<InferenceLog> Monitor::window(const std::string& endpoint_id) const {
  std::lock_guard lock(mu_);
  const auto& ep = endpoint_locked(endpoint_id);
  return {ep.buffer.begin(), ep.buffer.end()};
}

std::size_t Monitor::buffered(const std::string& endpoint_id) const {
  std::lock_guard lock(mu_);
  return endpoint_locked(endpoint_id).buffer.size();
}

void Monitor::add_sink(DriftSink sink) {
  std::lock_guard lock(mu_);
  sinks_.push_back(std::move(sink));
}

}  // namespace saturn::monitor
