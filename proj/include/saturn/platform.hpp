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

// Wires the services together from a Config. Everything shares one SQLite
// database and one blob store under data.dir.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "saturn/clock.hpp"
#include "saturn/config.hpp"
#include "saturn/embedfarm.hpp"
#include "saturn/executor.hpp"
#include "saturn/feedback.hpp"
#include "saturn/governance.hpp"
#include "saturn/monitor.hpp"
#include "saturn/orchestrator.hpp"
#include "saturn/registry.hpp"
#include "saturn/serving.hpp"

namespace saturn {

/// Delivers a webhook body; the default posts with an HTTP client.
using WebhookPoster = std::function<void(const std::string& url, const std::string& body)>;

/// Test seams. Anything left null gets the production default.
struct PlatformOverrides {
  std::shared_ptr<const Clock> clock;
  std::shared_ptr<Executor> monitor_executor;
  std::shared_ptr<Executor> pipeline_executor;
  std::shared_ptr<Executor> index_executor;
  std::shared_ptr<Executor> webhook_executor;
  WebhookPoster webhook_poster;
};

/// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

/// Reads monitor.* keys over the defaults.
monitor::MonitorOptions monitor_options_from_config(const Config& config);

class Platform {
 public:
  /// Creates data.dir if needed, loads persisted state and resumes any
  /// pipeline runs a previous process left unfinished.
  static std::unique_ptr<Platform> open(const Config& config, PlatformOverrides overrides = {});
  ~Platform();

  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  const Config& config() const { return config_; }
  const std::shared_ptr<const Clock>& clock() const { return clock_; }
  const std::shared_ptr<store::Database>& db() const { return db_; }
  const std::shared_ptr<governance::AccessControl>& acl() const { return acl_; }
  const std::shared_ptr<registry::Registry>& registry() const { return registry_; }
  const std::shared_ptr<embedfarm::EmbeddingFarm>& farm() const { return farm_; }
  const std::shared_ptr<monitor::Monitor>& monitor() const { return monitor_; }
  const std::shared_ptr<feedback::FeedbackStore>& feedback() const { return feedback_; }
  const std::shared_ptr<serving::TokenStore>& tokens() const { return tokens_; }
  const std::shared_ptr<serving::Serving>& serving() const { return serving_; }
  const std::shared_ptr<orchestrator::Orchestrator>& orchestrator() const { return orchestrator_; }

  /// Waits for queued monitor, pipeline and webhook work.
  void drain();
  std::size_t resumed_runs() const { return resumed_; }

 private:
  Platform() = default;
  void on_drift(const monitor::DriftEvent& event);

  Config config_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<Executor> monitor_exec_;
  std::shared_ptr<Executor> pipeline_exec_;
  std::shared_ptr<Executor> index_exec_;
  std::shared_ptr<Executor> webhook_exec_;
  WebhookPoster poster_;
  std::string webhook_url_;

  std::shared_ptr<store::Database> db_;
  std::shared_ptr<governance::AccessControl> acl_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<embedfarm::EmbeddingFarm> farm_;
  std::shared_ptr<monitor::Monitor> monitor_;
  std::shared_ptr<feedback::FeedbackStore> feedback_;
  std::shared_ptr<serving::TokenStore> tokens_;
  std::shared_ptr<serving::Serving> serving_;
  std::shared_ptr<orchestrator::Orchestrator> orchestrator_;
  std::size_t resumed_ = 0;
};

}  // namespace saturn
