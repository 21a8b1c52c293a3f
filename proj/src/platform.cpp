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

#include "saturn/platform.hpp"

#include <httplib.h>

#include <iostream>

#include "saturn/json_codec.hpp"

namespace saturn {

namespace {

void warn(const std::string& what) { std::clog << "saturn: " << what << '\n'; }

void post_json(const std::string& url, const std::string& body) {
  const auto [base, path] = split_url(url);
  httplib::Client client(base);
  client.set_connection_timeout(2);
  client.set_read_timeout(5);
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    warn("webhook " + url + " failed: " + httplib::to_string(res.error()));
  } else if (res->status >= 300) {
    warn("webhook " + url + " answered " + std::to_string(res->status));
  }
}

std::size_t positive(const Config& c, const std::string& key, long long fallback) {
  const auto v = c.get_int(key, fallback);
  require(v >= 1, ErrorCode::kInvalidInput, key + " must be at least 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, ErrorCode::kInvalidInput, "url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

monitor::MonitorOptions monitor_options_from_config(const Config& c) {
  monitor::MonitorOptions o;
  o.capacity = positive(c, "monitor.capacity", static_cast<long long>(o.capacity));
  o.cadence = positive(c, "monitor.cadence", static_cast<long long>(o.cadence));
  o.bins = positive(c, "monitor.bins", static_cast<long long>(o.bins));
  o.min_samples = positive(c, "monitor.min_samples", static_cast<long long>(o.min_samples));
  o.refreeze_samples = positive(c, "monitor.refreeze_samples", static_cast<long long>(o.refreeze_samples));
  o.psi_moderate = c.get_double("monitor.psi_moderate", o.psi_moderate);
  o.psi_drift = c.get_double("monitor.psi_drift", o.psi_drift);
  o.late_tolerance_ms = c.get_int("monitor.late_tolerance_ms", o.late_tolerance_ms);
  return o;
}

std::unique_ptr<Platform> Platform::open(const Config& config, PlatformOverrides ov) {
  std::unique_ptr<Platform> p(new Platform());
  p->config_ = config;
  p->clock_ = ov.clock ? ov.clock : std::make_shared<SystemClock>();

  const auto workers = positive(config, "pipeline.workers", 1);
  p->monitor_exec_ = ov.monitor_executor ? ov.monitor_executor : std::make_shared<ThreadExecutor>(1);
  p->pipeline_exec_ = ov.pipeline_executor ? ov.pipeline_executor : std::make_shared<ThreadExecutor>(workers);
  p->index_exec_ = ov.index_executor ? ov.index_executor : std::make_shared<ThreadExecutor>(1);
  p->webhook_exec_ = ov.webhook_executor ? ov.webhook_executor : std::make_shared<ThreadExecutor>(1);
  p->poster_ = ov.webhook_poster ? ov.webhook_poster : WebhookPoster(post_json);
  p->webhook_url_ = config.get_or("monitor.webhook_url", "");
  if (!p->webhook_url_.empty()) split_url(p->webhook_url_);

  const std::filesystem::path dir = config.get_or("data.dir", "saturn-data");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  p->db_ = store::Database::open((dir / "saturn.db").string());

  p->acl_ = std::make_shared<governance::AccessControl>(p->db_, p->clock_);
  p->acl_->grant({std::string(orchestrator::kPipelineActor), governance::Role::kAdmin, governance::Resource::any()});
  for (const auto& admin : split(config.get_or("governance.admins", ""), ',')) {
    const auto name = trim(admin);
    if (!name.empty()) p->acl_->grant({name, governance::Role::kAdmin, governance::Resource::any()});
  }

  p->registry_ = std::make_shared<registry::Registry>(p->db_, dir / "blobs", p->acl_, p->clock_);
  p->farm_ = std::make_shared<embedfarm::EmbeddingFarm>(p->db_, p->acl_, p->clock_, p->index_exec_);
  p->monitor_ = std::make_shared<monitor::Monitor>(p->db_, p->clock_, p->monitor_exec_,
                                                   monitor_options_from_config(config));
  p->feedback_ = std::make_shared<feedback::FeedbackStore>(p->db_, p->acl_, p->registry_, p->clock_);

  const auto token_file = config.get_or("serve.tokens", "");
  p->tokens_ = std::make_shared<serving::TokenStore>(
      token_file.empty() ? serving::TokenStore() : serving::TokenStore::parse(read_file(token_file)));

  serving::ServingOptions so;
  so.refreeze_on_rebind = config.get_bool("serve.refreeze_on_rebind", true);
  so.cache_capacity = positive(config, "serve.cache_capacity", static_cast<long long>(so.cache_capacity));
  p->serving_ = std::make_shared<serving::Serving>(p->db_, p->registry_, p->acl_, p->monitor_, p->tokens_,
                                                   p->clock_, so);
  p->orchestrator_ = std::make_shared<orchestrator::Orchestrator>(
      p->db_, p->registry_, p->acl_, p->serving_, p->monitor_, p->clock_, p->pipeline_exec_,
      orchestrator::gate_from_config(config));

  auto* self = p.get();
  p->monitor_->add_sink([self](const monitor::DriftEvent& e, const monitor::DriftReport&) { self->on_drift(e); });
  p->resumed_ = p->orchestrator_->resume();
  return p;
}

void Platform::on_drift(const monitor::DriftEvent& e) {
  if (!webhook_url_.empty()) {
    const Json body{{"event_id", e.event_id},
                    {"endpoint_id", e.endpoint_id},
                    {"verdict", monitor::to_string(e.verdict)},
                    {"max_psi", e.max_psi}};
    webhook_exec_->post([poster = poster_, url = webhook_url_, text = body.dump()] {
      try {
        poster(url, text);
      } catch (const std::exception& ex) {
        warn(std::string("webhook: ") + ex.what());
      }
    });
  }
  try {
    const auto r = orchestrator_->submit_trigger(orchestrator::kPipelineActor,
                                                 {orchestrator::TriggerKind::kDrift, "", {{"event_id", e.event_id}}});
    if (r.duplicate) warn("drift event " + e.event_id + " already has run " + r.run_id);
  } catch (const std::exception& ex) {
    warn("drift event " + e.event_id + " not turned into a run: " + ex.what());
  }
}

void Platform::drain() {
  // A drift evaluation can queue a run and a webhook; twice covers the chain.
  for (int i = 0; i < 2; ++i) {
    for (const auto* e : {&monitor_exec_, &pipeline_exec_, &webhook_exec_, &index_exec_}) {
      if (*e) (*e)->drain();
    }
  }
}

Platform::~Platform() {
  try {
    drain();
  } catch (...) {
  }
}

}  // namespace saturn
