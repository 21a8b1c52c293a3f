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

#include "saturn/http_api.hpp"

#include <httplib.h>

#include <atomic>
#include <iostream>
#include <thread>

#include "saturn/bytes.hpp"
#include "saturn/json_codec.hpp"

namespace saturn {

namespace {

using governance::Action;
using governance::Resource;
using Req = httplib::Request;
using Res = httplib::Response;

void send_json(Res& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Res& res, ErrorCode code, const std::string& message) {
  send_json(res, Json{{"error", {{"code", to_string(code)}, {"message", message}}}}, http_status(code));
}

Json body_json(const Req& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kInvalidInput, std::string("malformed JSON body: ") + e.what());
  }
}

std::string bearer(const Req& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() <= kPrefix.size() || h.compare(0, kPrefix.size(), kPrefix) != 0) return {};
  return trim(std::string_view(h).substr(kPrefix.size()));
}

const std::string& param(const Req& req, const char* name) { return req.path_params.at(name); }

std::optional<std::string> query(const Req& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::vector<float> float_vector(const Json& j, const char* name) {
  const auto v = field<std::vector<double>>(j, name);
  std::vector<float> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(static_cast<float>(x));
  return out;
}

Json reference_summary(const monitor::ReferenceSnapshot& r) {
  Json j = r;
  j.erase("samples");
  return j;
}

template <typename T>
Json array_of(const std::vector<T>& items) {
  Json a = Json::array();
  for (const auto& x : items) a.push_back(x);
  return a;
}

monitor::InferenceLog log_from_json(const Json& j, Timestamp now) {
  monitor::InferenceLog log;
  log.endpoint_id = field<std::string>(j, "endpoint_id");
  log.features = field<std::vector<double>>(j, "features");
  log.prediction = optional_field<double>(j, "prediction").value_or(0.0);
  log.latency_ms = optional_field<double>(j, "latency_ms").value_or(0.0);
  log.timestamp = optional_field<Timestamp>(j, "timestamp_ms").value_or(now);
  return log;
}

std::vector<int> binary_list(const Json& j, const char* name) {
  auto v = field<std::vector<int>>(j, name);
  for (int x : v) require(x == 0 || x == 1, ErrorCode::kInvalidInput, std::string(name) + " must be 0 or 1");
  return v;
}

}  // namespace

struct ApiServer::Impl {
  Platform& p;
  ApiOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> bound{false};

  Impl(Platform& platform, ApiOptions opts) : p(platform), options(opts) {
    server.set_payload_max_length(options.max_body_bytes);
    const auto threads = options.threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server.set_exception_handler([](const Req&, Res& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::kInternal, e.what());
      } catch (...) {
        send_error(res, ErrorCode::kInternal, "unknown failure");
      }
    });
    routes();
  }

  std::string principal(const Req& req) const {
    const auto token = bearer(req);
    if (token.empty()) fail(ErrorCode::kUnauthorized, "missing bearer token");
    return p.tokens()->authenticate(token);
  }

  using Handler = std::function<void(const Req&, Res&)>;

  // Maps thrown errors onto the error body.
  static httplib::Server::Handler guarded(Handler h) {
    return [h = std::move(h)](const Req& req, Res& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorCode::kInvalidInput, e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::kInternal, e.what());
      }
    };
  }

  void get(const char* path, Handler h) { server.Get(path, guarded(std::move(h))); }
  void post(const char* path, Handler h) { server.Post(path, guarded(std::move(h))); }
  void put(const char* path, Handler h) { server.Put(path, guarded(std::move(h))); }

  void routes() {
    get("/v1/health", [](const Req&, Res& res) { send_json(res, Json{{"status", "ok"}}); });
    registry_routes();
    collection_routes();
    monitor_routes();
    pipeline_routes();
    feedback_routes();
    governance_routes();
    serving_routes();
  }

  void registry_routes() {
    auto& reg = *p.registry();
    post("/v1/models", [this, &reg](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto m = reg.register_model(who, field<std::string>(b, "name"),
                                        registry::parse_modality(field<std::string>(b, "modality")),
                                        optional_field<std::string>(b, "owner").value_or(who));
      send_json(res, m, 201);
    });
    get("/v1/models", [this, &reg](const Req& req, Res& res) {
      send_json(res, Json{{"models", array_of(reg.list_models(principal(req)))}});
    });
    get("/v1/models/:id", [this, &reg](const Req& req, Res& res) {
      send_json(res, reg.get_model(principal(req), param(req, "id")));
    });
    get("/v1/models/:id/versions", [this, &reg](const Req& req, Res& res) {
      send_json(res, Json{{"versions", array_of(reg.list_versions(principal(req), param(req, "id")))}});
    });
    post("/v1/models/:id/versions", [this, &reg](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto stage = registry::parse_stage(optional_field<std::string>(b, "stage").value_or("S1"));
      const auto v = reg.create_version(who, param(req, "id"), field<std::string>(b, "artifact_digest"),
                                        optional_field<std::string>(b, "parent_version"), stage,
                                        optional_field<std::string>(b, "idempotency_key"),
                                        optional_field<std::string>(b, "policy").value_or(""));
      send_json(res, v, 201);
    });
    post("/v1/versions/:id/transition", [this, &reg](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto v = reg.transition_stage(who, param(req, "id"), registry::parse_stage(field<std::string>(b, "to")),
                                          optional_field<registry::ValidationReport>(b, "report"));
      send_json(res, v);
    });
    get("/v1/versions/:id", [this, &reg](const Req& req, Res& res) {
      send_json(res, reg.get_version(principal(req), param(req, "id")));
    });
    get("/v1/versions/:id/lineage", [this, &reg](const Req& req, Res& res) {
      send_json(res, Json{{"lineage", array_of(reg.lineage(principal(req), param(req, "id")))}});
    });
    put("/v1/blobs", [this, &reg](const Req& req, Res& res) {
      const auto who = principal(req);
      auto type = req.get_header_value("Content-Type");
      if (type.empty()) type = "application/octet-stream";
      send_json(res, reg.put_blob(who, as_bytes(req.body), type), 201);
    });
    get("/v1/blobs/:digest", [this, &reg](const Req& req, Res& res) {
      const auto& digest = param(req, "digest");
      const auto bytes = reg.get_blob(principal(req), digest);
      const auto info = reg.blob_info(digest);
      res.set_content(saturn::to_string(std::span<const std::uint8_t>(bytes)), info ? info->media_type : "application/octet-stream");
    });
    get("/v1/audit", [this, &reg](const Req& req, Res& res) {
      p.acl()->require(principal(req), Action::kRead, Resource::all(governance::ResourceKind::kModel));
      send_json(res, Json{{"records", array_of(reg.audit_log())}});
    });
  }

  void collection_routes() {
    auto& farm = *p.farm();
    post("/v1/collections", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto dim = field<std::int64_t>(b, "dim");
      require(dim >= 1 && dim <= std::numeric_limits<std::uint32_t>::max(), ErrorCode::kInvalidInput,
              "dim must be a positive 32-bit integer");
      const auto info = farm.create_collection(
          who, field<std::string>(b, "name"), static_cast<std::uint32_t>(dim),
          embedfarm::parse_metric(optional_field<std::string>(b, "metric").value_or("cosine")));
      send_json(res, info, 201);
    });
    get("/v1/collections", [this, &farm](const Req& req, Res& res) {
      send_json(res, Json{{"collections", array_of(farm.list_collections(principal(req)))}});
    });
    post("/v1/collections/import", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto name = query(req, "name");
      require(name && !name->empty(), ErrorCode::kInvalidInput, "import needs ?name=");
      send_json(res, farm.import_bytes(who, as_bytes(req.body), *name), 201);
    });
    get("/v1/collections/:name", [this, &farm](const Req& req, Res& res) {
      send_json(res, farm.info(principal(req), param(req, "name")));
    });
    put("/v1/collections/:name/embeddings/:key", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      auto tags = optional_field<std::vector<std::string>>(b, "tags").value_or(std::vector<std::string>{});
      send_json(res, farm.upsert(who, param(req, "name"), param(req, "key"), float_vector(b, "vector"),
                                 std::move(tags)));
    });
    get("/v1/collections/:name/embeddings/:key", [this, &farm](const Req& req, Res& res) {
      send_json(res, farm.get(principal(req), param(req, "name"), param(req, "key")));
    });
    post("/v1/collections/:name/batch-get", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto entries = farm.batch_get(who, param(req, "name"), field<std::vector<std::string>>(b, "keys"));
      Json out = Json::array();
      for (const auto& e : entries) out.push_back(e ? Json(*e) : Json(nullptr));
      send_json(res, Json{{"entries", out}});
    });
    post("/v1/collections/:name/search", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto query_vec = float_vector(b, "vector");
      const auto k = field<std::int64_t>(b, "k");
      require(k >= 1, ErrorCode::kInvalidInput, "k must be at least 1");
      const auto tags = optional_field<std::vector<std::string>>(b, "tags").value_or(std::vector<std::string>{});
      const auto mode = optional_field<std::string>(b, "mode").value_or("exact");
      std::vector<embedfarm::SearchResult> results;
      if (mode == "exact") {
        results = farm.search_exact(who, param(req, "name"), query_vec, static_cast<std::size_t>(k), tags);
      } else if (mode == "ann") {
        results = farm.search_ann(who, param(req, "name"), query_vec, static_cast<std::size_t>(k), tags);
      } else {
        fail(ErrorCode::kInvalidInput, "mode must be exact or ann");
      }
      send_json(res, Json{{"results", array_of(results)}});
    });
    post("/v1/collections/:name/index", [this, &farm](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const auto& name = param(req, "name");
      if (optional_field<bool>(b, "async").value_or(false)) {
        farm.build_index_async(who, name);
        send_json(res, Json{{"name", name}, {"status", "building"}}, 202);
        return;
      }
      farm.build_index(who, name);
      send_json(res, farm.info(who, name));
    });
    get("/v1/collections/:name/export", [this, &farm](const Req& req, Res& res) {
      const auto bytes = farm.export_bytes(principal(req), param(req, "name"));
      res.set_content(saturn::to_string(std::span<const std::uint8_t>(bytes)), "application/octet-stream");
    });
  }

  void require_endpoint(const std::string& who, Action action, const std::string& endpoint_id) const {
    p.acl()->require(who, action, Resource::endpoint(endpoint_id));
    require(p.monitor()->has_endpoint(endpoint_id), ErrorCode::kNotFound, "unknown endpoint: " + endpoint_id);
  }

  void monitor_routes() {
    auto& mon = *p.monitor();
    post("/v1/monitor/logs", [this, &mon](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      const Json items = b.is_array() ? b : b.contains("logs") ? b.at("logs") : Json::array({b});
      require(items.is_array() && !items.empty(), ErrorCode::kInvalidInput, "no logs");
      const auto now = p.clock()->now();
      std::vector<monitor::InferenceLog> logs;
      for (const auto& item : items) logs.push_back(log_from_json(item, now));
      // Authorize the whole batch before taking any of it.
      std::set<std::string> seen;
      for (const auto& l : logs) {
        if (seen.insert(l.endpoint_id).second) require_endpoint(who, Action::kWrite, l.endpoint_id);
      }
      std::size_t accepted = 0;
      for (const auto& l : logs) {
        try {
          mon.ingest(l);
        } catch (const Error& e) {
          fail(e.code(), "log " + std::to_string(accepted) + ": " + e.what() + " (" + std::to_string(accepted) +
                             " accepted)");
        }
        ++accepted;
      }
      send_json(res, Json{{"accepted", accepted}});
    });
    get("/v1/monitor/events", [this, &mon](const Req& req, Res& res) {
      const auto who = principal(req);
      Json out = Json::array();
      for (const auto& e : mon.events()) {
        if (p.acl()->permits(who, Action::kRead, Resource::endpoint(e.endpoint_id))) out.push_back(e);
      }
      send_json(res, Json{{"events", out}});
    });
    post("/v1/monitor/:ep/freeze", [this, &mon](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto& ep = param(req, "ep");
      require_endpoint(who, Action::kWrite, ep);
      const auto b = body_json(req);
      const bool force = optional_field<bool>(b, "force").value_or(false);
      const auto rows = optional_field<std::vector<std::vector<double>>>(b, "rows");
      const auto ref = rows ? mon.freeze_reference_from(ep, *rows, force) : mon.freeze_reference(ep, force);
      send_json(res, reference_summary(ref));
    });
    get("/v1/monitor/:ep/reports", [this, &mon](const Req& req, Res& res) {
      const auto& ep = param(req, "ep");
      require_endpoint(principal(req), Action::kRead, ep);
      send_json(res, Json{{"reports", array_of(mon.reports(ep))}});
    });
    post("/v1/monitor/:ep/evaluate", [this, &mon](const Req& req, Res& res) {
      const auto& ep = param(req, "ep");
      require_endpoint(principal(req), Action::kWrite, ep);
      send_json(res, mon.evaluate_drift(ep));
    });
  }

  void pipeline_routes() {
    auto& orch = *p.orchestrator();
    post("/v1/pipeline/triggers", [this, &orch](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      orchestrator::TriggerRequest tr;
      tr.kind = orchestrator::parse_trigger_kind(field<std::string>(b, "kind"));
      tr.trigger_id = optional_field<std::string>(b, "trigger_id").value_or("");
      if (b.contains("payload")) {
        const auto& payload = b.at("payload");
        require(payload.is_object(), ErrorCode::kInvalidInput, "payload must be an object");
        for (const auto& [k, v] : payload.items()) {
          require(v.is_string(), ErrorCode::kInvalidInput, "payload values must be strings: " + k);
          tr.payload[k] = v.get<std::string>();
        }
      }
      const auto r = orch.submit_trigger(who, tr);
      send_json(res, Json{{"run_id", r.run_id}, {"duplicate", r.duplicate}}, r.duplicate ? 200 : 202);
    });
    get("/v1/pipeline/runs", [this, &orch](const Req& req, Res& res) {
      const auto who = principal(req);
      std::optional<orchestrator::TriggerKind> kind;
      std::optional<orchestrator::RunStatus> status;
      if (auto k = query(req, "kind")) kind = orchestrator::parse_trigger_kind(*k);
      if (auto s = query(req, "status")) status = orchestrator::parse_run_status(*s);
      send_json(res, Json{{"runs", array_of(orch.list_runs(who, kind, status))}});
    });
    get("/v1/pipeline/runs/:id", [this, &orch](const Req& req, Res& res) {
      send_json(res, orch.get_run(principal(req), param(req, "id")));
    });
  }

  void feedback_routes() {
    auto& fb = *p.feedback();
    post("/v1/feedback/rankings", [this, &fb](const Req& req, Res& res) {
      const auto who = principal(req);
      auto record = body_json(req).get<feedback::FeedbackRecord>();
      if (record.labeler_id.empty()) record.labeler_id = who;
      send_json(res, fb.submit_ranking(who, std::move(record)), 201);
    });
    post("/v1/feedback/reward-models", [this, &fb](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      feedback::RewardOptions opts;
      if (b.contains("hyperparameters")) feedback::from_json(b.at("hyperparameters"), opts);
      send_json(res, fb.fit(who, optional_field<std::string>(b, "prompt_prefix").value_or(""), opts), 201);
    });
    get("/v1/feedback/reward-models/:id", [this, &fb](const Req& req, Res& res) {
      send_json(res, fb.get_reward_model(principal(req), param(req, "id")));
    });
    post("/v1/feedback/reward-models/:id/score", [this, &fb](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto m = fb.get_reward_model(who, param(req, "id"));
      const auto b = body_json(req);
      const auto x = field<std::vector<double>>(b, "features");
      require(x.size() == m.model.weights.size(), ErrorCode::kInvalidInput,
              "expected " + std::to_string(m.model.weights.size()) + " features");
      send_json(res, Json{{"reward_model_id", m.reward_model_id}, {"score", feedback::score(m.model, x)}});
    });
  }

  void governance_routes() {
    auto& acl = *p.acl();
    post("/v1/grants", [this, &acl](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      governance::Grant g{field<std::string>(b, "principal"), governance::parse_role(field<std::string>(b, "role")),
                          governance::parse_resource(field<std::string>(b, "resource"))};
      require(!g.principal.empty(), ErrorCode::kInvalidInput, "principal must be nonempty");
      acl.require(who, Action::kAdmin, g.resource);
      acl.grant(g);
      send_json(res, g, 201);
    });
    get("/v1/grants", [this, &acl](const Req& req, Res& res) {
      const auto who = principal(req);
      Json out = Json::array();
      for (const auto& g : acl.grants()) {
        if (g.principal == who || acl.permits(who, Action::kAdmin, g.resource)) out.push_back(g);
      }
      send_json(res, Json{{"grants", out}});
    });
    post("/v1/fairness/evaluate", [this](const Req& req, Res& res) {
      principal(req);
      const auto b = body_json(req);
      const auto preds = binary_list(b, "predictions");
      const auto labels = binary_list(b, "labels");
      const auto groups = field<std::vector<std::string>>(b, "groups");
      const auto scores = optional_field<std::vector<double>>(b, "scores");
      std::optional<std::span<const double>> s;
      if (scores) s = std::span<const double>(*scores);
      send_json(res, governance::compute_fairness(preds, labels, groups, s));
    });
    post("/v1/fairness/mitigate", [this](const Req& req, Res& res) {
      principal(req);
      const auto b = body_json(req);
      const auto scores = field<std::vector<double>>(b, "scores");
      const auto labels = binary_list(b, "labels");
      const auto groups = field<std::vector<std::string>>(b, "groups");
      send_json(res, governance::mitigate_by_threshold(scores, labels, groups,
                                                       optional_field<double>(b, "max_accuracy_drop").value_or(0.05)));
    });
  }

  void serving_routes() {
    auto& srv = *p.serving();
    post("/v1/endpoints", [this, &srv](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      send_json(res, srv.create_endpoint(who, field<std::string>(b, "version_id"), field<std::string>(b, "route")),
                201);
    });
    get("/v1/endpoints", [this, &srv](const Req& req, Res& res) {
      const auto who = principal(req);
      Json out = Json::array();
      for (const auto& e : srv.list()) {
        if (p.acl()->permits(who, Action::kRead, Resource::endpoint(e.endpoint_id))) out.push_back(e);
      }
      send_json(res, Json{{"endpoints", out}});
    });
    get("/v1/endpoints/:id", [this, &srv](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto& id = param(req, "id");
      p.acl()->require(who, Action::kRead, Resource::endpoint(id));
      send_json(res, srv.get(id));
    });
    post("/v1/endpoints/:id/rebind", [this, &srv](const Req& req, Res& res) {
      const auto who = principal(req);
      const auto b = body_json(req);
      send_json(res, srv.rebind(who, param(req, "id"), field<std::string>(b, "version_id")));
    });
    post("/v1/endpoints/:id/pause", [this, &srv](const Req& req, Res& res) {
      send_json(res, srv.pause(principal(req), param(req, "id")));
    });
    post("/v1/endpoints/:id/resume", [this, &srv](const Req& req, Res& res) {
      send_json(res, srv.resume(principal(req), param(req, "id")));
    });
    post("/v1/endpoints/:id/retire", [this, &srv](const Req& req, Res& res) {
      send_json(res, srv.retire(principal(req), param(req, "id")));
    });
    post("/v1/infer/:route", [&srv](const Req& req, Res& res) {
      // Serving authenticates before anything else, so the body is parsed
      // only after a token is known to be good.
      const auto token = bearer(req);
      if (token.empty()) fail(ErrorCode::kUnauthorized, "missing bearer token");
      serving::InferenceRequest ir;
      const auto b = body_json(req);
      ir.tokens = optional_field<std::vector<std::string>>(b, "tokens");
      ir.features = optional_field<std::vector<double>>(b, "features");
      send_json(res, srv.infer(param(req, "route"), ir, token));
    });
  }
};

ApiServer::ApiServer(Platform& platform, ApiOptions options) : impl_(std::make_unique<Impl>(platform, options)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    require(bound > 0, ErrorCode::kIoError, "cannot bind " + host);
  } else {
    require(impl_->server.bind_to_port(host, port), ErrorCode::kIoError,
            "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return bound;
}

void ApiServer::serve() {
  require(impl_->bound, ErrorCode::kInternal, "serve() before bind()");
  impl_->server.listen_after_bind();
}

void ApiServer::start() {
  require(impl_->bound, ErrorCode::kInternal, "start() before bind()");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace saturn
