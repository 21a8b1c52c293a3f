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

// saturn: command-line client for the platform API.
//
// Exit status: 0 on success, 1 when the server (or the connection)
// reports an error, 2 on a usage error.

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "saturn/config.hpp"
#include "saturn/error.hpp"

namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kApiError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The server answered with an error body, or never answered.
struct ApiError : std::runtime_error {
  ApiError(std::string code, const std::string& message) : std::runtime_error(message), code(std::move(code)) {}
  std::string code;
};

struct CliConfig {
  std::string server_url;
  std::string token;
  std::string output = "table";
};

fs::path default_config_path() {
  if (const char* xdg = std::getenv("XDG_CONFIG_HOME"); xdg && *xdg) return fs::path(xdg) / "saturn" / "config";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".config" / "saturn" / "config";
  return {};
}

// flags > SATURN_URL / SATURN_TOKEN > config file > built-in default.
CliConfig resolve_config(const std::string& flag_url, const std::string& flag_token, const std::string& flag_output,
                         const std::string& flag_config) {
  saturn::Config file;
  const fs::path path = flag_config.empty() ? default_config_path() : fs::path(flag_config);
  if (!flag_config.empty() || (!path.empty() && fs::exists(path))) {
    try {
      file = saturn::Config::load(path);
    } catch (const saturn::Error& e) {
      throw UsageError(std::string("config file: ") + e.what());
    }
  }
  auto pick = [&](const std::string& flag, const char* env, const char* key, std::string fallback) {
    if (!flag.empty()) return flag;
    if (const char* v = std::getenv(env); v && *v) return std::string(v);
    return file.get_or(key, std::move(fallback));
  };
  CliConfig c;
  c.server_url = pick(flag_url, "SATURN_URL", "url", "http://127.0.0.1:8080");
  c.token = pick(flag_token, "SATURN_TOKEN", "token", "");
  c.output = flag_output.empty() ? file.get_or("output", "table") : flag_output;
  if (c.output != "table" && c.output != "json") throw UsageError("output must be table or json");
  return c;
}

class Client {
 public:
  explicit Client(const CliConfig& config) : config_(config), http_(config.server_url) {
    if (!http_.is_valid()) throw UsageError("bad server url: " + config.server_url);
    http_.set_connection_timeout(5);
    http_.set_read_timeout(300);
  }

  /// Returns the raw body of a 2xx response.
  std::string call(const std::string& method, const std::string& path, const std::string& body = {},
                   const std::string& type = "application/json") {
    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
    httplib::Result res;
    if (method == "GET") {
      res = http_.Get(path, headers);
    } else if (method == "POST") {
      res = http_.Post(path, headers, body, type);
    } else {
      res = http_.Put(path, headers, body, type);
    }
    if (!res) throw ApiError("unavailable", "cannot reach " + config_.server_url + ": " + httplib::to_string(res.error()));
    if (res->status >= 200 && res->status < 300) return res->body;
    std::string code = "internal", message = "HTTP " + std::to_string(res->status);
    try {
      const auto j = Json::parse(res->body);
      code = j.at("error").at("code").get<std::string>();
      message = j.at("error").at("message").get<std::string>();
    } catch (const std::exception&) {
    }
    throw ApiError(code, message);
  }

  Json json(const std::string& method, const std::string& path, const Json& body = nullptr) {
    last_ = call(method, path, body.is_null() ? std::string() : body.dump());
    return Json::parse(last_);
  }

  const std::string& last_body() const { return last_; }

 private:
  CliConfig config_;
  httplib::Client http_;
  std::string last_;
};

std::string encode(const std::string& s) { return httplib::detail::encode_url(s); }

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  for (const auto& part : saturn::split(text, ',')) {
    const auto t = saturn::trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(t, &used));
      if (used != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": not a number: " + t);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& part : saturn::split(text, ',')) {
    auto t = saturn::trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::string text(const Json& j) {
  if (j.is_null()) return "-";
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(9) << j.get<double>();
    return os.str();
  }
  if (j.is_array()) {
    std::string s;
    for (const auto& x : j) s += (s.empty() ? "" : " ") + text(x);
    return s;
  }
  return j.dump();
}

/// Left-aligned columns sized to their widest cell.
void print_table(const std::vector<std::string>& header, const Json& rows, const std::vector<std::string>& keys) {
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    std::vector<std::string> line;
    for (const auto& k : keys) {
      // "a.b" reaches into nested objects.
      const Json* v = &r;
      for (const auto& part : saturn::split(k, '.')) {
        static const Json null_json;
        v = v->is_object() && v->contains(part) ? &v->at(part) : &null_json;
      }
      line.push_back(text(*v));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  for (const auto& line : cells) {
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
      out += line[i];
      if (i + 1 < line.size()) out += std::string(width[i] - line[i].size() + 2, ' ');
    }
    std::cout << out << "\n";
  }
}

void print_fields(const Json& obj, const std::vector<std::string>& keys) {
  std::size_t w = 0;
  for (const auto& k : keys) w = std::max(w, k.size());
  for (const auto& k : keys) {
    std::cout << k << ":" << std::string(w - k.size() + 1, ' ') << text(obj.contains(k) ? obj.at(k) : Json()) << "\n";
  }
}

std::string read_input_file(const std::string& path) {
  try {
    return saturn::read_file(path);
  } catch (const saturn::Error& e) {
    throw UsageError(e.what());
  }
}

class Commands {
 public:
  Commands(CLI::App& app) : app_(app) {
    app.require_subcommand(1);
    model();
    blob();
    emb();
    pipeline();
    monitor();
    feedback();
    serve();
    grant();
  }

  void set_config(CliConfig config) { config_ = std::move(config); }

 private:
  // Runs fn with a client; with --output json, prints the last body.
  void with_client(const std::function<void(Client&)>& table, bool json_echo = true) {
    Client client(config_);
    if (config_.output == "json" && json_echo) {
      capture_ = true;
      table(client);
      std::cout << client.last_body() << "\n";
      return;
    }
    capture_ = false;
    table(client);
  }

  bool table() const { return !capture_; }

  void model() {
    auto* cmd = app_.add_subcommand("model", "model registry")->require_subcommand(1);

    auto* reg = cmd->add_subcommand("register", "register a model");
    auto* name = &opts_["name"];
    auto* modality = &opts_["modality"];
    auto* owner = &opts_["owner"];
    reg->add_option("name", *name, "model name")->required();
    reg->add_option("--modality", *modality, "text|image|speech|tabular|timeseries|multimodal")->required();
    reg->add_option("--owner", *owner, "defaults to the caller");
    reg->callback([=, this] {
      with_client([&](Client& c) {
        Json body{{"name", *name}, {"modality", *modality}};
        if (!owner->empty()) body["owner"] = *owner;
        const auto m = c.json("POST", "/v1/models", body);
        if (table()) std::cout << m.at("model_id").get<std::string>() << "\n";
      });
    });

    cmd->add_subcommand("list", "list visible models")->callback([this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/models");
        if (table()) print_table({"MODEL_ID", "NAME", "MODALITY", "OWNER"}, r.at("models"),
                                 {"model_id", "name", "modality", "owner"});
      });
    });

    auto* versions = cmd->add_subcommand("versions", "list versions of a model");
    auto* vmodel = &opts_["vmodel"];
    versions->add_option("model_id", *vmodel)->required();
    versions->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/models/" + encode(*vmodel) + "/versions");
        if (table()) print_table({"VERSION_ID", "STAGE", "PARENT", "DIGEST"}, r.at("versions"),
                                 {"version_id", "stage", "parent_version", "artifact_digest"});
      });
    });

    auto* create = cmd->add_subcommand("create-version", "create a version from an uploaded blob");
    auto* cmodel = &opts_["cmodel"];
    auto* digest = &opts_["digest"];
    auto* parent = &opts_["parent"];
    auto* stage = &opts_["stage"];
    create->add_option("model_id", *cmodel)->required();
    create->add_option("--digest", *digest, "artifact digest")->required();
    create->add_option("--parent", *parent, "parent version");
    create->add_option("--stage", *stage, "S1 or S2");
    create->callback([=, this] {
      with_client([&](Client& c) {
        Json body{{"artifact_digest", *digest}};
        if (!parent->empty()) body["parent_version"] = *parent;
        if (!stage->empty()) body["stage"] = *stage;
        const auto v = c.json("POST", "/v1/models/" + encode(*cmodel) + "/versions", body);
        if (table()) std::cout << v.at("version_id").get<std::string>() << "\n";
      });
    });

    auto* promote = cmd->add_subcommand("promote", "move a version to another stage");
    auto* pversion = &opts_["pversion"];
    auto* to = &opts_["to"];
    auto* report = &opts_["report"];
    promote->add_option("version", *pversion)->required();
    promote->add_option("--to", *to, "target stage, e.g. S4")->required();
    promote->add_option("--report", *report, "validation report JSON file");
    promote->callback([=, this] {
      Json body{{"to", *to}};
      if (!report->empty()) {
        try {
          body["report"] = Json::parse(read_input_file(*report));
        } catch (const nlohmann::json::parse_error& e) {
          throw UsageError(std::string("report is not JSON: ") + e.what());
        }
      }
      with_client([&](Client& c) {
        const auto v = c.json("POST", "/v1/versions/" + encode(*pversion) + "/transition", body);
        if (table()) std::cout << v.at("stage").get<std::string>() << "\n";
      });
    });

    auto* lineage = cmd->add_subcommand("lineage", "ancestors of a version, root first");
    auto* lversion = &opts_["lversion"];
    lineage->add_option("version", *lversion)->required();
    lineage->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/versions/" + encode(*lversion) + "/lineage");
        if (table()) print_table({"VERSION_ID", "MODEL_ID", "STAGE", "PARENT"}, r.at("lineage"),
                                 {"version_id", "model_id", "stage", "parent_version"});
      });
    });
  }

  void blob() {
    auto* cmd = app_.add_subcommand("blob", "content-addressed artifacts")->require_subcommand(1);
    auto* put = cmd->add_subcommand("put", "upload a file");
    auto* file = &opts_["blob_file"];
    auto* type = &opts_["blob_type"];
    put->add_option("file", *file)->required()->check(CLI::ExistingFile);
    put->add_option("--media-type", *type, "defaults to application/octet-stream");
    put->callback([=, this] {
      const auto bytes = read_input_file(*file);
      with_client([&](Client& c) {
        const auto raw = c.call("PUT", "/v1/blobs", bytes, type->empty() ? "application/octet-stream" : *type);
        const auto b = Json::parse(raw);
        if (config_.output == "json") {
          std::cout << raw << "\n";
        } else {
          std::cout << b.at("digest").get<std::string>() << "\n";
        }
      }, false);
    });
    auto* get = cmd->add_subcommand("get", "download a blob");
    auto* digest = &opts_["blob_digest"];
    auto* out = &opts_["blob_out"];
    get->add_option("digest", *digest)->required();
    get->add_option("-o,--out", *out, "output file")->required();
    get->callback([=, this] {
      with_client([&](Client& c) {
        const auto bytes = c.call("GET", "/v1/blobs/" + encode(*digest));
        saturn::write_file(*out, bytes);
        std::cout << "wrote " << bytes.size() << " bytes to " << *out << "\n";
      }, false);
    });
  }

  void emb() {
    auto* cmd = app_.add_subcommand("emb", "embedding collections")->require_subcommand(1);

    auto* create = cmd->add_subcommand("create", "create a collection");
    auto* cname = &opts_["e_cname"];
    auto* dim = &ints_["e_dim"];
    auto* metric = &opts_["e_metric"];
    create->add_option("collection", *cname)->required();
    create->add_option("--dim", *dim)->required()->check(CLI::PositiveNumber);
    create->add_option("--metric", *metric, "cosine|euclidean|dot")->default_str("cosine");
    create->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/collections",
                              Json{{"name", *cname}, {"dim", *dim}, {"metric", metric->empty() ? "cosine" : *metric}});
        if (table()) std::cout << r.at("name").get<std::string>() << "\n";
      });
    });

    cmd->add_subcommand("list", "list collections")->callback([this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/collections");
        if (table()) print_table({"NAME", "DIM", "METRIC", "ENTRIES", "INDEX_FRESH"}, r.at("collections"),
                                 {"name", "dim", "metric", "entry_count", "index_fresh"});
      });
    });

    auto* put = cmd->add_subcommand("put", "store a vector under a key");
    auto* pcoll = &opts_["e_pcoll"];
    auto* pkey = &opts_["e_pkey"];
    auto* pvec = &opts_["e_pvec"];
    auto* ptags = &opts_["e_ptags"];
    put->add_option("collection", *pcoll)->required();
    put->add_option("key", *pkey)->required();
    put->add_option("--vector", *pvec, "comma-separated numbers")->required();
    put->add_option("--tags", *ptags, "comma-separated tags");
    put->callback([=, this] {
      const Json body{{"vector", parse_numbers(*pvec, "--vector")}, {"tags", parse_list(*ptags)}};
      with_client([&](Client& c) {
        const auto e = c.json("PUT", "/v1/collections/" + encode(*pcoll) + "/embeddings/" + encode(*pkey), body);
        if (table()) std::cout << e.at("key").get<std::string>() << "\n";
      });
    });

    auto* get = cmd->add_subcommand("get", "fetch a stored vector");
    auto* gcoll = &opts_["e_gcoll"];
    auto* gkey = &opts_["e_gkey"];
    get->add_option("collection", *gcoll)->required();
    get->add_option("key", *gkey)->required();
    get->callback([=, this] {
      with_client([&](Client& c) {
        const auto e = c.json("GET", "/v1/collections/" + encode(*gcoll) + "/embeddings/" + encode(*gkey));
        if (table()) print_fields(e, {"key", "vector", "tags", "updated_at"});
      });
    });

    auto* search = cmd->add_subcommand("search", "nearest neighbours");
    auto* scoll = &opts_["e_scoll"];
    auto* svec = &opts_["e_svec"];
    auto* k = &ints_["e_k"];
    auto* stags = &opts_["e_stags"];
    auto* mode = &opts_["e_mode"];
    *k = 10;
    search->add_option("collection", *scoll)->required();
    search->add_option("--vector", *svec, "comma-separated numbers")->required();
    search->add_option("-k", *k, "result count")->check(CLI::PositiveNumber)->capture_default_str();
    search->add_option("--tags", *stags, "only entries carrying every tag");
    search->add_option("--mode", *mode, "exact|ann")->check(CLI::IsMember({"exact", "ann"}));
    search->callback([=, this] {
      const Json body{{"vector", parse_numbers(*svec, "--vector")},
                      {"k", *k},
                      {"tags", parse_list(*stags)},
                      {"mode", mode->empty() ? "exact" : *mode}};
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/collections/" + encode(*scoll) + "/search", body);
        if (table()) print_table({"RANK", "KEY", "SCORE"}, r.at("results"), {"rank", "key", "score"});
      });
    });

    auto* index = cmd->add_subcommand("index", "build the approximate index");
    auto* icoll = &opts_["e_icoll"];
    index->add_option("collection", *icoll)->required();
    index->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/collections/" + encode(*icoll) + "/index", Json::object());
        if (table()) print_fields(r, {"name", "entry_count", "index_fresh"});
      });
    });

    auto* exp = cmd->add_subcommand("export", "write a collection file");
    auto* xcoll = &opts_["e_xcoll"];
    auto* xfile = &opts_["e_xfile"];
    exp->add_option("collection", *xcoll)->required();
    exp->add_option("file", *xfile)->required();
    exp->callback([=, this] {
      with_client([&](Client& c) {
        const auto bytes = c.call("GET", "/v1/collections/" + encode(*xcoll) + "/export");
        saturn::write_file(*xfile, bytes);
        std::cout << "wrote " << bytes.size() << " bytes to " << *xfile << "\n";
      }, false);
    });

    auto* imp = cmd->add_subcommand("import", "load a collection file");
    auto* mfile = &opts_["e_mfile"];
    auto* mname = &opts_["e_mname"];
    imp->add_option("file", *mfile)->required()->check(CLI::ExistingFile);
    imp->add_option("--name", *mname, "defaults to the file stem");
    imp->callback([=, this] {
      const auto bytes = read_input_file(*mfile);
      const auto name = mname->empty() ? fs::path(*mfile).stem().string() : *mname;
      with_client([&](Client& c) {
        const auto raw = c.call("POST", "/v1/collections/import?name=" + encode(name), bytes,
                                "application/octet-stream");
        if (config_.output == "json") {
          std::cout << raw << "\n";
        } else {
          print_fields(Json::parse(raw), {"name", "dim", "metric", "entry_count"});
        }
      }, false);
    });
  }

  void pipeline() {
    auto* cmd = app_.add_subcommand("pipeline", "training pipeline")->require_subcommand(1);

    auto* trig = cmd->add_subcommand("trigger", "submit a trigger");
    auto* kind = &opts_["p_kind"];
    auto* ref = &opts_["p_ref"];
    auto* spec = &opts_["p_spec"];
    auto* event = &opts_["p_event"];
    auto* id = &opts_["p_id"];
    trig->add_option("--kind", *kind)->required()->check(CLI::IsMember({"commit", "drift", "manual"}));
    trig->add_option("--ref", *ref, "commit hash (commit)");
    trig->add_option("--spec", *spec, "training spec file (commit, manual)");
    trig->add_option("--event", *event, "drift event id (drift)");
    trig->add_option("--id", *id, "explicit trigger id");
    trig->callback([=, this] {
      Json payload = Json::object();
      if (*kind == "commit" && ref->empty() && id->empty()) throw UsageError("commit triggers need --ref");
      if (*kind == "drift" && event->empty() && id->empty()) throw UsageError("drift triggers need --event");
      if (*kind != "drift" && spec->empty()) throw UsageError(*kind + " triggers need --spec");
      if (!ref->empty()) payload["ref"] = *ref;
      if (!event->empty()) payload["event_id"] = *event;
      // The server reads the spec, so hand it an absolute path.
      if (!spec->empty()) payload["spec"] = fs::absolute(*spec).lexically_normal().string();
      Json body{{"kind", *kind}, {"payload", payload}};
      if (!id->empty()) body["trigger_id"] = *id;
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/pipeline/triggers", body);
        if (!table()) return;
        std::cout << r.at("run_id").get<std::string>() << "\n";
        if (r.at("duplicate").get<bool>()) std::cerr << "notice: duplicate trigger; existing run returned\n";
      });
    });

    auto* runs = cmd->add_subcommand("runs", "list runs");
    auto* rkind = &opts_["p_rkind"];
    auto* rstatus = &opts_["p_rstatus"];
    runs->add_option("--kind", *rkind)->check(CLI::IsMember({"commit", "drift", "manual"}));
    runs->add_option("--status", *rstatus)->check(CLI::IsMember({"pending", "running", "succeeded", "failed"}));
    runs->callback([=, this] {
      std::string path = "/v1/pipeline/runs";
      std::string sep = "?";
      if (!rkind->empty()) path += sep + "kind=" + *rkind, sep = "&";
      if (!rstatus->empty()) path += sep + "status=" + *rstatus;
      with_client([&](Client& c) {
        const auto r = c.json("GET", path);
        if (table()) print_table({"RUN_ID", "KIND", "TRIGGER", "STATUS", "VERSION", "ENDPOINT"}, r.at("runs"),
                                 {"run_id", "trigger.kind", "trigger.trigger_id", "status", "produced_version",
                                  "endpoint_id"});
      });
    });

    auto* show = cmd->add_subcommand("show", "one run with its stages");
    auto* srun = &opts_["p_srun"];
    show->add_option("run_id", *srun)->required();
    show->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/pipeline/runs/" + encode(*srun));
        if (!table()) return;
        print_fields(r, {"run_id", "status", "produced_version", "endpoint_id", "rejected"});
        std::cout << "\n";
        print_table({"STAGE", "STATUS", "MESSAGE"}, r.at("stages"), {"name", "status", "message"});
      });
    });
  }

  void monitor() {
    auto* cmd = app_.add_subcommand("monitor", "drift monitoring")->require_subcommand(1);

    auto* freeze = cmd->add_subcommand("freeze", "freeze the reference from recent logs");
    auto* fep = &opts_["m_fep"];
    auto* force = &flags_["m_force"];
    freeze->add_option("endpoint", *fep)->required();
    freeze->add_flag("--force", *force, "replace an existing reference");
    freeze->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/monitor/" + encode(*fep) + "/freeze", Json{{"force", *force}});
        if (table()) print_fields(r, {"endpoint_id", "sample_count", "frozen_at"});
      });
    });

    auto* reports = cmd->add_subcommand("reports", "drift reports for an endpoint");
    auto* rep = &opts_["m_rep"];
    reports->add_option("endpoint", *rep)->required();
    reports->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/monitor/" + encode(*rep) + "/reports");
        if (!table()) return;
        Json rows = Json::array();
        for (const auto& x : r.at("reports")) {
          Json row = x;
          row["samples"] = x.at("window").at("count");
          rows.push_back(row);
        }
        print_table({"SEQ", "EVAL", "SAMPLES", "MAX_PSI", "VERDICT", "EVENT"}, rows,
                    {"seq", "evaluation", "samples", "max_psi", "verdict", "event_id"});
      });
    });

    cmd->add_subcommand("events", "drift events")->callback([this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/monitor/events");
        if (table()) print_table({"EVENT_ID", "ENDPOINT", "VERDICT", "MAX_PSI"}, r.at("events"),
                                 {"event_id", "endpoint_id", "verdict", "max_psi"});
      });
    });
  }

  void feedback() {
    auto* cmd = app_.add_subcommand("feedback", "preference feedback")->require_subcommand(1);

    auto* rank = cmd->add_subcommand("rank", "submit a ranking record (JSON file)");
    auto* rfile = &opts_["f_rfile"];
    rank->add_option("file", *rfile)->required()->check(CLI::ExistingFile);
    rank->callback([=, this] {
      Json body;
      try {
        body = Json::parse(read_input_file(*rfile));
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("ranking is not JSON: ") + e.what());
      }
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/feedback/rankings", body);
        if (table()) std::cout << r.at("record_id").get<std::string>() << "\n";
      });
    });

    auto* fit = cmd->add_subcommand("fit", "fit a reward model");
    auto* prefix = &opts_["f_prefix"];
    auto* l2 = &nums_["f_l2"];
    auto* lr = &nums_["f_lr"];
    auto* iters = &ints_["f_iters"];
    fit->add_option("--prefix", *prefix, "prompt id prefix");
    auto* l2_opt = fit->add_option("--l2", *l2, "L2 penalty");
    auto* lr_opt = fit->add_option("--learning-rate", *lr);
    auto* it_opt = fit->add_option("--max-iters", *iters)->check(CLI::PositiveNumber);
    fit->callback([=, this] {
      Json hp = Json::object();
      if (l2_opt->count()) hp["l2_lambda"] = *l2;
      if (lr_opt->count()) hp["learning_rate"] = *lr;
      if (it_opt->count()) hp["max_iters"] = *iters;
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/feedback/reward-models",
                              Json{{"prompt_prefix", *prefix}, {"hyperparameters", hp}});
        if (!table()) return;
        print_fields(r, {"reward_model_id", "blob_digest"});
        print_fields(r.at("model"), {"weights", "fit_loss", "iterations_used", "comparisons_count"});
      });
    });
  }

  void serve() {
    auto* cmd = app_.add_subcommand("serve", "serving endpoints")->require_subcommand(1);

    auto* create = cmd->add_subcommand("create", "bind a released version to a route");
    auto* cversion = &opts_["s_cversion"];
    auto* route = &opts_["s_route"];
    create->add_option("--version", *cversion)->required();
    create->add_option("--route", *route)->required();
    create->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/endpoints", Json{{"version_id", *cversion}, {"route", *route}});
        if (table()) print_fields(r, {"endpoint_id", "route", "bound_version", "status"});
      });
    });

    cmd->add_subcommand("list", "list endpoints")->callback([this] {
      with_client([&](Client& c) {
        const auto r = c.json("GET", "/v1/endpoints");
        if (table()) print_table({"ENDPOINT_ID", "ROUTE", "VERSION", "STATUS"}, r.at("endpoints"),
                                 {"endpoint_id", "route", "bound_version", "status"});
      });
    });

    auto* infer = cmd->add_subcommand("infer", "call an endpoint");
    auto* iroute = &opts_["s_iroute"];
    auto* tokens = &opts_["s_tokens"];
    auto* features = &opts_["s_features"];
    infer->add_option("route", *iroute)->required();
    auto* t_opt = infer->add_option("--tokens", *tokens, "whitespace-separated text");
    auto* f_opt = infer->add_option("--features", *features, "comma-separated numbers");
    t_opt->excludes(f_opt);
    infer->callback([=, this] {
      Json body = Json::object();
      if (t_opt->count()) {
        body["tokens"] = saturn::split_whitespace(*tokens);
      } else if (f_opt->count()) {
        body["features"] = parse_numbers(*features, "--features");
      } else {
        throw UsageError("infer needs --tokens or --features");
      }
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/infer/" + encode(*iroute), body);
        if (table()) print_fields(r, {"prediction", "model_version", "latency_ms"});
      });
    });

    auto* rebind = cmd->add_subcommand("rebind", "point an endpoint at another version");
    auto* rep = &opts_["s_rep"];
    auto* rversion = &opts_["s_rversion"];
    rebind->add_option("endpoint", *rep)->required();
    rebind->add_option("--version", *rversion)->required();
    rebind->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/endpoints/" + encode(*rep) + "/rebind", Json{{"version_id", *rversion}});
        if (table()) print_fields(r, {"endpoint_id", "bound_version", "status"});
      });
    });

    for (const char* action : {"pause", "resume", "retire"}) {
      auto* sub = cmd->add_subcommand(action, std::string(action) + " an endpoint");
      auto* ep = &opts_[std::string("s_") + action];
      sub->add_option("endpoint", *ep)->required();
      sub->callback([=, this] {
        with_client([&](Client& c) {
          const auto r = c.json("POST", "/v1/endpoints/" + encode(*ep) + "/" + action, Json::object());
          if (table()) print_fields(r, {"endpoint_id", "status"});
        });
      });
    }
  }

  void grant() {
    auto* cmd = app_.add_subcommand("grant", "give a principal a role on a resource");
    auto* who = &opts_["g_who"];
    auto* role = &opts_["g_role"];
    auto* resource = &opts_["g_resource"];
    cmd->add_option("principal", *who)->required();
    cmd->add_option("role", *role)->required()->check(CLI::IsMember({"reader", "writer", "admin"}));
    cmd->add_option("resource", *resource, "kind:id, kind:* or *")->required();
    cmd->callback([=, this] {
      with_client([&](Client& c) {
        const auto r = c.json("POST", "/v1/grants", Json{{"principal", *who}, {"role", *role}, {"resource", *resource}});
        if (table()) print_fields(r, {"principal", "role", "resource"});
      });
    });
  }

  CLI::App& app_;
  CliConfig config_;
  bool capture_ = false;
  // Option storage; std::map keeps addresses stable.
  std::map<std::string, std::string> opts_;
  std::map<std::string, long long> ints_;
  std::map<std::string, double> nums_;
  std::map<std::string, bool> flags_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Saturn command-line client"};
  std::string url, token, output, config_path;
  app.add_option("--url", url, "server URL (SATURN_URL)");
  app.add_option("--token", token, "bearer token (SATURN_TOKEN)");
  app.add_option("-o,--output", output, "table or json")->check(CLI::IsMember({"table", "json"}));
  app.add_option("--config", config_path, "config file (default ~/.config/saturn/config)");

  Commands commands(app);
  // Resolve the config before any subcommand callback runs.
  app.parse_complete_callback([&] { commands.set_config(resolve_config(url, token, output, config_path)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ApiError& e) {
    std::cerr << "error: " << e.code << ": " << e.what() << "\n";
    return kApiError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: internal: unexpected response: " << e.what() << "\n";
    return kApiError;
  } catch (const saturn::Error& e) {
    std::cerr << "error: " << saturn::to_string(e.code()) << ": " << e.what() << "\n";
    return kApiError;
  }
  return 0;
}
