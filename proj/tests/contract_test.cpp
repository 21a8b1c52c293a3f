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

// Replays fixtures/contract/*.json against a live server. Each file starts
// from an empty platform with a manual clock and inline executors, so ids
// and timestamps are reproducible.
//
// Step fields: as (principal), method, path, body | body_text | body_from,
// flip_byte, content_type; expect {status, body, body_text, body_equals}; capture
// {var: json-pointer}; capture_body (raw response kept under a name).
// Expected bodies match as subsets; "$any" matches any value, and
// "${var}" in strings is substituted before sending and matching.

#include <gtest/gtest.h>
#include <httplib.h>

#include <cmath>
#include <fstream>

#include "saturn/http_api.hpp"
#include "saturn/json_codec.hpp"
#include "scenario_fixtures.hpp"
#include "test_util.hpp"

namespace saturn {
namespace {

namespace fs = std::filesystem;

const fs::path kFixtureDir = SATURN_FIXTURE_DIR;

std::vector<fs::path> fixture_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kFixtureDir / "contract")) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string substitute(std::string s, const std::map<std::string, std::string>& vars) {
  for (std::size_t pos = s.find("${"); pos != std::string::npos; pos = s.find("${", pos)) {
    const auto end = s.find('}', pos);
    if (end == std::string::npos) break;
    const auto name = s.substr(pos + 2, end - pos - 2);
    auto it = vars.find(name);
    if (it == vars.end()) {
      pos = end;
      continue;
    }
    s.replace(pos, end - pos + 1, it->second);
    pos += it->second.size();
  }
  return s;
}

Json substitute(const Json& j, const std::map<std::string, std::string>& vars) {
  if (j.is_string()) return substitute(j.get<std::string>(), vars);
  if (j.is_object()) {
    Json out = Json::object();
    for (const auto& [k, v] : j.items()) out[k] = substitute(v, vars);
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const auto& v : j) out.push_back(substitute(v, vars));
    return out;
  }
  return j;
}

// Returns an empty string on a match, else where it went wrong.
std::string json_diff(const Json& expected, const Json& actual, const std::string& at) {
  if (expected.is_string() && expected.get<std::string>() == "$any") {
    return actual.is_null() ? at + ": expected a value" : "";
  }
  if (expected.is_object()) {
    if (!actual.is_object()) return at + ": expected an object, got " + actual.dump();
    for (const auto& [k, v] : expected.items()) {
      if (!actual.contains(k)) return at + "/" + k + ": missing";
      auto m = json_diff(v, actual.at(k), at + "/" + k);
      if (!m.empty()) return m;
    }
    return "";
  }
  if (expected.is_array()) {
    if (!actual.is_array() || actual.size() != expected.size()) {
      return at + ": expected " + expected.dump() + ", got " + actual.dump();
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      auto m = json_diff(expected[i], actual[i], at + "/" + std::to_string(i));
      if (!m.empty()) return m;
    }
    return "";
  }
  if (expected.is_number_float() || (expected.is_number() && actual.is_number_float())) {
    if (!actual.is_number()) return at + ": expected a number, got " + actual.dump();
    const double e = expected.get<double>(), a = actual.get<double>();
    return std::abs(e - a) <= 1e-9 * std::max(1.0, std::abs(e)) ? "" : at + ": " + expected.dump() + " != " + actual.dump();
  }
  return expected == actual ? "" : at + ": expected " + expected.dump() + ", got " + actual.dump();
}

class ContractTest : public ::testing::TestWithParam<fs::path> {};

TEST_P(ContractTest, Replays) {
  const auto fixture = Json::parse(read_file(GetParam()));
  testing::TempDir dir;
  const auto data = dir / "data";
  fs::create_directories(data);
  testing::write_text(dir / "tokens", "alice=tok-alice\nbob=tok-bob\nadmin=tok-admin\n");

  std::map<std::string, std::string> vars{{"DATA", data.string()}};
  if (fixture.contains("setup")) {
    const auto& setup = fixture.at("setup");
    if (setup.contains("scenario_seed")) testing::write_scenario_data(data, setup.at("scenario_seed").get<std::uint64_t>());
    if (setup.contains("files")) {
      for (const auto& [name, text] : setup.at("files").items()) {
        testing::write_text(data / name, substitute(text.get<std::string>(), vars));
      }
    }
  }

  auto config = Config::parse("governance.admins = admin\n");
  config.set("data.dir", (dir / "state").string());
  config.set("serve.tokens", (dir / "tokens").string());
  PlatformOverrides ov;
  ov.clock = std::make_shared<ManualClock>();
  ov.monitor_executor = std::make_shared<InlineExecutor>();
  ov.pipeline_executor = std::make_shared<InlineExecutor>();
  ov.index_executor = std::make_shared<InlineExecutor>();
  ov.webhook_executor = std::make_shared<InlineExecutor>();
  auto platform = Platform::open(config, ov);
  ApiServer server(*platform);
  const int port = server.bind("127.0.0.1", 0);
  server.start();

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60);
  const std::map<std::string, std::string> tokens{{"alice", "tok-alice"}, {"bob", "tok-bob"}, {"admin", "tok-admin"}};
  std::map<std::string, std::string> raw;

  std::size_t index = 0;
  for (const auto& step : fixture.at("steps")) {
    const auto label = GetParam().filename().string() + " step " + std::to_string(index++) + " (" +
                       step.value("name", std::string()) + ")";
    httplib::Headers headers;
    if (step.contains("as")) headers.emplace("Authorization", "Bearer " + tokens.at(step.at("as")));
    if (step.contains("authorization")) headers.emplace("Authorization", step.at("authorization").get<std::string>());

    std::string body;
    std::string type = step.value("content_type", std::string("application/json"));
    if (step.contains("body")) body = substitute(step.at("body"), vars).dump();
    if (step.contains("body_text")) body = substitute(step.at("body_text").get<std::string>(), vars);
    if (step.contains("body_from")) body = raw.at(step.at("body_from"));
    if (step.contains("flip_byte")) {
      const auto at = step.at("flip_byte").get<std::size_t>();
      ASSERT_LT(at, body.size()) << label;
      body[at] = static_cast<char>(body[at] ^ 0x01);
    }

    const auto method = step.at("method").get<std::string>();
    const auto path = substitute(step.at("path").get<std::string>(), vars);
    httplib::Result res;
    if (method == "GET") {
      res = client.Get(path, headers);
    } else if (method == "POST") {
      res = client.Post(path, headers, body, type);
    } else if (method == "PUT") {
      res = client.Put(path, headers, body, type);
    } else {
      FAIL() << label << ": unsupported method " << method;
    }
    ASSERT_TRUE(res) << label << ": " << httplib::to_string(res.error());

    const auto& expect = step.at("expect");
    EXPECT_EQ(res->status, expect.at("status").get<int>()) << label << "\n" << res->body;
    if (expect.contains("body")) {
      Json actual;
      try {
        actual = Json::parse(res->body);
      } catch (const std::exception&) {
        ADD_FAILURE() << label << ": body is not JSON: " << res->body;
        continue;
      }
      const auto m = json_diff(substitute(expect.at("body"), vars), actual, "");
      EXPECT_TRUE(m.empty()) << label << ": " << m << "\n" << res->body;
      if (step.contains("capture")) {
        for (const auto& [name, ptr] : step.at("capture").items()) {
          const auto v = actual.at(Json::json_pointer(ptr.get<std::string>()));
          vars[name] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
    }
    if (expect.contains("body_text")) EXPECT_EQ(res->body, substitute(expect.at("body_text").get<std::string>(), vars)) << label;
    if (expect.contains("body_equals")) {
      EXPECT_TRUE(res->body == raw.at(expect.at("body_equals"))) << label << ": bytes differ";
    }
    if (step.contains("capture_body")) raw[step.at("capture_body")] = res->body;
  }
  server.stop();
}

INSTANTIATE_TEST_SUITE_P(Fixtures, ContractTest, ::testing::ValuesIn(fixture_files()),
                         [](const ::testing::TestParamInfo<fs::path>& info) {
                           auto s = info.param.stem().string();
                           for (auto& c : s)
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           return s;
                         });

}  // namespace
}  // namespace saturn
