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

// JSON over HTTP in front of a Platform. Every route except /v1/health
// needs "Authorization: Bearer <token>"; errors come back as
// {"error": {"code": ..., "message": ...}} with the matching status.

#include <cstddef>
#include <memory>
#include <string>

#include "saturn/platform.hpp"

namespace saturn {

struct ApiOptions {
  std::size_t max_body_bytes = 256u << 20;
  std::size_t threads = 8;
};

class ApiServer {
 public:
  explicit ApiServer(Platform& platform, ApiOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  /// serve() on a background thread; returns once requests are accepted.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace saturn
