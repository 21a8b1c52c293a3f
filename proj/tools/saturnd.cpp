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

// saturnd: serves the platform API until SIGINT or SIGTERM.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "saturn/config.hpp"
#include "saturn/error.hpp"
#include "saturn/http_api.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Saturn control plane daemon"};
  std::string config_path;
  std::string host;
  int port = -1;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("--host", host, "listen address (serve.host, default 127.0.0.1)");
  app.add_option("-p,--port", port, "listen port, 0 for any free port (serve.port, default 8080)")
      ->check(CLI::Range(0, 65535));
  app.add_option("--set", sets, "extra key=value, overrides the file");
  CLI11_PARSE(app, argc, argv);

  // Signals go to the waiter thread only.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    auto config = config_path.empty() ? saturn::Config() : saturn::Config::load(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw saturn::Error(saturn::ErrorCode::kInvalidInput, "--set needs key=value");
      config.set(saturn::trim(kv.substr(0, eq)), saturn::trim(kv.substr(eq + 1)));
    }
    if (host.empty()) host = config.get_or("serve.host", "127.0.0.1");
    if (port < 0) port = static_cast<int>(config.get_int("serve.port", 8080));

    auto platform = saturn::Platform::open(config);
    if (platform->resumed_runs() > 0) std::clog << "saturnd: resumed " << platform->resumed_runs() << " runs\n";
    saturn::ApiServer server(*platform);
    const int bound = server.bind(host, port);

    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    std::cout << "saturnd listening on " << host << ":" << bound << std::endl;
    server.serve();
    // serve() can also end without a signal; wake the waiter so it exits.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    platform->drain();
  } catch (const saturn::Error& e) {
    std::cerr << "saturnd: " << saturn::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "saturnd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
