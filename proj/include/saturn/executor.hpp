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

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace saturn {

using Task = std::function<void()>;

/// Where deferred work (drift evaluation, pipeline runs) executes.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual void post(Task task) = 0;
  /// Blocks until every task posted so far has finished.
  virtual void drain() = 0;
};

/// Runs each task on the posting thread before post() returns. Used for
/// deterministic scenarios and tests.
class InlineExecutor final : public Executor {
 public:
  void post(Task task) override { task(); }
  void drain() override {}
};

/// Fixed pool of worker threads fed from a FIFO queue.
class ThreadExecutor final : public Executor {
 public:
  explicit ThreadExecutor(std::size_t workers = 1);
  ~ThreadExecutor() override;

  ThreadExecutor(const ThreadExecutor&) = delete;
  ThreadExecutor& operator=(const ThreadExecutor&) = delete;

  void post(Task task) override;
  void drain() override;

 private:
  void worker_loop();

  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<Task> queue_;
  std::size_t active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

}  // namespace saturn
