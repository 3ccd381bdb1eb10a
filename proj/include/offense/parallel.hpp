/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <istream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace offense {

// Runs fn(i) for every i in [0, n) on up to `workers` threads. Work items are
// claimed dynamically; callers write results by index so output never depends
// on scheduling. The first exception thrown by any item is rethrown.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(workers, n);
  std::vector<std::jthread> threads;
  threads.reserve(count - 1);
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(body);
  body();
  threads.clear();
  if (failure) std::rethrow_exception(failure);
}

// Reads `in` line by line in blocks of workers * lines_per_shard, processes
// each block's shards in parallel and hands results to `sink` in input order.
// process(const std::vector<std::string>& lines, std::size_t first_line_no) -> Result
template <typename Result, typename Process, typename Sink>
void process_line_shards(std::istream& in, unsigned workers, std::size_t lines_per_shard, Process&& process,
                         Sink&& sink) {
  workers = std::max(1u, workers);
  std::size_t line_no = 0;
  std::vector<std::vector<std::string>> shards(workers);
  std::vector<std::size_t> starts(workers);
  std::vector<Result> results(workers);
  std::string line;
  bool more = true;
  while (more) {
    std::size_t filled = 0;
    for (unsigned w = 0; w < workers && more; ++w) {
      shards[w].clear();
      starts[w] = line_no + 1;
      while (shards[w].size() < lines_per_shard) {
        if (!std::getline(in, line)) {
          more = false;
          break;
        }
        ++line_no;
        shards[w].push_back(std::move(line));
      }
      if (!shards[w].empty()) filled = w + 1;
    }
    if (filled == 0) break;
    parallel_for(filled, workers, [&](std::size_t w) { results[w] = process(shards[w], starts[w]); });
    for (std::size_t w = 0; w < filled; ++w) sink(std::move(results[w]));
  }
}

}  // namespace offense
