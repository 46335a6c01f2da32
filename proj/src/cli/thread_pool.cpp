#include "chaoslab/cli/thread_pool.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace chaoslab::cli {

Executor thread_pool_executor(std::size_t workers) {
  workers = std::max<std::size_t>(workers, 1);
  if (workers == 1) return sequential_executor();
  return [workers](std::size_t n, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex m;
    auto loop = [&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!first) first = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
  };
}

}  // namespace chaoslab::cli
