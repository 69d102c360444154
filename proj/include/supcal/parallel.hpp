#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace supcal {

inline int default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Static partition: index i always runs on slot i % workers, so results do not
// depend on scheduling.
template <typename F>
void parallel_for(int n, int workers, F&& f) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  auto body = [&](int w) {
    try {
      for (int i = w; i < n; i += workers) f(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (int w = 1; w < workers; ++w) threads.emplace_back(body, w);
  body(0);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace supcal
