#include "sipo/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace sipo {

namespace {
std::atomic<int> g_override{0};

int default_threads() {
  if (const char* env = std::getenv("SIPO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

int thread_count() {
  const int o = g_override.load();
  if (o > 0) return o;
  static const int n = default_threads();
  return n;
}

void set_thread_count(int n) { g_override.store(std::max(0, n)); }

void parallel_chunks(Index n, Index chunks, const std::function<void(Index, Index, Index)>& body) {
  if (n <= 0) return;
  chunks = std::clamp<Index>(chunks, 1, n);
  auto bounds = [&](Index c) { return std::pair<Index, Index>{c * n / chunks, (c + 1) * n / chunks}; };
  const int workers = std::min<int>(thread_count(), static_cast<int>(chunks));
  if (workers <= 1) {
    for (Index c = 0; c < chunks; ++c) {
      auto [b, e] = bounds(c);
      body(c, b, e);
    }
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index c = next++; c < chunks; c = next++) {
        auto [b, e] = bounds(c);
        body(c, b, e);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace sipo
