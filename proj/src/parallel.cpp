#include "bdff/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace bdff {

namespace {

int default_threads() {
  if (const char* env = std::getenv("BDFF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::atomic<int> g_threads{0};

}  // namespace

void set_num_threads(int n) { g_threads.store(n > 0 ? n : 0); }

int num_threads() {
  const int n = g_threads.load();
  return n > 0 ? n : default_threads();
}

}  // namespace bdff
