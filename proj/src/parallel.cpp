#include "parallel.hpp"

#include <cstdlib>
#include <string>

namespace sspace {

namespace {

unsigned env_thread_count() {
  if (const char* env = std::getenv("SSPACE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return 0;
}

const unsigned g_env_threads = env_thread_count();
std::atomic<unsigned> g_threads{0};

}  // namespace

void set_thread_count(unsigned count) { g_threads = count; }

unsigned thread_count() {
  const unsigned n = g_threads;
  if (n > 0) return n;
  if (g_env_threads > 0) return g_env_threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace sspace
