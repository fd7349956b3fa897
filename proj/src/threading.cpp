#include "mriqc/threading.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mriqc {

namespace {

int default_threads() {
  if (const char* env = std::getenv("MRIQC_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return int(std::min<unsigned>(hw == 0 ? 1 : hw, 4));
}

int g_threads = default_threads();

// Lazily started pool. Workers pull task indices from a shared atomic
// counter; each index is processed exactly once, so outputs do not depend
// on which worker ran it.
class Pool {
public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(std::int64_t n, const std::function<void(std::int64_t)>& fn, int workers) {
    ensure_workers(workers - 1);
    {
      std::unique_lock lk(m_);
      fn_ = &fn;
      next_.store(0, std::memory_order_relaxed);
      total_ = n;
      pending_ = int(started_.size());
      ++generation_;
    }
    cv_.notify_all();
    work();  // main thread participates
    std::unique_lock lk(m_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    fn_ = nullptr;
  }

private:
  Pool() = default;

  void ensure_workers(int n) {
    std::unique_lock lk(m_);
    while (int(started_.size()) < n) {
      // capture the generation under the lock; reading it when the thread
      // starts would race with run() advancing it
      started_.emplace_back(
          [this, gen = generation_](std::stop_token st) { worker_loop(st, gen); });
    }
  }

  void worker_loop(std::stop_token st, std::uint64_t seen) {
    for (;;) {
      std::unique_lock lk(m_);
      cv_.wait(lk, st, [&] { return generation_ != seen; });
      if (st.stop_requested()) return;
      seen = generation_;
      lk.unlock();
      work();
      lk.lock();
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void work() {
    const auto* fn = fn_;
    if (!fn) return;
    for (;;) {
      std::int64_t i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      (*fn)(i);
    }
  }

  std::mutex m_;
  std::condition_variable_any cv_;
  std::condition_variable done_cv_;
  std::vector<std::jthread> started_;
  const std::function<void(std::int64_t)>* fn_ = nullptr;
  std::atomic<std::int64_t> next_{0};
  std::int64_t total_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = std::max(1, n); }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = std::min<std::int64_t>(g_threads, n);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  Pool::instance().run(n, fn, workers);
}

}  // namespace mriqc
