#include "vpe/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace vpe {
namespace {

std::size_t g_num_threads = 0;

// A tiny persistent pool. Work items are (chunk_index, fn); the calling
// thread participates, so a pool of size N-1 serves N-way parallelism.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(std::size_t num_tasks, const std::function<void(std::size_t)>& task) {
    if (num_tasks == 0) return;
    const std::size_t workers = num_threads();
    if (num_tasks == 1 || workers <= 1) {
      for (std::size_t i = 0; i < num_tasks; ++i) task(i);
      return;
    }
    ensure_threads(workers - 1);
    std::unique_lock lock(mutex_);
    task_ = &task;
    next_.store(0, std::memory_order_relaxed);
    remaining_.store(num_tasks, std::memory_order_relaxed);
    total_ = num_tasks;
    ++generation_;
    lock.unlock();
    cv_.notify_all();

    work_loop();  // caller joins in

    std::unique_lock done_lock(mutex_);
    done_cv_.wait(done_lock, [&] { return remaining_.load(std::memory_order_acquire) == 0; });
    task_ = nullptr;
  }

 private:
  Pool() = default;

  void ensure_threads(std::size_t n) {
    std::lock_guard lock(spawn_mutex_);
    while (threads_.size() < n) {
      threads_.emplace_back([this] { worker(); });
      threads_.back().detach();
    }
  }

  void worker() {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return generation_ != seen; });
      seen = generation_;
      lock.unlock();
      work_loop();
    }
  }

  void work_loop() {
    const auto* task = task_;
    if (!task) return;
    for (;;) {
      const std::size_t i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= total_) break;
      (*task)(i);
      if (remaining_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard lock(mutex_);
        done_cv_.notify_all();
      }
    }
  }

  std::mutex mutex_;
  std::mutex spawn_mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::atomic<std::size_t> next_{0};
  std::atomic<std::size_t> remaining_{0};
  std::size_t total_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace

void set_num_threads(std::size_t n) { g_num_threads = n; }

std::size_t num_threads() {
  if (g_num_threads > 0) return g_num_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_chunks(std::size_t n, std::size_t num_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (num_chunks == 0) num_chunks = num_threads();
  if (num_chunks > n) num_chunks = n;
  const std::size_t base = n / num_chunks;
  const std::size_t rem = n % num_chunks;
  auto chunk_begin = [&](std::size_t c) {
    return c * base + (c < rem ? c : rem);
  };
  std::function<void(std::size_t)> task = [&](std::size_t c) {
    fn(c, chunk_begin(c), chunk_begin(c) + base + (c < rem ? 1 : 0));
  };
  Pool::instance().run(num_chunks, task);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_chunks(n, 0, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace vpe
