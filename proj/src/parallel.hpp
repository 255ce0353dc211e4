#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace sfb {

// Static round-robin parallel loop: worker w handles i = w, w+T, w+2T, ...
// Each index must write only to its own output slot; results are then
// combined in index order by the caller, so output never depends on T.
template <typename Fn>
void parallel_for(long n, int threads, Fn&& fn) {
  const int n_workers = int(std::max(1L, std::min(long(threads), n)));
  if (n_workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w)
    pool.emplace_back([&fn, w, n, n_workers] {
      for (long i = w; i < n; i += n_workers) fn(i);
    });
  for (auto& th : pool) th.join();
}

namespace parallel {

// Persistent lane pool for fine-grained, frequently repeated parallel regions
// (integrator inner loops call run() tens of times per step, where spawning
// threads each time would dominate the work). run(fn) executes fn(lane) on
// every lane, with the caller driving lane 0, and returns when all lanes are
// done. Single caller at a time; fn must not throw.
class WorkerPool {
 public:
  explicit WorkerPool(int lanes) : lanes_(std::max(1, lanes)) {
    for (int w = 1; w < lanes_; ++w)
      workers_.emplace_back([this, w] { worker_loop(w); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    wake_cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int lanes() const { return lanes_; }

  void run(const std::function<void(int)>& fn) {
    if (lanes_ == 1) {
      fn(0);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(m_);
      job_ = &fn;
      pending_ = lanes_ - 1;
      ++generation_;
    }
    wake_cv_.notify_all();
    fn(0);
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void worker_loop(int lane) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(m_);
        wake_cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      (*job)(lane);
      {
        std::lock_guard<std::mutex> lk(m_);
        --pending_;
        if (pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  int lanes_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable wake_cv_, done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace parallel
}  // namespace sfb
