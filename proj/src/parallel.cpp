#include "ir2vis/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace ir2vis {
namespace {

thread_local bool tls_inside_pool = false;

int resolve_worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("IR2VIS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = cap;
  }
  return hw;
}

// Fork-join pool. Each run() allocates its own Job carrying the chunk
// cursor, so a straggler from a finished job can never claim chunks of a
// newer one.
class Pool {
public:
  static Pool& instance() {
    static Pool pool(resolve_worker_count());
    return pool;
  }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  void run(int64_t begin, int64_t end,
           const std::function<void(int64_t, int64_t)>& fn) {
    std::lock_guard<std::mutex> run_lk(run_mutex_);
    auto job = std::make_shared<Job>();
    job->fn = &fn;
    job->begin = begin;
    job->chunk = (end - begin + size() - 1) / size();
    job->end = end;
    job->nchunks = size();
    job->remaining.store(job->nchunks, std::memory_order_relaxed);
    {
      std::lock_guard<std::mutex> lk(mutex_);
      job_ = job;
      ++generation_;
    }
    cv_.notify_all();
    work(*job);  // caller participates
    {
      std::unique_lock<std::mutex> lk(mutex_);
      done_cv_.wait(lk, [&] { return job->remaining.load() == 0; });
      job_ = nullptr;
    }
  }

private:
  struct Job {
    const std::function<void(int64_t, int64_t)>* fn = nullptr;
    int64_t begin = 0, end = 0, chunk = 0;
    int nchunks = 0;
    std::atomic<int> next{0};
    std::atomic<int> remaining{0};
  };

  explicit Pool(int workers) {
    for (int i = 1; i < workers; ++i)
      threads_.emplace_back([this] { worker_loop(); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void worker_loop() {
    tls_inside_pool = true;
    uint64_t seen = 0;
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      if (job) work(*job);
    }
  }

  void work(Job& job) {
    for (;;) {
      const int idx = job.next.fetch_add(1, std::memory_order_relaxed);
      if (idx >= job.nchunks) break;
      const int64_t lo = job.begin + idx * job.chunk;
      const int64_t hi = std::min(job.end, lo + job.chunk);
      if (lo < hi) (*job.fn)(lo, hi);
      if (job.remaining.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lk(mutex_);
        done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex run_mutex_;
  std::mutex mutex_;
  std::condition_variable cv_, done_cv_;
  uint64_t generation_ = 0;
  bool stop_ = false;
  std::shared_ptr<Job> job_;
};

}  // namespace

int worker_count() { return Pool::instance().size(); }

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t, int64_t)>& fn) {
  if (end <= begin) return;
  if (tls_inside_pool || end - begin < 2 || Pool::instance().size() == 1) {
    fn(begin, end);
    return;
  }
  Pool::instance().run(begin, end, fn);
}

}  // namespace ir2vis
