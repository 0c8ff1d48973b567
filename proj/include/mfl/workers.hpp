#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfl {

// Fixed-size fork/join pool. Work is split into one contiguous index chunk
// per worker, so a run's arithmetic never depends on the worker count as long
// as chunks only write to their own indices. Workers(1) runs inline.
class Workers {
 public:
  explicit Workers(unsigned count = 0);
  ~Workers();

  Workers(const Workers&) = delete;
  Workers& operator=(const Workers&) = delete;

  unsigned count() const { return static_cast<unsigned>(threads_.size()) + 1; }

  // fn(begin, end) over [0, n) split into count() contiguous chunks.
  // Not reentrant: do not call parallel_for from inside a chunk.
  void parallel_for(std::size_t n,
                    const std::function<void(std::size_t, std::size_t)>& fn);

  static unsigned resolve_count(int requested);  // env/flag/hardware policy

 private:
  void worker_loop(unsigned slot);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  const std::function<void(std::size_t, std::size_t)>* fn_ = nullptr;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
  std::size_t epoch_ = 0;
  unsigned pending_ = 0;
  bool stop_ = false;
};

}  // namespace mfl
