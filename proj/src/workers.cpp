#include "mfl/workers.hpp"

#include <cstdlib>
#include <string>

#include "mfl/common.hpp"

namespace mfl {

Workers::Workers(unsigned count) {
  if (count == 0) count = resolve_count(0);
  if (count < 1) count = 1;
  ranges_.resize(count);
  threads_.reserve(count - 1);
  for (unsigned s = 1; s < count; ++s)
    threads_.emplace_back([this, s] { worker_loop(s); });
}

Workers::~Workers() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    stop_ = true;
  }
  cv_work_.notify_all();
  for (auto& t : threads_) t.join();
}

void Workers::parallel_for(
    std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const unsigned w = count();
  if (n == 0) return;
  if (w == 1 || n == 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + w - 1) / w;
  for (unsigned s = 0; s < w; ++s) {
    const std::size_t b = std::min<std::size_t>(n, s * chunk);
    const std::size_t e = std::min<std::size_t>(n, b + chunk);
    ranges_[s] = {b, e};
  }
  {
    std::lock_guard<std::mutex> lk(mu_);
    fn_ = &fn;
    pending_ = w - 1;
    ++epoch_;
  }
  cv_work_.notify_all();
  fn(ranges_[0].first, ranges_[0].second);
  std::unique_lock<std::mutex> lk(mu_);
  cv_done_.wait(lk, [this] { return pending_ == 0; });
  fn_ = nullptr;
}

void Workers::worker_loop(unsigned slot) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
    std::pair<std::size_t, std::size_t> range;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_work_.wait(lk, [&] { return stop_ || epoch_ != seen; });
      if (stop_) return;
      seen = epoch_;
      fn = fn_;
      range = ranges_[slot];
    }
    if (range.first < range.second) (*fn)(range.first, range.second);
    {
      std::lock_guard<std::mutex> lk(mu_);
      --pending_;
    }
    cv_done_.notify_one();
  }
}

unsigned Workers::resolve_count(int requested) {
  // Env var wins over the flag; 0 means "pick for me".
  if (const char* env = std::getenv("MEANFIELD_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v < 1 || v > 1024)
        throw ConfigError("MEANFIELD_LAB_THREADS out of range [1,1024]",
                          {{"value", env}});
      return static_cast<unsigned>(v);
    } catch (const std::invalid_argument&) {
      throw ConfigError("MEANFIELD_LAB_THREADS is not an integer",
                        {{"value", env}});
    } catch (const std::out_of_range&) {
      throw ConfigError("MEANFIELD_LAB_THREADS out of range [1,1024]",
                        {{"value", env}});
    }
  }
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace mfl
