// Shared plumbing: error type, deterministic RNG, number formatting,
// small numeric helpers and a chunked thread pool used for ordered
// parallel reductions.
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

namespace rankiq {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Seeding. All randomized operations derive their streams from a user seed
// through splitmix64 so that independent stages never share a stream.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

// Deterministic RNG with fixed bit-to-double conversions. The standard
// distributions are implementation-defined, so the few we need are spelled
// out here to keep outputs stable across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_pos() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u = uniform_pos();
    const double v = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u)) *
                      std::cos(2.0 * kPi * v);
  }

  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Floyd's algorithm; result sorted ascending so downstream iteration order
  // does not depend on hash-set internals.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t total,
                                                        std::uint64_t count) {
    if (count >= total) {
      std::vector<std::uint64_t> all(total);
      for (std::uint64_t i = 0; i < total; ++i) all[i] = i;
      return all;
    }
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(count) * 2);
    for (std::uint64_t j = total - count; j < total; ++j) {
      const std::uint64_t t = below(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Decimal formatting. Reals are serialized as the shortest string that
// parses back to the identical double.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail("cannot parse real value '" + std::string(s) + "' in " + context);
  }
  return v;
}

inline long long parse_int(std::string_view s, const std::string& context) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail("cannot parse integer '" + std::string(s) + "' in " + context);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Small statistics helpers.

inline double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Chunked parallelism. Work is cut into fixed-size chunks whose boundaries
// do not depend on the thread count; callers combine per-chunk results in
// chunk order, so results are identical for any thread count.

inline int resolve_threads(int requested) {
  if (requested <= 1) return 1;
  const unsigned hw = std::thread::hardware_concurrency();
  return std::min<int>(requested, hw == 0 ? requested : static_cast<int>(hw) * 4);
}

template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads,
                     Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
  const int t = resolve_threads(threads);
  if (t <= 1 || num_chunks <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) {
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(t));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < t; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t c = next.fetch_add(1);
        if (c >= num_chunks) return;
        try {
          fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Element-wise loop where every index writes only its own output slot.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  parallel_chunks(n, 64, threads, [&](std::size_t, std::size_t lo,
                                      std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace rankiq
