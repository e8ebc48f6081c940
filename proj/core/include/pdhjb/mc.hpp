/**
 * @file mc.hpp
 * @brief Counter-based random streams and deterministic Monte Carlo reductions.
 *
 * Every random quantity in the library is drawn from a keyed counter stream:
 * the same (master seed, module, purpose, index) tuple always yields the same
 * draw, independent of thread count or evaluation order. Reductions over
 * per-path arrays use pairwise summation so results do not depend on how work
 * was split across workers.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace pdhjb {

/// Thrown when an operation refuses to run (caps exceeded, wrong regime).
/// The CLI maps it to exit code 3.
class RefusalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit finalizer (murmur3 variant); bijective with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

/// Stream-key derivation: fold tags into a master seed one at a time.
/// Documented scheme: k ← mix64(k ^ (tag + φ64 + (k<<6) + (k>>2))).
class SeedSequence {
 public:
  explicit SeedSequence(std::uint64_t master) : key_(mix64(master ^ 0x5df1bcaf4d5c5d2bULL)) {}

  SeedSequence fold(std::uint64_t tag) const {
    SeedSequence s = *this;
    s.key_ = mix64(s.key_ ^ (tag + 0x9e3779b97f4a7c15ULL + (s.key_ << 6) + (s.key_ >> 2)));
    return s;
  }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Stream purposes, part of the documented key derivation.
namespace stream {
constexpr std::uint64_t kSimulateNoise = 1;
constexpr std::uint64_t kPathSampler = 2;
constexpr std::uint64_t kPropertySuite = 3;
constexpr std::uint64_t kLatticeSampler = 4;
}  // namespace stream

/// Counter-based generator: draw i is a pure function of (key, i).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * (counter + 1));
  }

  /// Uniform on (0,1]; never returns 0 so log() is always finite.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes counters 2i and 2i+1.
  double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t key_;
};

/// Pairwise (tree) summation; deterministic and accurate for long arrays.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.subspan(0, half)) + pairwise_sum(x.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  std::size_t n = 0;
};

inline MeanSe mean_se(std::span<const double> x) {
  MeanSe r;
  r.n = x.size();
  if (r.n == 0) return r;
  r.mean = pairwise_sum(x) / static_cast<double>(r.n);
  if (r.n == 1) return r;
  std::vector<double> dev2(r.n);
  for (std::size_t i = 0; i < r.n; ++i) {
    const double d = x[i] - r.mean;
    dev2[i] = d * d;
  }
  const double var = pairwise_sum(dev2) / static_cast<double>(r.n - 1);
  r.se = std::sqrt(var / static_cast<double>(r.n));
  return r;
}

/// Fixed-size chunks (independent of thread count) processed in parallel.
/// Chunks must not share mutable state; combine per-chunk results by index.
inline void parallel_chunks(std::size_t n, int threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                            std::size_t chunk_size = 4096) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      body(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
    return;
  }
  std::vector<std::thread> pool;
  const int n_workers = static_cast<int>(std::min<std::size_t>(threads, n_chunks));
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([=, &body]() {
      for (std::size_t c = w; c < n_chunks; c += n_workers)
        body(c * chunk_size, std::min(n, (c + 1) * chunk_size), c);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace pdhjb
