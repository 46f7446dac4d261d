// dsr/common.h

// Copyright 2026  The DSR Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DSR_COMMON_H_
#define DSR_COMMON_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract checks throw dsr::Error with a streamed message.
#define DSR_REQUIRE(cond, msg)              \
  do {                                      \
    if (!(cond)) {                          \
      std::ostringstream os__;              \
      os__ << msg;                          \
      throw ::dsr::Error(os__.str());       \
    }                                       \
  } while (0)

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_add(double a, double b, double c) {
  return log_add(log_add(a, b), c);
}

// Fixed rounding rule used for duration prediction: round-half-up.
inline long long round_half_up(double x) {
  return static_cast<long long>(std::floor(x + 0.5));
}

// Deterministic random source. All randomized operations in the toolkit take
// one of these explicitly; the sampling algorithms are spelled out here so a
// given seed produces the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return (next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    DSR_REQUIRE(hi >= lo, "uniform_int: empty range [" << lo << ", " << hi << "]");
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; the second draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  void fill_normal(double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = normal();
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>* v) {
    for (size_t i = v->size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap((*v)[i - 1], (*v)[j]);
    }
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// FNV-1a over bytes; used for content checksums and seed derivation.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// Derives an independent stream seed from a base seed and a string tag, so
// per-utterance randomness does not depend on processing order.
inline uint64_t derive_seed(uint64_t base, const std::string& tag) {
  uint64_t h = fnv1a64(&base, sizeof(base));
  h = fnv1a64(tag, h);
  // splitmix finalizer to spread low-entropy tags
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
uint64_t file_checksum(const std::string& path);

std::vector<std::string> split_string(const std::string& s, char sep);
std::string join_strings(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace dsr

#endif  // DSR_COMMON_H_
