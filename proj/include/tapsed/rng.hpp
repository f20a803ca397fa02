// Copyright 2026 The tapsed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace tapsed {

// Counter-based RNG. Every draw is a pure function of (seed, stream name,
// counter), so results do not depend on call order across streams or on
// worker count.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t seed, std::string_view name, uint64_t step = 0)
      : key_(splitmix64(splitmix64(seed ^ fnv1a64(name)) + step)) {}

  uint64_t bits(uint64_t counter) const { return splitmix64(key_ + counter); }

  // Uniform in [0, 1).
  double uniform(uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Integer in [0, n).
  uint64_t below(uint64_t counter, uint64_t n) const {
    return n == 0 ? 0 : bits(counter) % n;
  }

  bool coin(uint64_t counter, double p_true) const {
    return uniform(counter) < p_true;
  }

 private:
  uint64_t key_ = 0;
};

// Stateful convenience wrapper over a stream: draws advance an internal
// counter. Useful where a sequence of dependent draws is natural (synthesis,
// augmentation) and the stream identity already pins determinism.
class SeqRng {
 public:
  SeqRng() = default;
  SeqRng(uint64_t seed, std::string_view name, uint64_t step = 0)
      : stream_(seed, name, step) {}

  double uniform() { return stream_.uniform(counter_++); }
  double uniform(double lo, double hi) { return stream_.uniform(counter_++, lo, hi); }
  uint64_t below(uint64_t n) { return stream_.below(counter_++, n); }
  bool coin(double p_true) { return stream_.coin(counter_++, p_true); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    // Box-Muller; resample u1 away from zero.
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  // Beta(a, a) via Johnk's method; exact for the small shape parameters used
  // by mixup.
  double beta_symmetric(double a) {
    for (int tries = 0; tries < 1000; ++tries) {
      double x = std::pow(uniform(), 1.0 / a);
      double y = std::pow(uniform(), 1.0 / a);
      if (x + y <= 1.0 && x + y > 0.0) return x / (x + y);
    }
    return 0.5;
  }

 private:
  RngStream stream_;
  uint64_t counter_ = 0;
};

}  // namespace tapsed
