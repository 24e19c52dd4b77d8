#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace corral {

// Timestamps and intervals are integer microseconds. In embedded runs they
// count from a virtual epoch 0; in wire runs from the steady clock at start.
using Micros = std::int64_t;

constexpr Micros kMicrosPerSecond = 1'000'000;

inline Micros micros_from_seconds(double seconds) {
  return static_cast<Micros>(std::llround(seconds * 1e6));
}

inline double seconds_from_micros(Micros us) {
  return static_cast<double>(us) / 1e6;
}

// Wall-clock stopwatch for measuring real handling latency regardless of the
// experiment's virtual timeline.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}

  Micros elapsed_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline Micros steady_now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace corral
