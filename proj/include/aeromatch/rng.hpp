#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace aeromatch {

/// Deterministic random source. Distribution math is hand-rolled on top of
/// the raw 64-bit stream so that results do not depend on the standard
/// library's distribution implementations.
///
/// Instances are single-owner: never share one across threads.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [a, b). A collapsed range (a == b) returns a exactly.
  double uniform(double a, double b) { return a + uniform() * (b - a); }

  /// Uniform integer in [0, n), n > 0.
  int uniform_int(int n) {
    const auto wide = static_cast<unsigned __int128>(next_u64()) *
                      static_cast<uint64_t>(n);
    return static_cast<int>(wide >> 64);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aeromatch
