#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace shotvalue {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Independent substream seeds. Every consumer of randomness derives its own
// seed from the global one so that stages can be rerun in isolation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::string_view name) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * n) % n; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace shotvalue
