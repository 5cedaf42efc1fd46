#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskbound {

// Nodes and weights on [-1, 1], ascending nodes. Rules are cached per count.
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int n);

// Fixed-shape reduction tree; the result does not depend on how the buffer
// was filled, which keeps parallel evaluation bit-identical to serial.
double pairwise_sum(std::span<const double> v);

// splitmix64 stream; platform-independent, unlike <random> distributions.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next();
  double uniform01();  // (0, 1]
  double normal();     // Box-Muller, two uniforms per draw
};

std::uint64_t derive_subseed(std::uint64_t seed, std::uint64_t task_index);

// Runs body(0..n-1) on up to `workers` threads. Each index must write only
// its own output slot; exceptions are rethrown for the lowest failing index.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& body);

// Decimal rendering with a fixed count of significant digits, trailing zeros
// kept, so repeated runs emit identical bytes.
std::string format_sig(double v, int significant_digits);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace riskbound
