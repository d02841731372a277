#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flexhdr {

struct OpCheck {
  std::string op;        // which operation or stage
  std::string input;     // which input tensor was probed
  double max_rel_err = 0.0;
  std::int64_t worst_coord = -1;
  bool passed = false;
};

inline constexpr double kGradTol = 1e-4;
inline constexpr double kGradStep = 1e-5;

// Finite-difference verification of every differentiable op (all coordinates
// of small random instances) and of the end-to-end loss on a 4-frame 8x8
// scene (sampled parameter coordinates). All checks run in f64. `ops_filter`
// restricts the suite to the named ops; empty means everything.
std::vector<OpCheck> run_gradient_suite(const std::vector<std::string>& ops_filter, std::uint64_t seed);

// Names accepted by the filter.
std::vector<std::string> gradient_suite_ops();

}  // namespace flexhdr
