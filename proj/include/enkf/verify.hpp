#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "enkf/experiments.hpp"

namespace enkf {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Fast invariant battery (sub-minute): transport exactness on sampled
// Gaussians, the filter consistency triangle at reduced resolution,
// weighted-TV metric axioms, mass normalization, PSD after jitter, rerun
// and thread-count determinism, joint-lift marginal consistency.
std::vector<CheckResult> run_quick_checks(std::uint64_t seed, bool parallel);

// The pre-registered acceptance battery, one result per criterion:
//   1 consistency-triangle    grid/particle/mean-field vs closed form
//   2 transport-exactness     conditioning realized as an exact transport
//   3 mc-rate                 RMS error slope in J at epsilon = 0
//   4 near-linear-error       d_g growth linear in epsilon, floor checked
//   5 gap-proxy-stability     d_g / max gap ratio stable across epsilon
//   6 invariant-suites        full-scale run_quick_checks battery
//   7 combined-bound-shape    monotone in J and epsilon on a product grid
std::vector<CheckResult> run_acceptance_criteria(std::uint64_t seed,
                                                 bool parallel);

bool all_pass(const std::vector<CheckResult>& results);

// One aligned pass/fail line per check.
void print_check_table(const std::vector<CheckResult>& results,
                       std::ostream& os);

}  // namespace enkf
