#pragma once

#include <string>
#include <vector>

#include "weakvar/states.hpp"
#include "weakvar/weakstats.hpp"

namespace weakvar::verify {

/// Tolerances of the invariant suite. Pointwise identities use |a - b| <= tol * max(1, |a|).
struct Tolerances {
  double route = 1e-4;
  double budget = 1e-6;
  double riccati = 1e-6;
  double identity = 1e-8;
  double marginal = 1e-6;
  double cumulant = 1e-4;

  /// Throws ConfigurationError unless every tolerance is positive.
  void validate() const;
};

struct CheckResult {
  std::string name;
  bool passed;
  double residual;
  double tolerance;
  /// Set when the check could not run (e.g. no Wigner grid); skipped checks count as passed.
  bool skipped = false;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

inline constexpr std::size_t kCumulantProbes = 10;

/// Runs route equivalence, budget closure, Fisher floor, Riccati, divergence and identity forms, marginal
/// consistency and the two cumulant methods at interior probe quantiles away from masked samples.
VerifyReport verify_state(const states::WavefunctionGrid& state, const weakstats::Analysis& analysis,
                          const Tolerances& tolerances = {});

}  // namespace weakvar::verify
