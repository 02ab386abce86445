#include "weakvar/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weakvar/errors.hpp"
#include "weakvar/wigner.hpp"

namespace weakvar::verify {

namespace {

// Probes stay this many samples away from any masked sample.
constexpr std::size_t kProbeClearance = 16;

double scaled(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); }

// Largest scaled difference over samples where both fields are finite.
double field_residual(const numerics::RealField& ref, const numerics::RealField& other) {
  double worst = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j)
    if (std::isfinite(ref[j]) && std::isfinite(other[j])) worst = std::max(worst, scaled(ref[j], other[j]));
  return worst;
}

CheckResult check(std::string name, double residual, double tolerance) {
  return {std::move(name), std::isfinite(residual) && residual < tolerance, residual, tolerance};
}

std::vector<std::size_t> probe_indices(const states::PolarFields& polar) {
  const std::size_t n = polar.size();
  std::vector<bool> clear(n, true);
  for (std::size_t j = 0; j < n; ++j) {
    if (!polar.masked(j)) continue;
    const std::size_t lo = j >= kProbeClearance ? j - kProbeClearance : 0;
    const std::size_t hi = std::min(n - 1, j + kProbeClearance);
    for (std::size_t k = lo; k <= hi; ++k) clear[k] = false;
  }
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) cdf[j] = (acc += polar.density[j]);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < kCumulantProbes; ++i) {
    const double target = (static_cast<double>(i) + 0.5) / static_cast<double>(kCumulantProbes) * acc;
    const auto start = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    // Walk outward to the nearest clear sample.
    for (std::size_t d = 0; d < n; ++d) {
      if (start >= d && clear[start - d]) {
        out.push_back(start - d);
        break;
      }
      if (start + d < n && clear[start + d]) {
        out.push_back(start + d);
        break;
      }
    }
  }
  return out;
}

}  // namespace

void Tolerances::validate() const {
  for (double t : {route, budget, riccati, identity, marginal, cumulant})
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigurationError("tolerances must be positive and finite");
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyReport verify_state(const states::WavefunctionGrid& state, const weakstats::Analysis& a,
                          const Tolerances& tol) {
  tol.validate();
  VerifyReport r;
  const auto& f = a.fields;

  if (f.has_conditional) {
    r.checks.push_back(check("route_equivalence_A_B", field_residual(f.V_logrho, f.V_conditional), tol.route));
  } else {
    r.checks.push_back({"route_equivalence_A_B", true, 0.0, tol.route, true});
  }
  r.checks.push_back(check("route_equivalence_A_C", field_residual(f.V_logrho, f.V_weakvalues), tol.route));
  r.checks.push_back(check("budget_closure", std::abs(a.budget.residual), tol.budget));
  r.checks.push_back(check("fisher_floor",
                           std::max(std::abs(a.budget.fisher - a.budget.mean_weak), -a.budget.mean_weak), tol.budget));

  double riccati = 0.0;
  for (std::size_t j = 0; j < f.riccati_residual.size(); ++j) {
    const double v = f.riccati_residual[j];
    if (!std::isfinite(v)) continue;
    const double im = f.weak_momentum.im[j];
    riccati = std::max(riccati, std::abs(v) / std::max(1.0, im * im / state.constants().hbar));
  }
  r.checks.push_back(check("riccati_residual", riccati, tol.riccati));
  r.checks.push_back(check("divergence_identity", field_residual(f.V_logrho, f.V_divergence), tol.identity));
  r.checks.push_back(check("quantum_potential_identity", field_residual(f.V_logrho, f.V_identity), tol.identity));

  if (a.wigner) {
    const auto mx = wigner::marginal_x(*a.wigner);
    double max_rho = 0.0, diff = 0.0;
    for (std::size_t j = 0; j < mx.size(); ++j) {
      max_rho = std::max(max_rho, a.polar.density[j]);
      diff = std::max(diff, std::abs(mx[j] - a.polar.density[j]));
    }
    const double norm_p = numerics::integrate(wigner::marginal_p(*a.wigner));
    r.checks.push_back(check("marginal_consistency", std::max(diff / max_rho, std::abs(norm_p - 1.0)), tol.marginal));
  } else {
    r.checks.push_back({"marginal_consistency", true, 0.0, tol.marginal, true});
  }

  double cumulant = 0.0;
  const auto probes = probe_indices(a.polar);
  for (std::size_t j : probes) {
    const double x = state.grid().x(j);
    try {
      const auto kf = wigner::conditional_cumulants(state, a.polar, a.derivs, x, 4, wigner::CumulantMethod::formula);
      const auto kc =
          wigner::conditional_cumulants(state, a.polar, a.derivs, x, 4, wigner::CumulantMethod::characteristic_function);
      for (std::size_t n = 0; n < 4; ++n) cumulant = std::max(cumulant, scaled(kf.kappa[n], kc.kappa[n]));
    } catch (const RangeError&) {
      cumulant = std::numeric_limits<double>::infinity();
    }
  }
  if (probes.empty())
    r.checks.push_back({"cumulant_cross_method", true, 0.0, tol.cumulant, true});
  else
    r.checks.push_back(check("cumulant_cross_method", cumulant, tol.cumulant));
  return r;
}

}  // namespace weakvar::verify
