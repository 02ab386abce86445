#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "weakvar/errors.hpp"
#include "weakvar/io.hpp"
#include "weakvar/wigner.hpp"

namespace weakvar::wigner {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

void require_unmasked(const states::PolarFields& polar, std::size_t i) {
  if (polar.masked(i))
    throw NodeUndefinedError("x = " + io::format_double(polar.grid().x(i)) + " lies in a masked node neighbourhood");
}

struct FitResult {
  Eigen::VectorXd coeffs;
  double condition;
};

// Least squares y ~ sum_c coeff_c t^powers[c].
FitResult fit_powers(const Eigen::VectorXd& t, const Eigen::VectorXd& y, const std::vector<int>& powers) {
  Eigen::MatrixXd A(t.size(), static_cast<Eigen::Index>(powers.size()));
  for (Eigen::Index r = 0; r < t.size(); ++r)
    for (std::size_t c = 0; c < powers.size(); ++c) A(r, static_cast<Eigen::Index>(c)) = std::pow(t(r), powers[c]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  return {svd.solve(y), cond};
}

}  // namespace

std::vector<Complex> characteristic_function(const WavefunctionGrid& state, double x, std::span<const double> tau,
                                             std::optional<double> eps_node) {
  const auto& psi = state.psi();
  const Grid& g = state.grid();
  const double hbar = state.constants().hbar;
  double max_rho = 0.0;
  for (const auto& v : psi.values) max_rho = std::max(max_rho, std::norm(v));
  const double eps = eps_node.value_or(states::kDefaultRelativeEpsNode * max_rho);
  const bool periodic = state.periodic();
  const Complex centre = numerics::interpolate(psi, x, periodic);
  const double rho = std::norm(centre);
  if (!(rho >= eps) || rho <= 0.0)
    throw NodeUndefinedError("density at x = " + io::format_double(x) + " is below the node threshold");
  const double lo = g.x_min();
  const double hi = g.x(g.size() - 1);
  std::vector<Complex> out(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double a = 0.5 * hbar * tau[i];
    if (x - std::abs(a) < lo || x + std::abs(a) > hi)
      throw RangeError("tau = " + io::format_double(tau[i]) + " reaches outside the grid at x = " + io::format_double(x));
    if (tau[i] == 0.0) {
      out[i] = 1.0;
      continue;
    }
    out[i] = std::conj(numerics::interpolate(psi, x - a, periodic)) * numerics::interpolate(psi, x + a, periodic) / rho;
  }
  return out;
}

CumulantTable conditional_cumulants(const WavefunctionGrid& state, double x, int N, CumulantMethod method) {
  const auto polar = states::polar_decompose(state);
  const auto derivs = states::log_derivatives(polar);
  return conditional_cumulants(state, polar, derivs, x, N, method);
}

CumulantTable conditional_cumulants(const WavefunctionGrid& state, const states::PolarFields& polar,
                                    const states::LogDerivatives& derivs, double x, int N, CumulantMethod method) {
  const double hbar = state.constants().hbar;
  const std::size_t i = state.grid().nearest_index(x);
  require_unmasked(polar, i);
  CumulantTable table{state.grid().x(i), i, {}, method};

  if (method == CumulantMethod::formula) {
    if (N < 1 || N > 4) throw ConfigurationError("formula cumulants support N = 1..4");
    const double k1 = hbar * derivs.phase[0][i];
    const double k2 = -0.25 * hbar * hbar * derivs.log_rho[1][i];
    const double k3 = -0.25 * hbar * hbar * hbar * derivs.phase[2][i];
    const double k4 = hbar * hbar * hbar * hbar / 16.0 * derivs.log_rho[3][i];
    const double all[4] = {k1, k2, k3, k4};
    table.kappa.assign(all, all + N);
    return table;
  }

  if (N < 1 || N > 6) throw ConfigurationError("characteristic-function cumulants support N = 1..6");
  const auto mom = numerics::momentum_moments(state.psi(), hbar);
  const double sigma_p = std::sqrt(std::max(mom.variance(), 0.0));
  const Grid& g = state.grid();
  // Keep the probe offsets hbar*tau/2 inside the grid and below a quarter of its length.
  const double reach = std::min({table.x - g.x_min(), g.x(g.size() - 1) - table.x, 0.25 * g.length()});
  const double tau_cap = 2.0 * reach / hbar;
  double tau_max = sigma_p > 0.0 ? 0.1 / (2.0 * sigma_p) : tau_cap;
  tau_max = std::min(tau_max, tau_cap);
  if (!(tau_max > 0.0)) throw RangeError("no room for a tau window at x = " + io::format_double(table.x));
  table.tau_max = tau_max;

  constexpr auto np = static_cast<Eigen::Index>(kTauPoints);
  const Eigen::Index mid = np / 2;
  std::vector<double> tau(kTauPoints);
  Eigen::VectorXd t(np);
  for (Eigen::Index r = 0; r < np; ++r) {
    t(r) = static_cast<double>(r - mid) / static_cast<double>(mid);
    tau[static_cast<std::size_t>(r)] = tau_max * t(r);
  }
  const auto M = characteristic_function(state, table.x, tau, polar.eps_node);
  Eigen::VectorXd re(np);
  std::vector<double> arg(kTauPoints);
  for (Eigen::Index r = 0; r < np; ++r) {
    const auto& v = M[static_cast<std::size_t>(r)];
    re(r) = std::log(std::abs(v));
    arg[static_cast<std::size_t>(r)] = std::arg(v);
  }
  numerics::unwrap_in_place(arg, static_cast<std::size_t>(mid));
  Eigen::VectorXd im(np);
  for (Eigen::Index r = 0; r < np; ++r) im(r) = arg[static_cast<std::size_t>(r)];

  // Two extra orders absorb the truncation of the series inside the window.
  const int degree = N + 2;
  std::vector<int> even;
  std::vector<int> odd;
  for (int n = 1; n <= degree; ++n) (n % 2 == 0 ? even : odd).push_back(n);
  const auto fe = fit_powers(t, re, even);
  const auto fo = fit_powers(t, im, odd);
  table.condition_number = std::max(fe.condition, fo.condition);
  table.fit_degraded = table.condition_number > kFitConditionLimit;

  table.kappa.assign(static_cast<std::size_t>(N), 0.0);
  for (int n = 1; n <= N; ++n) {
    double coeff = 0.0;
    double sign = 1.0;
    if (n % 2 == 0) {
      coeff = fe.coeffs(static_cast<Eigen::Index>(n / 2 - 1));
      sign = (n / 2) % 2 == 0 ? 1.0 : -1.0;
    } else {
      coeff = fo.coeffs(static_cast<Eigen::Index>((n - 1) / 2));
      sign = ((n - 1) / 2) % 2 == 0 ? 1.0 : -1.0;
    }
    table.kappa[static_cast<std::size_t>(n - 1)] = sign * coeff * factorial(n) / std::pow(tau_max, n);
  }
  return table;
}

}  // namespace weakvar::wigner
