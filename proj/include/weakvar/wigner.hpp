#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "weakvar/numerics.hpp"
#include "weakvar/states.hpp"

namespace weakvar::wigner {

using numerics::Complex;
using numerics::Grid;
using numerics::RealField;
using states::WavefunctionGrid;

/// W(x, p) on an n_x by n_p lattice, row-major in x.
struct WignerGrid {
  Grid grid_x;
  Grid grid_p;
  std::vector<double> W;
  /// Largest |Im| discarded from the transform.
  double imag_residue = 0.0;

  double operator()(std::size_t ix, std::size_t ip) const { return W[ix * grid_p.size() + ip]; }
  std::span<const double> row(std::size_t ix) const {
    return std::span<const double>(W).subspan(ix * grid_p.size(), grid_p.size());
  }
  double min() const;
};

/// Symmetric-kernel transform W(x,p) = (1/pi hbar) int psi*(x-s) psi(x+s) exp(-2ips/hbar) ds.
/// The s-lattice has spacing dx/2, so n_p = 2 n_x and p spans [-pi hbar/dx, pi hbar/dx).
WignerGrid wigner_transform(const WavefunctionGrid& state);

/// Integral over p at each x (the position density).
RealField marginal_x(const WignerGrid& wg);
/// Integral over x at each p (the momentum density on grid_p).
RealField marginal_p(const WignerGrid& wg);

struct ConditionalSlice {
  double x;
  std::size_t index;
  /// Position marginal used as the normalizer.
  double density;
  RealField values;
  bool normalized;
};

/// W(p | x) at the grid point nearest x, normalized by the Wigner position marginal.
ConditionalSlice conditional(const WignerGrid& wg, double x, double eps_node);

/// int p^n W(p|x) dp, or the central moment about the conditional mean.
double conditional_moment(const ConditionalSlice& slice, int order, bool central);

/// M(tau|x) = psi*(x - hbar tau/2) psi(x + hbar tau/2) / rho(x); off-grid samples by local interpolation.
std::vector<Complex> characteristic_function(const WavefunctionGrid& state, double x, std::span<const double> tau,
                                             std::optional<double> eps_node = std::nullopt);

enum class CumulantMethod { formula, characteristic_function };

struct CumulantTable {
  double x;
  std::size_t index;
  /// kappa[n-1] = n-th conditional cumulant of momentum.
  std::vector<double> kappa;
  CumulantMethod method;
  double tau_max = 0.0;
  double condition_number = 1.0;
  bool fit_degraded = false;
};

inline constexpr double kFitConditionLimit = 1e8;
inline constexpr std::size_t kTauPoints = 33;

/// Conditional cumulants at the grid point nearest x.
/// formula: closed expressions in derivatives of ln rho and S (N <= 4).
/// characteristic_function: least-squares fit of ln M on |tau| <= 0.05/sigma_p (N <= 6).
CumulantTable conditional_cumulants(const WavefunctionGrid& state, double x, int N, CumulantMethod method);
CumulantTable conditional_cumulants(const WavefunctionGrid& state, const states::PolarFields& polar,
                                    const states::LogDerivatives& derivs, double x, int N, CumulantMethod method);

/// CSV: '#' metadata lines, then x,p,w row-major, keeping every stride-th sample along each axis.
void export_csv(const WignerGrid& wg, std::ostream& out, std::size_t stride_x = 1, std::size_t stride_p = 1);

}  // namespace weakvar::wigner
