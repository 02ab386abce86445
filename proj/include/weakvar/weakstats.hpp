#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "weakvar/numerics.hpp"
#include "weakvar/states.hpp"
#include "weakvar/wigner.hpp"

namespace weakvar::weakstats {

using numerics::DiffMethod;
using numerics::RealField;
using states::LogDerivatives;
using states::PhysicalConstants;
using states::PolarFields;
using states::WavefunctionGrid;
using wigner::WignerGrid;

/// Weak value of momentum at each x. Masked samples are NaN.
struct WeakMomentumField {
  /// hbar dS/dx, the conditional mean momentum.
  RealField re;
  /// -(hbar/2) rho'/rho.
  RealField im;
  /// -hbar d/dx (R'/R), the exact derivative of im computed from psi.
  RealField im_derivative;
  /// -hbar R'/R computed from psi rather than rho.
  RealField im_from_amplitude;
  std::vector<bool> mask;
};

WeakMomentumField weak_momentum(const LogDerivatives& derivs, const PhysicalConstants& constants);
WeakMomentumField weak_momentum(const PolarFields& polar, const PhysicalConstants& constants);

/// re + eta * im.
RealField combine_with_eta(const WeakMomentumField& wm, double eta);

/// Route A: -(hbar^2/4) d^2 ln rho. Samples with rho below eps_node (default 1e-12 max rho) are NaN.
RealField weak_variance_logdensity(const RealField& rho, const PhysicalConstants& constants,
                                   std::optional<double> eps_node = std::nullopt, DiffMethod method = DiffMethod::fd8);
RealField weak_variance_logdensity(const LogDerivatives& derivs, const PhysicalConstants& constants);

/// Route B: central second moment of W(p|x); NaN where the position marginal is below eps_node.
RealField weak_variance_conditional(const WignerGrid& wg, double eps_node);

/// Route C: (1/2)[Re(weak p^2) - Re((weak p)^2)] = -(hbar^2/2) Re d^2 ln psi.
RealField weak_variance_weakvalues(const LogDerivatives& derivs, const PhysicalConstants& constants);
RealField weak_variance_weakvalues(const WavefunctionGrid& state, const PolarFields& polar,
                                   const PhysicalConstants& constants);

/// Q = -(hbar^2/2m) R''/R, with R''/R taken from derivatives of psi so kinks of |psi| at nodes do not enter.
RealField quantum_potential(const LogDerivatives& derivs, const PhysicalConstants& constants);
RealField quantum_potential(const PolarFields& polar, const PhysicalConstants& constants);

/// d(im)/dx - im^2/hbar - (2m/hbar) Q.
RealField riccati_residual(const WeakMomentumField& wm, const RealField& Q, const PhysicalConstants& constants);

struct VarianceBudget {
  double total = 0.0;
  double mean_weak = 0.0;
  double var_of_weak_value = 0.0;
  double residual = 0.0;
  /// (hbar^2/4) int rho'^2/rho dx with the same node handling as mean_weak.
  double fisher = 0.0;
};

/// Law of total variance. total from spectral momentum moments; mean_weak = int rho V dx integrated through
/// node neighbourhoods with the fitted node asymptote; var_of_weak_value = int rho (p~ - <p>)^2 dx.
VarianceBudget variance_budget(const WavefunctionGrid& state, const PolarFields& polar, const RealField& V,
                               const PhysicalConstants& constants);
VarianceBudget variance_budget(const WavefunctionGrid& state, const PolarFields& polar, const LogDerivatives& derivs,
                               const RealField& V, const PhysicalConstants& constants);

struct ThermoFields {
  /// k_B T = V/m.
  RealField kT;
  /// P = rho V / m.
  RealField P;
  std::vector<bool> negative_temperature;
};

ThermoFields thermo_fields(const RealField& rho, const RealField& V, const PhysicalConstants& constants);

enum class SignClass { positive, negative, zero_band, node_divergent, undefined };
std::string_view to_string(SignClass c);

/// Local node model R ~ A |x - x0|^k fitted on the nearest unmasked samples.
struct NodeFit {
  std::size_t run_begin;
  std::size_t run_end;
  double x0;
  double exponent;
  double amplitude;
  /// Coefficient c of the asymptote V ~ c/(x - x0)^2, i.e. k hbar^2/2.
  double asymptote_coefficient;
};

inline constexpr std::size_t kNodeFitPoints = 5;

std::vector<NodeFit> fit_nodes(const PolarFields& polar);

struct SignClassification {
  std::vector<SignClass> classes;
  std::vector<NodeFit> nodes;
  double tol_zero;
};

/// Roundoff level of V on a grid, in units of hbar^2/dx^2; the zero band never drops below it.
inline constexpr double kTolZeroRoundoff = 1e-13;
double tol_zero_floor(const numerics::Grid& grid, const PhysicalConstants& constants);

/// Zero band: max(1e-6 * max(max |V| off-mask, total momentum variance), floor).
double default_tol_zero(const RealField& V, double momentum_variance, double relative = 1e-6, double floor = 0.0);

SignClassification sign_classification(const PolarFields& polar, const RealField& V, double tol_zero);

struct PseudoStddevs {
  double sigma1;
  double sigma2;
  double abs_norm;
};

PseudoStddevs pseudo_stddevs(const WignerGrid& wg, double x, const WeakMomentumField& wm, double eps_node);

struct WeakFieldSet {
  WeakMomentumField weak_momentum;
  RealField V_logrho;
  RealField V_conditional;
  RealField V_weakvalues;
  RealField Q;
  RealField kT;
  RealField P;
  RealField riccati_residual;
  /// (hbar/2) d(im)/dx and im^2/2 + mQ, the two identity forms of V.
  RealField V_divergence;
  RealField V_identity;
  SignClassification signs;
  std::vector<bool> mask;
  bool has_conditional = false;
};

struct AnalysisOptions {
  bool with_wigner = true;
  std::optional<double> eps_node;
  DiffMethod method = DiffMethod::fd8;
  double tol_zero_relative = 1e-6;
};

struct Analysis {
  PolarFields polar;
  LogDerivatives derivs;
  std::optional<WignerGrid> wigner;
  WeakFieldSet fields;
  VarianceBudget budget;
  double momentum_variance = 0.0;
};

/// Full weak-statistics pipeline for one state.
Analysis analyze(const WavefunctionGrid& state, const AnalysisOptions& options = {});

}  // namespace weakvar::weakstats
