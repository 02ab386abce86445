#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "weakvar/numerics.hpp"
#include "weakvar/states.hpp"
#include "weakvar/weakstats.hpp"

namespace weakvar::dynamics {

using numerics::Grid;
using numerics::RealField;
using states::PhysicalConstants;
using states::PolarFields;
using states::WavefunctionGrid;

RealField zero_potential(const Grid& grid);
/// (1/2) m omega^2 (x - x0)^2.
RealField harmonic_potential(const Grid& grid, double omega, double mass, double x0 = 0.0);
/// Rectangular barrier of the given height on |x - centre| < width/2.
RealField barrier_potential(const Grid& grid, double height, double width, double centre = 0.0);
/// CSV with header x,V, linearly interpolated onto the grid (zero outside the file's range).
RealField load_potential(const std::filesystem::path& path, const Grid& grid);

struct EvolutionConfig {
  RealField potential;
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t snapshot_every = 1;

  /// Throws ConfigurationError naming the violated bound.
  void validate(const WavefunctionGrid& state) const;
};

struct Snapshot {
  double t;
  WavefunctionGrid state;
};

inline constexpr double kNormDriftLimit = 1e-6;

/// Strang split-step Fourier propagation; snapshots at t = 0 and every snapshot_every steps.
std::vector<Snapshot> evolve(const WavefunctionGrid& state, const EvolutionConfig& config);

/// <H> with the kinetic term evaluated spectrally.
double energy(const WavefunctionGrid& state, const RealField& potential);

/// Position mean and variance of |psi|^2.
struct PositionMoments {
  double mean;
  double variance;
};
PositionMoments position_moments(const WavefunctionGrid& state);

struct TrajectorySample {
  double t;
  double x;
  double velocity;
};

struct Trajectory {
  double seed;
  std::vector<TrajectorySample> samples;
  bool truncated = false;
};

struct TrajectorySet {
  std::vector<double> seeds;
  std::vector<Trajectory> paths;
  /// True when two trajectories swapped order at some snapshot.
  bool crossed = false;
  /// Largest relative change of the probability between neighbouring trajectories.
  double max_mass_drift = 0.0;
};

/// Seeds at the (i + 1/2)/count quantiles of rho.
std::vector<double> quantile_seeds(const WavefunctionGrid& state, std::size_t count = 16);

/// RK4 integration of dx/dt = p~(x,t)/m with step equal to the snapshot spacing; the velocity is built from
/// psi and its spectral derivative, interpolated locally in x and cubically in t.
TrajectorySet hydrodynamic_trajectories(std::span<const Snapshot> snapshots, std::span<const double> seeds);

/// dQ/dx by 8th-order finite differences within each run of finite Q samples.
RealField quantum_force(const RealField& Q);

struct ClassicalTolerances {
  double relative_zero = 1e-6;
  double relative_force = 1e-6;
};

struct ClassicalLimitReport {
  /// J = E_x[V] = int rho V dx.
  double J;
  /// (hbar^2/4) int rho'^2/rho dx.
  double fisher;
  /// rho''/rho - (1/2)(rho'/rho)^2, NaN on the mask.
  RealField el_residual;
  RealField force;
  std::vector<bool> semiclassical_mask;
  double tol_zero;
  double tol_force;
};

/// tol_zero = relative_zero * max(max |V|, Var p), floored at weakstats::tol_zero_floor; tol_force = relative_force * max(max |dQ/dx|, sigma_p^3/(m hbar)).
ClassicalLimitReport classical_limit_report(const WavefunctionGrid& state, const PolarFields& polar,
                                            const states::LogDerivatives& derivs, const RealField& V,
                                            const RealField& Q, const PhysicalConstants& constants,
                                            const ClassicalTolerances& tolerances = {});

/// Same classification with explicit absolute tolerances.
std::vector<bool> semiclassical_mask(const PolarFields& polar, const RealField& V, const RealField& force,
                                     double tol_zero, double tol_force);

}  // namespace weakvar::dynamics
