#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace weakvar::numerics {

using Complex = std::complex<double>;

/// Uniform grid x_j = x_min + j*dx, j = 0..n-1, dx = (x_max - x_min)/n.
/// x_max itself is not a sample (periodic convention).
class Grid {
 public:
  Grid(double x_min, double x_max, std::size_t n);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t size() const noexcept { return n_; }
  double dx() const noexcept { return dx_; }
  double length() const noexcept { return x_max_ - x_min_; }
  double x(std::size_t j) const noexcept { return x_min_ + static_cast<double>(j) * dx_; }
  std::vector<double> points() const;
  /// Index of the sample closest to x, clamped to the grid.
  std::size_t nearest_index(double x) const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
  double dx_;
};

bool is_power_of_two(std::size_t n) noexcept;

template <class T>
struct Field {
  Grid grid;
  std::vector<T> values;

  explicit Field(const Grid& g) : grid(g), values(g.size()) {}
  Field(const Grid& g, std::vector<T> v);

  std::size_t size() const noexcept { return values.size(); }
  T& operator[](std::size_t j) { return values[j]; }
  const T& operator[](std::size_t j) const { return values[j]; }
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

extern template struct Field<double>;
extern template struct Field<Complex>;

enum class DiffMethod { spectral, fd4, fd8 };

/// Accuracy order of a finite-difference method (4 or 8).
int accuracy_order(DiffMethod method);

/// n-th derivative (order 1..4) sampled on the same grid.
/// Finite-difference methods use centered stencils with one-sided closures at the ends.
RealField derivative(const RealField& f, int order, DiffMethod method = DiffMethod::spectral);
ComplexField derivative(const ComplexField& f, int order, DiffMethod method = DiffMethod::spectral);

/// Finite-difference derivative of a contiguous run of samples; the stencil never leaves the run.
/// Runs shorter than the stencil use every available point.
void fd_derivative(std::span<const double> f, double dx, int order, int accuracy, std::span<double> out);
void fd_derivative(std::span<const Complex> f, double dx, int order, int accuracy, std::span<Complex> out);

/// Fornberg weights for the derivative of the given order at z from samples at nodes.
std::vector<double> fd_weights(double z, std::span<const double> nodes, int order);

/// Trapezoid rule on the periodic grid: dx * sum_j f_j.
double integrate(const RealField& f);
double integrate(std::span<const double> values, double dx);

struct UnwrappedPhase {
  RealField phase;
  /// Indices j where the raw jump between j-1 and j was exactly +-pi.
  std::vector<std::size_t> ambiguous;
};

/// Adds multiples of 2*pi so adjacent samples differ by less than pi; output equals input at anchor.
UnwrappedPhase unwrap_phase(const RealField& theta, std::size_t anchor);
/// Unwraps a run of samples in place around anchor (an index into the run); returns ambiguous run indices.
std::vector<std::size_t> unwrap_in_place(std::span<double> theta, std::size_t anchor);

/// Local 16-point Lagrange interpolation (clamped at the ends, wrapped when periodic).
Complex interpolate(const ComplexField& f, double x, bool periodic = false);
double interpolate(const RealField& f, double x, bool periodic = false);

/// Samples of f at x_j + dx/2 for every j, by local Lagrange interpolation.
/// Non-periodic fields are treated as zero outside the grid.
std::vector<Complex> half_cell_samples(const ComplexField& f, bool periodic);

/// Global band-limited (trigonometric) interpolant of a periodic sample set.
class BandLimited {
 public:
  explicit BandLimited(const ComplexField& f);
  Complex operator()(double x) const;
  Complex derivative(double x) const;

 private:
  Grid grid_;
  std::vector<Complex> coeffs_;
  std::vector<double> k_;
};

/// Angular wavenumbers in FFT order for n samples of spacing dx; Nyquist is -pi/dx.
std::vector<double> wavenumbers(std::size_t n, double dx);

struct MomentumDensity {
  Grid grid_p;
  /// |phi(p)|^2 with phi(p) = (2 pi hbar)^(-1/2) int psi(x) exp(-i p x/hbar) dx.
  std::vector<double> density;
};

/// Momentum density on the lattice dp = 2 pi hbar/(padding*L), ordered from -p_max upward.
MomentumDensity momentum_density(const ComplexField& psi, double hbar, std::size_t padding = 1);

struct MomentumMoments {
  double norm;
  double mean;
  double second;
  double variance() const noexcept { return second / norm - (mean / norm) * (mean / norm); }
};

/// Momentum moments computed spectrally, sum_k (hbar k)^m |psi_k|^2 (exact for band-limited psi).
MomentumMoments momentum_moments(const ComplexField& psi, double hbar);

}  // namespace weakvar::numerics
