#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weakvar/numerics.hpp"

namespace weakvar::states {

using numerics::Complex;
using numerics::ComplexField;
using numerics::DiffMethod;
using numerics::Grid;
using numerics::RealField;

struct PhysicalConstants {
  double hbar = 1.0;
  double mass = 1.0;
  void validate() const;
};

/// Normalized wavefunction samples on a uniform grid.
class WavefunctionGrid {
 public:
  /// Normalizes psi. kinks lists positions where psi is continuous but not smooth (walls, cusps);
  /// periodic marks states that do not decay (plane waves) and are treated as periodic on the grid.
  WavefunctionGrid(ComplexField psi, PhysicalConstants constants, std::vector<double> kinks = {}, bool periodic = false);

  const Grid& grid() const noexcept { return psi_.grid; }
  const ComplexField& psi() const noexcept { return psi_; }
  const PhysicalConstants& constants() const noexcept { return constants_; }
  const std::vector<double>& kinks() const noexcept { return kinks_; }
  bool periodic() const noexcept { return periodic_; }

  /// Largest |psi| among the first and last sample.
  double boundary_amplitude() const noexcept;

 private:
  ComplexField psi_;
  PhysicalConstants constants_;
  std::vector<double> kinks_;
  bool periodic_;
};

enum class ModelKind {
  plane_wave,
  gaussian_packet,
  coherent_state,
  qho_eigenstate,
  box_eigenstate,
  hydrogenic_radial,
  two_gaussian_superposition,
  exponential_segment,
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Model kind plus named real parameters.
///
/// plane_wave: k. gaussian_packet: mu, sigma (position std of rho), p0.
/// coherent_state: omega, x0, p0. qho_eigenstate: n, omega, x0.
/// box_eigenstate: n, L, x0. hydrogenic_radial: n, alpha.
/// two_gaussian_superposition: mu, separation, sigma, p0 (left component +p0, right -p0),
///   weight1, weight2, phase (relative phase of the right component).
/// exponential_segment: a (decay rate), x0.
struct ModelSpec {
  ModelKind kind = ModelKind::gaussian_packet;
  std::map<std::string, double> parameters;

  double get(const std::string& name, double fallback) const;
  /// Throws ConfigurationError naming the parameter when it is absent.
  double require(const std::string& name) const;
};

/// Sample, normalize and check boundary decay (|psi| < 1e-8 at both ends for decaying kinds).
WavefunctionGrid build(const ModelSpec& spec, const Grid& grid, const PhysicalConstants& constants);

enum class OracleQuantity { weak_variance, weak_value_re, weak_value_im, quantum_potential };

/// Closed-form value of a quantity for a model, +inf at analytic nodes of the weak variance.
double oracle(const ModelSpec& spec, OracleQuantity quantity, double x, const PhysicalConstants& constants);

/// Energy eigenvalue for qho, box and hydrogenic kinds.
double eigenenergy(const ModelSpec& spec, const PhysicalConstants& constants);

struct PhaseSegment {
  std::size_t begin;
  std::size_t end;
  /// Offset fixed by phase-slope continuity across the preceding gap; false when independent.
  bool reconciled;
};

/// Masked run [begin, end) strictly inside the grid, i.e. a node neighbourhood.
struct NodeRun {
  std::size_t begin;
  std::size_t end;
};

struct PolarFields {
  ComplexField psi;
  RealField amplitude;
  RealField density;
  RealField phase;
  /// rho < eps_node, or either sample of an adjacent pair across which psi changes sign.
  std::vector<bool> node_mask;
  /// Within finite-difference reach of a kink; values there are not smooth-derivative meaningful.
  std::vector<bool> singular_mask;
  std::vector<NodeRun> nodes;
  std::vector<PhaseSegment> segments;
  std::vector<std::size_t> ambiguous_phase;
  double eps_node = 0.0;
  PhysicalConstants constants;
  bool periodic = false;

  bool masked(std::size_t j) const { return node_mask[j] || singular_mask[j]; }
  std::size_t size() const noexcept { return psi.size(); }
  const Grid& grid() const noexcept { return psi.grid; }
};

/// Default node threshold: 1e-12 * max rho.
inline constexpr double kDefaultRelativeEpsNode = 1e-12;
/// Reach of the widest derivative stencil used for log-derivative fields.
inline constexpr std::size_t kStencilReach = 6;

PolarFields polar_decompose(const WavefunctionGrid& state, std::optional<double> eps_node = std::nullopt);

/// Log-derivatives of rho and psi shared by the weak-statistics routes. Masked samples are NaN.
struct LogDerivatives {
  Grid grid;
  std::vector<bool> mask;
  /// rho^(k) for k = 0..4 (unmasked, raw finite differences).
  std::array<std::vector<double>, 5> rho;
  /// d^k ln rho, k = 1..4, stored at index k-1.
  std::array<std::vector<double>, 4> log_rho;
  /// d^k ln psi, k = 1..4, stored at index k-1; Re = (1/2) d^k ln rho, Im = d^k S.
  std::array<std::vector<Complex>, 4> log_psi;
  /// d^k S, k = 1..3 from the unwrapped phase, differentiated within each phase segment.
  std::array<std::vector<double>, 3> phase;
};

LogDerivatives log_derivatives(const PolarFields& polar, DiffMethod method = DiffMethod::fd8);

/// Converts raw derivative ratios r_k = f^(k)/f into derivatives of ln f, k = 1..4.
template <class T>
std::array<T, 4> log_derivatives_from_ratios(const std::array<T, 4>& r) {
  const T r1 = r[0], r2 = r[1], r3 = r[2], r4 = r[3];
  return {r1, r2 - r1 * r1, r3 - T(3) * r1 * r2 + T(2) * r1 * r1 * r1,
          r4 - T(4) * r1 * r3 - T(3) * r2 * r2 + T(12) * r1 * r1 * r2 - T(6) * r1 * r1 * r1 * r1};
}

/// CSV with header x,re_psi,im_psi.
void export_csv(const WavefunctionGrid& state, std::ostream& out);

/// Reads x,re_psi,im_psi or x,rho,S; resamples onto a power-of-two grid when needed.
WavefunctionGrid ingest(std::istream& in, const PhysicalConstants& constants);
WavefunctionGrid ingest(const std::filesystem::path& path, const PhysicalConstants& constants);

}  // namespace weakvar::states
