#include "weakvar/states.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "weakvar/errors.hpp"
#include "weakvar/io.hpp"
#include "weakvar/special.hpp"

namespace weakvar::states {

namespace {

constexpr double kBoundaryDecay = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int integer_parameter(const ModelSpec& spec, const std::string& name, int minimum) {
  const double v = spec.require(name);
  if (std::abs(v - std::round(v)) > 1e-12 || v < minimum)
    throw ConfigurationError("parameter " + name + " must be an integer >= " + std::to_string(minimum));
  return static_cast<int>(std::lround(v));
}

double positive_parameter(const ModelSpec& spec, const std::string& name, std::optional<double> fallback = {}) {
  const double v = fallback ? spec.get(name, *fallback) : spec.require(name);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigurationError("parameter " + name + " must be positive and finite");
  return v;
}

double finite_parameter(const ModelSpec& spec, const std::string& name, double fallback) {
  const double v = spec.get(name, fallback);
  if (!std::isfinite(v)) throw ConfigurationError("parameter " + name + " must be finite");
  return v;
}

Complex gaussian(double x, double centre, double sigma, double p0, double hbar) {
  const double u = x - centre;
  return std::exp(Complex(-u * u / (4.0 * sigma * sigma), p0 * x / hbar));
}

// Hydrogenic half-line profile parameters.
struct Hydrogenic {
  int n;
  double a0;
  double scale;  // dy/dx
};

Hydrogenic hydrogenic_params(const ModelSpec& spec, const PhysicalConstants& c) {
  const int n = integer_parameter(spec, "n", 1);
  const double alpha = positive_parameter(spec, "alpha", 1.0);
  const double a0 = c.hbar * c.hbar / (c.mass * alpha);
  return {n, a0, 2.0 / (n * a0)};
}

}  // namespace

void PhysicalConstants::validate() const {
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ConfigurationError("hbar must be positive");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigurationError("mass must be positive");
}

WavefunctionGrid::WavefunctionGrid(ComplexField psi, PhysicalConstants constants, std::vector<double> kinks, bool periodic)
    : psi_(std::move(psi)), constants_(constants), kinks_(std::move(kinks)), periodic_(periodic) {
  constants_.validate();
  double norm = 0.0;
  for (const auto& v : psi_.values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw ConfigurationError("wavefunction has non-finite samples");
    norm += std::norm(v);
  }
  norm *= psi_.grid.dx();
  if (!(norm > 0.0)) throw DegenerateStateError("wavefunction has zero norm");
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& v : psi_.values) v *= scale;
}

double WavefunctionGrid::boundary_amplitude() const noexcept {
  return std::max(std::abs(psi_.values.front()), std::abs(psi_.values.back()));
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::plane_wave: return "plane_wave";
    case ModelKind::gaussian_packet: return "gaussian_packet";
    case ModelKind::coherent_state: return "coherent_state";
    case ModelKind::qho_eigenstate: return "qho_eigenstate";
    case ModelKind::box_eigenstate: return "box_eigenstate";
    case ModelKind::hydrogenic_radial: return "hydrogenic_radial";
    case ModelKind::two_gaussian_superposition: return "two_gaussian_superposition";
    case ModelKind::exponential_segment: return "exponential_segment";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::plane_wave, ModelKind::gaussian_packet, ModelKind::coherent_state,
                    ModelKind::qho_eigenstate, ModelKind::box_eigenstate, ModelKind::hydrogenic_radial,
                    ModelKind::two_gaussian_superposition, ModelKind::exponential_segment}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigurationError("unknown model kind '" + std::string(name) + "'");
}

double ModelSpec::get(const std::string& name, double fallback) const {
  const auto it = parameters.find(name);
  return it == parameters.end() ? fallback : it->second;
}

double ModelSpec::require(const std::string& name) const {
  const auto it = parameters.find(name);
  if (it == parameters.end())
    throw ConfigurationError("model " + std::string(to_string(kind)) + " requires parameter '" + name + "'");
  return it->second;
}

WavefunctionGrid build(const ModelSpec& spec, const Grid& grid, const PhysicalConstants& constants) {
  constants.validate();
  const double hbar = constants.hbar;
  const double m = constants.mass;
  ComplexField psi(grid);
  std::vector<double> kinks;
  bool periodic = false;

  switch (spec.kind) {
    case ModelKind::plane_wave: {
      const double k = finite_parameter(spec, "k", spec.require("k"));
      const double cycles = k * grid.length() / (2.0 * std::numbers::pi);
      if (std::abs(cycles - std::round(cycles)) > 1e-9)
        throw ConfigurationError("plane_wave k must fit an integer number of periods into the grid length");
      for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = std::polar(1.0, k * grid.x(j));
      periodic = true;
      break;
    }
    case ModelKind::gaussian_packet: {
      const double mu = finite_parameter(spec, "mu", 0.0);
      const double sigma = positive_parameter(spec, "sigma");
      const double p0 = finite_parameter(spec, "p0", 0.0);
      for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = gaussian(grid.x(j), mu, sigma, p0, hbar);
      break;
    }
    case ModelKind::coherent_state: {
      const double omega = positive_parameter(spec, "omega");
      const double x0 = finite_parameter(spec, "x0", 0.0);
      const double p0 = finite_parameter(spec, "p0", 0.0);
      const double sigma = std::sqrt(hbar / (2.0 * m * omega));
      for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = gaussian(grid.x(j), x0, sigma, p0, hbar);
      break;
    }
    case ModelKind::qho_eigenstate: {
      const int n = integer_parameter(spec, "n", 0);
      const double omega = positive_parameter(spec, "omega", 1.0);
      const double x0 = finite_parameter(spec, "x0", 0.0);
      const double s = std::sqrt(m * omega / hbar);
      for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = special::hermite_function(n, s * (grid.x(j) - x0));
      break;
    }
    case ModelKind::box_eigenstate: {
      const int n = integer_parameter(spec, "n", 1);
      const double L = positive_parameter(spec, "L");
      const double x0 = finite_parameter(spec, "x0", 0.0);
      if (!(grid.x_min() < x0) || !(x0 + L < grid.x(grid.size() - 1)))
        throw DomainTooSmallError("grid must strictly contain the box [x0, x0+L]");
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double u = grid.x(j) - x0;
        psi[j] = (u > 0.0 && u < L) ? std::sin(n * std::numbers::pi * u / L) : 0.0;
      }
      kinks = {x0, x0 + L};
      break;
    }
    case ModelKind::hydrogenic_radial: {
      const auto h = hydrogenic_params(spec, constants);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid.x(j);
        if (x <= 0.0) continue;
        const double y = h.scale * x;
        psi[j] = y * std::exp(-0.5 * y) * special::laguerre(h.n - 1, 1.0, y);
      }
      kinks = {0.0};
      break;
    }
    case ModelKind::two_gaussian_superposition: {
      const double mu = finite_parameter(spec, "mu", 0.0);
      const double d = positive_parameter(spec, "separation");
      const double sigma = positive_parameter(spec, "sigma");
      const double p0 = finite_parameter(spec, "p0", 0.0);
      const double w1 = finite_parameter(spec, "weight1", 1.0);
      const double w2 = finite_parameter(spec, "weight2", 1.0);
      const double phase = finite_parameter(spec, "phase", 0.0);
      if (w1 < 0.0 || w2 < 0.0 || (w1 == 0.0 && w2 == 0.0))
        throw ConfigurationError("superposition weights must be nonnegative and not both zero");
      const Complex rel = std::polar(w2, phase);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid.x(j);
        psi[j] = w1 * gaussian(x, mu - 0.5 * d, sigma, p0, hbar) + rel * gaussian(x, mu + 0.5 * d, sigma, -p0, hbar);
      }
      break;
    }
    case ModelKind::exponential_segment: {
      const double a = positive_parameter(spec, "a");
      const double x0 = finite_parameter(spec, "x0", 0.0);
      for (std::size_t j = 0; j < grid.size(); ++j) psi[j] = std::exp(-a * std::abs(grid.x(j) - x0));
      kinks = {x0};
      break;
    }
  }

  WavefunctionGrid state(std::move(psi), constants, std::move(kinks), periodic);
  if (!periodic && state.boundary_amplitude() >= kBoundaryDecay)
    throw DomainTooSmallError("|psi| = " + io::format_double(state.boundary_amplitude()) +
                              " at the grid boundary; widen the grid");
  return state;
}

double eigenenergy(const ModelSpec& spec, const PhysicalConstants& c) {
  switch (spec.kind) {
    case ModelKind::qho_eigenstate:
      return c.hbar * positive_parameter(spec, "omega", 1.0) * (integer_parameter(spec, "n", 0) + 0.5);
    case ModelKind::box_eigenstate: {
      const double k = integer_parameter(spec, "n", 1) * std::numbers::pi / positive_parameter(spec, "L");
      return c.hbar * c.hbar * k * k / (2.0 * c.mass);
    }
    case ModelKind::hydrogenic_radial: {
      const int n = integer_parameter(spec, "n", 1);
      const double alpha = positive_parameter(spec, "alpha", 1.0);
      return -c.mass * alpha * alpha / (2.0 * c.hbar * c.hbar * n * n);
    }
    default:
      throw UnsupportedOracleError("model " + std::string(to_string(spec.kind)) + " is not an energy eigenstate");
  }
}

double oracle(const ModelSpec& spec, OracleQuantity quantity, double x, const PhysicalConstants& c) {
  c.validate();
  const double hbar = c.hbar;
  const double m = c.mass;
  switch (spec.kind) {
    case ModelKind::plane_wave: {
      const double k = spec.require("k");
      if (quantity == OracleQuantity::weak_value_re) return hbar * k;
      return 0.0;
    }
    case ModelKind::gaussian_packet:
    case ModelKind::coherent_state: {
      double centre = 0.0;
      double sigma = 0.0;
      if (spec.kind == ModelKind::gaussian_packet) {
        centre = finite_parameter(spec, "mu", 0.0);
        sigma = positive_parameter(spec, "sigma");
      } else {
        centre = finite_parameter(spec, "x0", 0.0);
        sigma = std::sqrt(hbar / (2.0 * m * positive_parameter(spec, "omega")));
      }
      const double u = x - centre;
      const double s2 = sigma * sigma;
      switch (quantity) {
        case OracleQuantity::weak_variance: return hbar * hbar / (4.0 * s2);
        case OracleQuantity::weak_value_re: return finite_parameter(spec, "p0", 0.0);
        case OracleQuantity::weak_value_im: return hbar * u / (2.0 * s2);
        case OracleQuantity::quantum_potential: return hbar * hbar / (4.0 * m * s2) * (1.0 - u * u / (2.0 * s2));
      }
      break;
    }
    case ModelKind::qho_eigenstate: {
      const int n = integer_parameter(spec, "n", 0);
      const double omega = positive_parameter(spec, "omega", 1.0);
      const double s = std::sqrt(m * omega / hbar);
      const double y = s * (x - finite_parameter(spec, "x0", 0.0));
      const bool node = special::hermite(n, y) == 0.0;
      switch (quantity) {
        case OracleQuantity::weak_variance:
          if (node) return kInf;
          return 0.5 * m * hbar * omega * (1.0 - special::hermite_log_second_derivative(n, y));
        case OracleQuantity::weak_value_re: return 0.0;
        case OracleQuantity::weak_value_im:
          if (node) return kNaN;
          return -hbar * s * (special::hermite_log_derivative(n, y) - y);
        case OracleQuantity::quantum_potential: return hbar * omega * (n + 0.5) - 0.5 * hbar * omega * y * y;
      }
      break;
    }
    case ModelKind::box_eigenstate: {
      const int n = integer_parameter(spec, "n", 1);
      const double L = positive_parameter(spec, "L");
      const double u = x - finite_parameter(spec, "x0", 0.0);
      if (!(u > 0.0 && u < L)) throw RangeError("box oracle is defined strictly inside the box");
      const double k = n * std::numbers::pi / L;
      const double s = std::sin(k * u);
      const double energy = eigenenergy(spec, c);
      switch (quantity) {
        case OracleQuantity::weak_variance: return s == 0.0 ? kInf : m * energy / (s * s);
        case OracleQuantity::weak_value_re: return 0.0;
        case OracleQuantity::weak_value_im: return s == 0.0 ? kNaN : -hbar * k * std::cos(k * u) / s;
        case OracleQuantity::quantum_potential: return energy;
      }
      break;
    }
    case ModelKind::hydrogenic_radial: {
      if (!(x > 0.0)) throw RangeError("hydrogenic oracle is defined on x > 0");
      const auto h = hydrogenic_params(spec, c);
      const double y = h.scale * x;
      const double l = special::laguerre(h.n - 1, 1.0, y);
      const double l1 = -special::laguerre(h.n - 2, 2.0, y);
      const double l2 = special::laguerre(h.n - 3, 3.0, y);
      const double energy = eigenenergy(spec, c);
      const double alpha = positive_parameter(spec, "alpha", 1.0);
      switch (quantity) {
        case OracleQuantity::weak_variance: {
          if (l == 0.0) return kInf;
          const double d2 = l2 / l - (l1 / l) * (l1 / l);
          return m * (hbar * hbar / (2.0 * m * x * x) + 4.0 * energy * d2);
        }
        case OracleQuantity::weak_value_re: return 0.0;
        case OracleQuantity::weak_value_im:
          if (l == 0.0) return kNaN;
          return -hbar * h.scale * (1.0 / y - 0.5 + l1 / l);
        case OracleQuantity::quantum_potential: return energy + alpha / x;
      }
      break;
    }
    case ModelKind::exponential_segment: {
      const double a = positive_parameter(spec, "a");
      const double u = x - finite_parameter(spec, "x0", 0.0);
      switch (quantity) {
        case OracleQuantity::weak_variance: return u == 0.0 ? kInf : 0.0;
        case OracleQuantity::weak_value_re: return 0.0;
        case OracleQuantity::weak_value_im: return u == 0.0 ? kNaN : hbar * a * (u > 0.0 ? 1.0 : -1.0);
        case OracleQuantity::quantum_potential: return -hbar * hbar * a * a / (2.0 * m);
      }
      break;
    }
    case ModelKind::two_gaussian_superposition:
      break;
  }
  throw UnsupportedOracleError("no closed form for model " + std::string(to_string(spec.kind)));
}

}  // namespace weakvar::states
