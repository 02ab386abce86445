#include "weakvar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "weakvar/errors.hpp"
#include "weakvar/fft.hpp"
#include "weakvar/io.hpp"
#include "weakvar/parallel.hpp"

namespace weakvar::dynamics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using numerics::Complex;

double norm_of(const std::vector<Complex>& psi, double dx) {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return s * dx;
}

// Cumulative probability at x using trapezoids between samples.
class Cdf {
 public:
  explicit Cdf(const WavefunctionGrid& s) : grid_(s.grid()), rho_(s.grid().size()), cum_(s.grid().size(), 0.0) {
    for (std::size_t j = 0; j < rho_.size(); ++j) rho_[j] = std::norm(s.psi()[j]);
    for (std::size_t j = 1; j < rho_.size(); ++j) cum_[j] = cum_[j - 1] + 0.5 * (rho_[j - 1] + rho_[j]) * grid_.dx();
  }
  double operator()(double x) const {
    const double t = (x - grid_.x_min()) / grid_.dx();
    if (t <= 0.0) return 0.0;
    const auto j = static_cast<std::size_t>(t);
    if (j + 1 >= rho_.size()) return cum_.back();
    const double f = t - static_cast<double>(j);
    const double r = rho_[j] + f * (rho_[j + 1] - rho_[j]);
    return cum_[j] + 0.5 * (rho_[j] + r) * f * grid_.dx();
  }
  double total() const { return cum_.back(); }
  const std::vector<double>& cumulative() const { return cum_; }

 private:
  Grid grid_;
  std::vector<double> rho_;
  std::vector<double> cum_;
};

// Velocity field of one snapshot.
struct VelocityField {
  numerics::ComplexField psi;
  numerics::ComplexField dpsi;
  double eps;
  bool periodic;
  double hbar_over_m;

  // NaN where the density is below the node threshold.
  double operator()(double x) const {
    const Complex p = numerics::interpolate(psi, x, periodic);
    if (std::norm(p) < eps) return kNaN;
    const Complex dp = numerics::interpolate(dpsi, x, periodic);
    return hbar_over_m * (dp / p).imag();
  }
};

}  // namespace

RealField zero_potential(const Grid& grid) { return RealField(grid); }

RealField harmonic_potential(const Grid& grid, double omega, double mass, double x0) {
  if (!(omega > 0.0) || !(mass > 0.0)) throw ConfigurationError("harmonic potential needs omega > 0 and mass > 0");
  RealField v(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double u = grid.x(j) - x0;
    v[j] = 0.5 * mass * omega * omega * u * u;
  }
  return v;
}

RealField barrier_potential(const Grid& grid, double height, double width, double centre) {
  if (!std::isfinite(height) || !(width > 0.0)) throw ConfigurationError("barrier needs finite height and width > 0");
  RealField v(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) v[j] = std::abs(grid.x(j) - centre) < 0.5 * width ? height : 0.0;
  return v;
}

RealField load_potential(const std::filesystem::path& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open potential file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> xs, vs;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("x,V", 0) != 0) throw ParseError("potential header must be 'x,V'", line_no);
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) throw ParseError("expected 2 columns", line_no);
    double x = 0.0, v = 0.0;
    try {
      x = std::stod(a);
      v = std::stod(b);
    } catch (const std::exception&) {
      throw ParseError("cannot parse potential row", line_no);
    }
    if (!std::isfinite(x) || !std::isfinite(v)) throw ParseError("non-finite potential sample", line_no);
    if (!xs.empty() && !(x > xs.back())) throw ParseError("x is not strictly increasing", line_no);
    xs.push_back(x);
    vs.push_back(v);
  }
  if (xs.size() < 2) throw ParseError("potential file needs at least 2 rows", line_no);
  RealField out(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double x = grid.x(j);
    if (x < xs.front() || x > xs.back()) continue;
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
    const std::size_t lo = hi - 1;
    const double f = (x - xs[lo]) / (xs[hi] - xs[lo]);
    out[j] = vs[lo] + f * (vs[hi] - vs[lo]);
  }
  return out;
}

void EvolutionConfig::validate(const WavefunctionGrid& state) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("dt must be positive");
  if (steps == 0) throw ConfigurationError("steps must be positive");
  if (snapshot_every == 0) throw ConfigurationError("snapshot_every must be positive");
  if (!(potential.grid == state.grid())) throw ConfigurationError("potential grid differs from the state grid");
  double vmax = 0.0;
  for (double v : potential.values) {
    if (!std::isfinite(v)) throw ConfigurationError("potential has non-finite samples");
    vmax = std::max(vmax, std::abs(v));
  }
  const auto& c = state.constants();
  if (dt * vmax / c.hbar >= std::numbers::pi)
    throw ConfigurationError("dt violates the potential phase bound dt < pi*hbar/max|V| = " +
                             io::format_double(std::numbers::pi * c.hbar / vmax));
  const double kmax = std::numbers::pi / state.grid().dx();
  const double kinetic_bound = 2.0 * std::numbers::pi * c.mass / (c.hbar * kmax * kmax);
  if (dt >= kinetic_bound)
    throw ConfigurationError("dt violates the kinetic Nyquist bound dt < 2*pi*m/(hbar*k_max^2) = " +
                             io::format_double(kinetic_bound));
}

std::vector<Snapshot> evolve(const WavefunctionGrid& state, const EvolutionConfig& config) {
  config.validate(state);
  const auto& c = state.constants();
  const Grid& g = state.grid();
  const std::size_t n = g.size();
  if (!state.periodic() && state.boundary_amplitude() >= 1e-8)
    throw DomainTooSmallError("initial state does not decay at the grid boundary");

  std::vector<Complex> half_v(n), kin(n);
  for (std::size_t j = 0; j < n; ++j) half_v[j] = std::polar(1.0, -0.5 * config.potential[j] * config.dt / c.hbar);
  const auto k = numerics::wavenumbers(n, g.dx());
  for (std::size_t m = 0; m < n; ++m) kin[m] = std::polar(1.0, -c.hbar * k[m] * k[m] * config.dt / (2.0 * c.mass));

  const numerics::FftPlan plan(n);
  std::vector<Complex> psi = state.psi().values;
  const double norm0 = norm_of(psi, g.dx());
  std::vector<Snapshot> out;
  out.push_back({0.0, state});
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (std::size_t j = 0; j < n; ++j) psi[j] *= half_v[j];
    plan.forward(psi);
    for (std::size_t m = 0; m < n; ++m) psi[m] *= kin[m];
    plan.inverse(psi);
    for (std::size_t j = 0; j < n; ++j) psi[j] *= half_v[j];
    const double drift = std::abs(norm_of(psi, g.dx()) - norm0) / norm0;
    if (!(drift <= kNormDriftLimit))
      throw InstabilityError("norm drift " + io::format_double(drift) + " exceeds " + io::format_double(kNormDriftLimit), step);
    if (step % config.snapshot_every == 0) {
      out.push_back({static_cast<double>(step) * config.dt,
                     WavefunctionGrid(numerics::ComplexField(g, psi), c, {}, state.periodic())});
    }
  }
  return out;
}

double energy(const WavefunctionGrid& state, const RealField& potential) {
  const auto& c = state.constants();
  const auto mom = numerics::momentum_moments(state.psi(), c.hbar);
  double pot = 0.0;
  for (std::size_t j = 0; j < potential.size(); ++j) pot += potential[j] * std::norm(state.psi()[j]);
  pot *= state.grid().dx();
  return mom.second / (2.0 * c.mass * mom.norm) + pot;
}

PositionMoments position_moments(const WavefunctionGrid& state) {
  const auto& g = state.grid();
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = std::norm(state.psi()[j]);
    m0 += r;
    m1 += r * g.x(j);
    m2 += r * g.x(j) * g.x(j);
  }
  const double mean = m1 / m0;
  return {mean, m2 / m0 - mean * mean};
}

std::vector<double> quantile_seeds(const WavefunctionGrid& state, std::size_t count) {
  if (count == 0) throw ConfigurationError("seed count must be positive");
  const Cdf cdf(state);
  const auto& cum = cdf.cumulative();
  const auto& g = state.grid();
  std::vector<double> seeds;
  for (std::size_t i = 0; i < count; ++i) {
    const double target = (static_cast<double>(i) + 0.5) / static_cast<double>(count) * cdf.total();
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const std::size_t hi = std::max<std::size_t>(1, static_cast<std::size_t>(it - cum.begin()));
    // Refine inside the cell by bisection on the piecewise-quadratic CDF.
    double a = g.x(hi - 1), b = g.x(std::min(hi, g.size() - 1));
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (a + b);
      (cdf(mid) < target ? a : b) = mid;
    }
    seeds.push_back(0.5 * (a + b));
  }
  return seeds;
}

TrajectorySet hydrodynamic_trajectories(std::span<const Snapshot> snapshots, std::span<const double> seeds) {
  if (snapshots.size() < 2) throw ConfigurationError("trajectories need at least two snapshots");
  const auto& c = snapshots.front().state.constants();
  std::vector<VelocityField> fields;
  fields.reserve(snapshots.size());
  for (const auto& s : snapshots) {
    double max_rho = 0.0;
    for (const auto& v : s.state.psi().values) max_rho = std::max(max_rho, std::norm(v));
    fields.push_back({s.state.psi(), numerics::derivative(s.state.psi(), 1, numerics::DiffMethod::spectral),
                      states::kDefaultRelativeEpsNode * max_rho, s.state.periodic(), c.hbar / c.mass});
  }
  std::vector<double> times;
  for (const auto& s : snapshots) times.push_back(s.t);

  // Cubic Lagrange interpolation in time through the four snapshots around t.
  auto velocity = [&](double x, double t) {
    const std::size_t ns = times.size();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    i = i == 0 ? 0 : i - 1;
    const std::size_t w = std::min<std::size_t>(4, ns);
    std::size_t start = i >= 1 ? i - 1 : 0;
    start = std::min(start, ns - w);
    double acc = 0.0;
    for (std::size_t a = start; a < start + w; ++a) {
      double l = 1.0;
      for (std::size_t b = start; b < start + w; ++b)
        if (b != a) l *= (t - times[b]) / (times[a] - times[b]);
      const double v = fields[a](x);
      if (!std::isfinite(v)) return kNaN;
      acc += l * v;
    }
    return acc;
  };

  TrajectorySet set;
  set.seeds.assign(seeds.begin(), seeds.end());
  set.paths.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      Trajectory tr{seeds[s], {}, false};
      double x = seeds[s];
      const double v0 = velocity(x, times[0]);
      if (!std::isfinite(v0)) {
        tr.truncated = true;
        set.paths[s] = std::move(tr);
        continue;
      }
      tr.samples.push_back({times[0], x, v0});
      for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double t = times[i];
        const double h = times[i + 1] - t;
        const double k1 = velocity(x, t);
        const double k2 = velocity(x + 0.5 * h * k1, t + 0.5 * h);
        const double k3 = velocity(x + 0.5 * h * k2, t + 0.5 * h);
        const double k4 = velocity(x + h * k3, t + h);
        const double xn = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double vn = std::isfinite(xn) ? velocity(xn, times[i + 1]) : kNaN;
        if (!std::isfinite(vn)) {
          tr.truncated = true;
          break;
        }
        x = xn;
        tr.samples.push_back({times[i + 1], x, vn});
      }
      set.paths[s] = std::move(tr);
    }
  });

  // Ordering and inter-trajectory mass checks at every snapshot the paths share.
  std::vector<std::size_t> order(seeds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return seeds[a] < seeds[b]; });
  std::vector<Cdf> cdfs;
  cdfs.reserve(snapshots.size());
  for (const auto& s : snapshots) cdfs.emplace_back(s.state);
  for (std::size_t q = 0; q + 1 < order.size(); ++q) {
    const auto& a = set.paths[order[q]];
    const auto& b = set.paths[order[q + 1]];
    const std::size_t len = std::min(a.samples.size(), b.samples.size());
    if (len == 0) continue;
    const double m0 = cdfs[0](b.samples[0].x) - cdfs[0](a.samples[0].x);
    for (std::size_t i = 0; i < len; ++i) {
      if (!(a.samples[i].x < b.samples[i].x)) set.crossed = true;
      const double mi = cdfs[i](b.samples[i].x) - cdfs[i](a.samples[i].x);
      if (m0 > 0.0) set.max_mass_drift = std::max(set.max_mass_drift, std::abs(mi - m0) / m0);
    }
  }
  return set;
}

RealField quantum_force(const RealField& Q) {
  RealField f(Q.grid);
  std::fill(f.values.begin(), f.values.end(), kNaN);
  std::size_t j = 0;
  const std::size_t n = Q.size();
  while (j < n) {
    if (!std::isfinite(Q[j])) {
      ++j;
      continue;
    }
    const std::size_t begin = j;
    while (j < n && std::isfinite(Q[j])) ++j;
    numerics::fd_derivative(std::span<const double>(Q.values.data() + begin, j - begin), Q.grid.dx(), 1, 8,
                            std::span<double>(f.values.data() + begin, j - begin));
  }
  return f;
}

std::vector<bool> semiclassical_mask(const PolarFields& polar, const RealField& V, const RealField& force,
                                     double tol_zero, double tol_force) {
  std::vector<bool> mask(V.size(), false);
  for (std::size_t j = 0; j < V.size(); ++j) {
    if (polar.masked(j) || !std::isfinite(V[j]) || !std::isfinite(force[j])) continue;
    mask[j] = std::abs(V[j]) <= tol_zero && std::abs(force[j]) <= tol_force;
  }
  return mask;
}

ClassicalLimitReport classical_limit_report(const WavefunctionGrid& state, const PolarFields& polar,
                                            const states::LogDerivatives& derivs, const RealField& V,
                                            const RealField& Q, const PhysicalConstants& c,
                                            const ClassicalTolerances& tol) {
  const auto budget = weakstats::variance_budget(state, polar, derivs, V, c);
  ClassicalLimitReport r{budget.mean_weak, budget.fisher, RealField(V.grid), quantum_force(Q), {}, 0.0, 0.0};
  for (std::size_t j = 0; j < V.size(); ++j) {
    if (derivs.mask[j]) {
      r.el_residual[j] = kNaN;
      continue;
    }
    const double l1 = derivs.log_rho[0][j];
    r.el_residual[j] = derivs.log_rho[1][j] + 0.5 * l1 * l1;
  }
  for (std::size_t j = 0; j < V.size(); ++j)
    if (derivs.mask[j]) r.force[j] = kNaN;

  const auto mom = numerics::momentum_moments(state.psi(), c.hbar);
  const double var_p = std::max(mom.variance(), 0.0);
  double vmax = 0.0, fmax = 0.0;
  for (std::size_t j = 0; j < V.size(); ++j) {
    if (std::isfinite(V[j])) vmax = std::max(vmax, std::abs(V[j]));
    if (std::isfinite(r.force[j])) fmax = std::max(fmax, std::abs(r.force[j]));
  }
  r.tol_zero = std::max(tol.relative_zero * std::max(vmax, var_p), weakstats::tol_zero_floor(polar.grid(), c));
  r.tol_force = tol.relative_force * std::max(fmax, std::pow(var_p, 1.5) / (c.mass * c.hbar));
  r.semiclassical_mask = semiclassical_mask(polar, V, r.force, r.tol_zero, r.tol_force);
  return r;
}

}  // namespace weakvar::dynamics
