#include "weakvar/weakstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weakvar/errors.hpp"
#include "weakvar/io.hpp"

namespace weakvar::weakstats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

RealField nan_field(const numerics::Grid& g) {
  RealField f(g);
  std::fill(f.values.begin(), f.values.end(), kNaN);
  return f;
}

struct LineFit {
  double slope;
  double intercept;
  double rss;
};

LineFit fit_line(const std::vector<double>& u, const std::vector<double>& v) {
  const auto n = static_cast<double>(u.size());
  double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su += u[i];
    sv += v[i];
    suu += u[i] * u[i];
    suv += u[i] * v[i];
  }
  const double den = n * suu - su * su;
  const double slope = den != 0.0 ? (n * suv - su * sv) / den : 0.0;
  const double intercept = (sv - slope * su) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = v[i] - (intercept + slope * u[i]);
    rss += r * r;
  }
  return {slope, intercept, rss};
}

bool in_run(const std::vector<NodeFit>& fits, std::size_t j, const NodeFit** which) {
  for (const auto& f : fits) {
    if (j >= f.run_begin && j < f.run_end) {
      if (which) *which = &f;
      return true;
    }
  }
  return false;
}

}  // namespace

WeakMomentumField weak_momentum(const LogDerivatives& d, const PhysicalConstants& c) {
  const auto& g = d.grid;
  WeakMomentumField wm{nan_field(g), nan_field(g), nan_field(g), nan_field(g), d.mask};
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (d.mask[j]) continue;
    wm.re[j] = c.hbar * d.phase[0][j];
    wm.im[j] = -0.5 * c.hbar * d.log_rho[0][j];
    wm.im_from_amplitude[j] = -c.hbar * d.log_psi[0][j].real();
    wm.im_derivative[j] = -c.hbar * d.log_psi[1][j].real();
  }
  return wm;
}

WeakMomentumField weak_momentum(const PolarFields& polar, const PhysicalConstants& c) {
  return weak_momentum(states::log_derivatives(polar), c);
}

RealField combine_with_eta(const WeakMomentumField& wm, double eta) {
  RealField out(wm.re.grid);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = eta == 0.0 ? wm.re[j] : wm.re[j] + eta * wm.im[j];
  return out;
}

RealField weak_variance_logdensity(const RealField& rho, const PhysicalConstants& c, std::optional<double> eps_node,
                                   DiffMethod method) {
  const double max_rho = *std::max_element(rho.values.begin(), rho.values.end());
  const double eps = eps_node.value_or(states::kDefaultRelativeEpsNode * max_rho);
  const auto d1 = numerics::derivative(rho, 1, method);
  const auto d2 = numerics::derivative(rho, 2, method);
  RealField v = nan_field(rho.grid);
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!(rho[j] >= eps) || rho[j] <= 0.0) continue;
    const double r1 = d1[j] / rho[j];
    const double r2 = d2[j] / rho[j];
    v[j] = -0.25 * c.hbar * c.hbar * (r2 - r1 * r1);
  }
  return v;
}

RealField weak_variance_logdensity(const LogDerivatives& d, const PhysicalConstants& c) {
  RealField v = nan_field(d.grid);
  for (std::size_t j = 0; j < v.size(); ++j)
    if (!d.mask[j]) v[j] = -0.25 * c.hbar * c.hbar * d.log_rho[1][j];
  return v;
}

RealField weak_variance_conditional(const WignerGrid& wg, double eps_node) {
  RealField v = nan_field(wg.grid_x);
  const double dp = wg.grid_p.dx();
  for (std::size_t i = 0; i < wg.grid_x.size(); ++i) {
    const auto r = wg.row(i);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      m0 += r[k];
      m1 += wg.grid_p.x(k) * r[k];
    }
    m0 *= dp;
    if (!(m0 >= eps_node) || m0 <= 0.0) continue;
    const double mean = m1 * dp / m0;
    double m2 = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double u = wg.grid_p.x(k) - mean;
      m2 += u * u * r[k];
    }
    v[i] = m2 * dp / m0;
  }
  return v;
}

RealField weak_variance_weakvalues(const LogDerivatives& d, const PhysicalConstants& c) {
  RealField v = nan_field(d.grid);
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (d.mask[j]) continue;
    // Re(weak p^2) - Re((weak p)^2) = -hbar^2 Re(psi''/psi - (psi'/psi)^2).
    v[j] = -0.5 * c.hbar * c.hbar * d.log_psi[1][j].real();
  }
  return v;
}

RealField weak_variance_weakvalues(const WavefunctionGrid&, const PolarFields& polar, const PhysicalConstants& c) {
  return weak_variance_weakvalues(states::log_derivatives(polar), c);
}

RealField quantum_potential(const LogDerivatives& d, const PhysicalConstants& c) {
  RealField q = nan_field(d.grid);
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (d.mask[j]) continue;
    const double l1 = d.log_psi[0][j].real();
    const double r2 = d.log_psi[1][j].real() + l1 * l1;  // R''/R
    q[j] = -0.5 * c.hbar * c.hbar / c.mass * r2;
  }
  return q;
}

RealField quantum_potential(const PolarFields& polar, const PhysicalConstants& c) {
  return quantum_potential(states::log_derivatives(polar), c);
}

RealField riccati_residual(const WeakMomentumField& wm, const RealField& Q, const PhysicalConstants& c) {
  RealField r = nan_field(wm.im.grid);
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (wm.mask[j]) continue;
    r[j] = wm.im_derivative[j] - wm.im[j] * wm.im[j] / c.hbar - 2.0 * c.mass / c.hbar * Q[j];
  }
  return r;
}

std::vector<NodeFit> fit_nodes(const PolarFields& polar) {
  std::vector<NodeFit> fits;
  const auto& g = polar.grid();
  const std::size_t n = g.size();
  for (const auto& run : polar.nodes) {
    std::vector<std::size_t> pts;
    for (std::size_t j = run.begin, taken = 0; j-- > 0 && taken < kNodeFitPoints;) {
      if (!polar.masked(j)) {
        pts.push_back(j);
        ++taken;
      }
    }
    const std::size_t left_count = pts.size();
    for (std::size_t j = run.end, taken = 0; j < n && taken < kNodeFitPoints; ++j) {
      if (!polar.masked(j)) {
        pts.push_back(j);
        ++taken;
      }
    }
    NodeFit fit{run.begin, run.end, kNaN, kNaN, kNaN, kNaN};
    if (left_count == 0 || pts.size() == left_count) {
      fits.push_back(fit);
      continue;
    }
    const double lo = g.x(pts[0]);
    const double hi = g.x(pts[left_count]);
    std::vector<double> v;
    for (auto j : pts) v.push_back(std::log(polar.amplitude[j]));
    auto rss_at = [&](double x0) {
      std::vector<double> u;
      for (auto j : pts) u.push_back(std::log(std::abs(g.x(j) - x0)));
      return fit_line(u, v);
    };
    // Golden-section search for the node position inside the bracketing gap.
    const double margin = 1e-6 * (hi - lo);
    double a = lo + margin, b = hi - margin;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
    double f1 = rss_at(c1).rss, f2 = rss_at(c2).rss;
    for (int it = 0; it < 200 && (b - a) > 1e-14 * (hi - lo); ++it) {
      if (f1 < f2) {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - phi * (b - a);
        f1 = rss_at(c1).rss;
      } else {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + phi * (b - a);
        f2 = rss_at(c2).rss;
      }
    }
    fit.x0 = 0.5 * (a + b);
    const auto line = rss_at(fit.x0);
    fit.exponent = line.slope;
    fit.amplitude = std::exp(line.intercept);
    fit.asymptote_coefficient = 0.5 * fit.exponent * polar.constants.hbar * polar.constants.hbar;
    fits.push_back(fit);
  }
  return fits;
}

VarianceBudget variance_budget(const WavefunctionGrid& state, const PolarFields& polar, const RealField& V,
                               const PhysicalConstants& c) {
  return variance_budget(state, polar, states::log_derivatives(polar), V, c);
}

VarianceBudget variance_budget(const WavefunctionGrid& state, const PolarFields& polar, const LogDerivatives& d,
                               const RealField& V, const PhysicalConstants& c) {
  const auto& g = polar.grid();
  const double dx = g.dx();
  const double h2 = c.hbar * c.hbar;
  const auto mom = numerics::momentum_moments(state.psi(), c.hbar);
  VarianceBudget b;
  b.total = mom.variance();
  const double mean_p = mom.mean / mom.norm;
  const auto fits = fit_nodes(polar);

  double mean_weak = 0.0, fisher = 0.0, var_wv = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double rho = polar.density[j];
    const double d1 = d.rho[1][j];
    const double d2 = d.rho[2][j];
    double f = 0.0;  // limit of rho'^2/rho
    if (rho >= polar.eps_node && rho > 0.0) {
      f = d1 * d1 / rho;
    } else {
      const NodeFit* fit = nullptr;
      // At a simple node rho ~ a^2 (x-x0)^2, so rho'^2/rho -> 4a^2 = 2 rho''; higher-order nodes give 0.
      if (in_run(fits, j, &fit) && std::abs(fit->exponent - 1.0) < 0.5) f = 2.0 * d2;
    }
    double rho_v = -0.25 * h2 * (d2 - f);
    if (!polar.masked(j) && std::isfinite(V[j]) && rho >= polar.eps_node) rho_v = rho * V[j];
    mean_weak += rho_v;
    fisher += f;
    if (!polar.masked(j)) {
      const double u = c.hbar * d.phase[0][j] - mean_p;
      var_wv += rho * u * u;
    }
  }
  b.mean_weak = mean_weak * dx;
  b.fisher = 0.25 * h2 * fisher * dx;
  b.var_of_weak_value = var_wv * dx;
  b.residual = b.total - b.mean_weak - b.var_of_weak_value;
  return b;
}

ThermoFields thermo_fields(const RealField& rho, const RealField& V, const PhysicalConstants& c) {
  ThermoFields t{RealField(V.grid), RealField(V.grid), std::vector<bool>(V.size(), false)};
  for (std::size_t j = 0; j < V.size(); ++j) {
    t.kT[j] = V[j] / c.mass;
    t.P[j] = rho[j] * V[j] / c.mass;
    t.negative_temperature[j] = t.kT[j] < 0.0;
  }
  return t;
}

std::string_view to_string(SignClass c) {
  switch (c) {
    case SignClass::positive: return "positive";
    case SignClass::negative: return "negative";
    case SignClass::zero_band: return "zero_band";
    case SignClass::node_divergent: return "node_divergent";
    case SignClass::undefined: return "undefined";
  }
  return "undefined";
}

double tol_zero_floor(const numerics::Grid& grid, const PhysicalConstants& constants) {
  return kTolZeroRoundoff * constants.hbar * constants.hbar / (grid.dx() * grid.dx());
}

double default_tol_zero(const RealField& V, double momentum_variance, double relative, double floor) {
  double vmax = 0.0;
  for (double v : V.values)
    if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
  return std::max(relative * std::max(vmax, momentum_variance), floor);
}

SignClassification sign_classification(const PolarFields& polar, const RealField& V, double tol_zero) {
  SignClassification s{std::vector<SignClass>(V.size(), SignClass::undefined), fit_nodes(polar), tol_zero};
  for (std::size_t j = 0; j < V.size(); ++j) {
    if (in_run(s.nodes, j, nullptr)) {
      s.classes[j] = SignClass::node_divergent;
    } else if (polar.masked(j) || !std::isfinite(V[j])) {
      s.classes[j] = SignClass::undefined;
    } else if (V[j] > tol_zero) {
      s.classes[j] = SignClass::positive;
    } else if (V[j] < -tol_zero) {
      s.classes[j] = SignClass::negative;
    } else {
      s.classes[j] = SignClass::zero_band;
    }
  }
  return s;
}

PseudoStddevs pseudo_stddevs(const WignerGrid& wg, double x, const WeakMomentumField& wm, double eps_node) {
  const auto slice = wigner::conditional(wg, x, eps_node);
  const double p_tilde = wm.re[slice.index];
  if (!std::isfinite(p_tilde))
    throw NodeUndefinedError("weak value undefined at x = " + io::format_double(slice.x));
  const double v = wigner::conditional_moment(slice, 2, true);
  const auto& gp = slice.values.grid;
  double s2 = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < gp.size(); ++k) {
    const double a = std::abs(slice.values[k]);
    const double u = gp.x(k) - p_tilde;
    s2 += a * u * u;
    norm += a;
  }
  return {std::sqrt(std::abs(v)), std::sqrt(s2 * gp.dx()), norm * gp.dx()};
}

Analysis analyze(const WavefunctionGrid& state, const AnalysisOptions& options) {
  const auto& c = state.constants();
  auto polar = states::polar_decompose(state, options.eps_node);
  auto derivs = states::log_derivatives(polar, options.method);
  const auto& g = state.grid();

  WeakFieldSet f{weak_momentum(derivs, c),
                 weak_variance_logdensity(derivs, c),
                 nan_field(g),
                 weak_variance_weakvalues(derivs, c),
                 quantum_potential(derivs, c),
                 RealField(g),
                 RealField(g),
                 RealField(g),
                 nan_field(g),
                 nan_field(g),
                 {},
                 derivs.mask,
                 false};
  f.riccati_residual = riccati_residual(f.weak_momentum, f.Q, c);
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (f.mask[j]) continue;
    const double im = f.weak_momentum.im[j];
    f.V_divergence[j] = 0.5 * c.hbar * f.weak_momentum.im_derivative[j];
    f.V_identity[j] = 0.5 * im * im + c.mass * f.Q[j];
  }
  auto thermo = thermo_fields(polar.density, f.V_logrho, c);
  f.kT = std::move(thermo.kT);
  f.P = std::move(thermo.P);

  std::optional<WignerGrid> wg;
  if (options.with_wigner) {
    wg = wigner::wigner_transform(state);
    f.V_conditional = weak_variance_conditional(*wg, polar.eps_node);
    for (std::size_t j = 0; j < g.size(); ++j)
      if (f.mask[j]) f.V_conditional[j] = kNaN;
    f.has_conditional = true;
  }

  const auto mom = numerics::momentum_moments(state.psi(), c.hbar);
  const double tol_zero = default_tol_zero(f.V_logrho, mom.variance(), options.tol_zero_relative, tol_zero_floor(g, c));
  f.signs = sign_classification(polar, f.V_logrho, tol_zero);
  auto budget = variance_budget(state, polar, derivs, f.V_logrho, c);
  return Analysis{std::move(polar), std::move(derivs), std::move(wg), std::move(f), budget, mom.variance()};
}

}  // namespace weakvar::weakstats
