#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "weakvar/errors.hpp"
#include "weakvar/states.hpp"
#include "weakvar/wigner.hpp"

using namespace weakvar;
using namespace weakvar::states;
using namespace weakvar::wigner;

namespace {

constexpr double pi = std::numbers::pi;
const PhysicalConstants unit{};

double max_abs_diff_gaussian(const RealField& f, double mean, double var, double from, double to) {
  double err = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double x = f.grid.x(j);
    if (x < from || x > to) continue;
    const double expected = std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2 * pi * var);
    err = std::max(err, std::abs(f[j] - expected));
  }
  return err;
}

}  // namespace

TEST_CASE("coherent state Wigner function is nonnegative") {
  const Grid g(-12.0, 12.0, 512);
  const auto st = build({ModelKind::coherent_state, {{"omega", 1.0}, {"x0", 1.0}, {"p0", -0.5}}}, g, unit);
  const auto wg = wigner_transform(st);
  CHECK(wg.min() >= -1e-9);
  CHECK(wg.imag_residue < 1e-10);
  CHECK(wg.grid_p.size() == 2 * g.size());
}

TEST_CASE("boosted Gaussian Wigner function is the closed-form phase-space Gaussian") {
  const Grid g(-12.0, 12.0, 512);
  const double mu = 0.5, sigma = 0.9, p0 = 1.2;
  const auto st = build({ModelKind::gaussian_packet, {{"mu", mu}, {"sigma", sigma}, {"p0", p0}}}, g, unit);
  const auto wg = wigner_transform(st);
  const double sp = 1.0 / (2 * sigma);
  double err = 0.0;
  for (std::size_t ix = 0; ix < g.size(); ++ix) {
    const double x = g.x(ix);
    for (std::size_t ip = 0; ip < wg.grid_p.size(); ++ip) {
      const double p = wg.grid_p.x(ip);
      const double expected = std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma) - 0.5 * (p - p0) * (p - p0) / (sp * sp)) / pi;
      err = std::max(err, std::abs(wg(ix, ip) - expected));
    }
  }
  CHECK(err < 1e-7);
}

TEST_CASE("cat state Wigner function has negative fringes") {
  const Grid g(-16.0, 16.0, 512);
  const auto st = build({ModelKind::two_gaussian_superposition, {{"separation", 6.0}, {"sigma", 1.0}}}, g, unit);
  CHECK(wigner_transform(st).min() < -1e-4);
}

TEST_CASE("position marginal reproduces the density") {
  const Grid g(-16.0, 16.0, 512);
  const auto coh = build({ModelKind::coherent_state, {{"omega", 2.0}, {"x0", -1.0}}}, g, unit);
  const auto mx = marginal_x(wigner_transform(coh));
  CHECK(max_abs_diff_gaussian(mx, -1.0, 0.25, -16.0, 16.0) < 1e-7);

  const double L = 8.0, x0 = -4.0;
  const auto box = build({ModelKind::box_eigenstate, {{"n", 2}, {"L", L}, {"x0", x0}}}, Grid(-6.0, 6.0, 1024), unit);
  const auto bx = marginal_x(wigner_transform(box));
  double err = 0.0;
  for (std::size_t j = 0; j < bx.size(); ++j) {
    const double x = bx.grid.x(j);
    const double expected = (x > x0 && x < x0 + L) ? 2.0 / L * std::pow(std::sin(2 * pi * (x - x0) / L), 2) : 0.0;
    err = std::max(err, std::abs(bx[j] - expected));
  }
  CHECK(err < 1e-6);
}

TEST_CASE("marginals integrate to one") {
  const Grid g(-16.0, 16.0, 512);
  for (const ModelSpec& spec : std::vector<ModelSpec>{
           {ModelKind::two_gaussian_superposition, {{"separation", 5.0}, {"sigma", 1.0}, {"p0", 1.0}}},
           {ModelKind::qho_eigenstate, {{"n", 3}, {"omega", 1.0}}},
           {ModelKind::gaussian_packet, {{"sigma", 1.5}, {"p0", -2.0}}}}) {
    const auto wg = wigner_transform(build(spec, g, unit));
    CHECK(numerics::integrate(marginal_x(wg)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(numerics::integrate(marginal_p(wg)) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("momentum marginal of a boosted Gaussian") {
  const Grid g(-16.0, 16.0, 512);
  const double sigma = 1.0, p0 = 0.7;
  const auto wg = wigner_transform(build({ModelKind::gaussian_packet, {{"sigma", sigma}, {"p0", p0}}}, g, unit));
  const auto mp = marginal_p(wg);
  CHECK(max_abs_diff_gaussian(mp, p0, 1.0 / (4 * sigma * sigma), -10.0, 10.0) < 1e-7);
}

TEST_CASE("conditional slice of a coherent state") {
  const Grid g(-12.0, 12.0, 512);
  const double omega = 1.5;
  const auto st = build({ModelKind::coherent_state, {{"omega", omega}}}, g, unit);
  const auto wg = wigner_transform(st);
  for (double x : {-1.0, 0.0, 0.8}) {
    const auto slice = conditional(wg, x, 1e-12);
    CHECK(slice.normalized);
    CHECK(conditional_moment(slice, 0, false) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(conditional_moment(slice, 1, false)) < 1e-8);
    CHECK(conditional_moment(slice, 2, true) == doctest::Approx(omega / 2).epsilon(1e-5));
    CHECK(max_abs_diff_gaussian(slice.values, 0.0, omega / 2, -20.0, 20.0) < 1e-7);
  }
}

TEST_CASE("cat state conditional slice at the midpoint goes negative") {
  const Grid g(-16.0, 16.0, 512);
  const auto wg = wigner_transform(build({ModelKind::two_gaussian_superposition, {{"separation", 6.0}, {"sigma", 1.0}}}, g, unit));
  const auto slice = conditional(wg, 0.0, 1e-14);
  double mn = 0.0;
  for (double v : slice.values.values) mn = std::min(mn, v);
  CHECK(mn < 0.0);
}

TEST_CASE("conditioning at a node is undefined") {
  const Grid g(-16.0, 16.0, 512);
  const auto wg = wigner_transform(build({ModelKind::qho_eigenstate, {{"n", 1}, {"omega", 1.0}}}, g, unit));
  CHECK_THROWS_AS(conditional(wg, 0.0, 1e-12), NodeUndefinedError);
}

TEST_CASE("characteristic function examples") {
  const Grid g(-16.0, 16.0, 1024);
  const double sigma = 1.2;
  const auto gauss = build({ModelKind::gaussian_packet, {{"sigma", sigma}}}, g, unit);
  const std::vector<double> tau{-1.0, -0.3, 0.0, 0.4, 1.1};
  for (double x : {-0.5, 0.0, 1.0}) {
    const auto M = characteristic_function(gauss, x, tau);
    for (std::size_t i = 0; i < tau.size(); ++i) {
      // psi*(x-a)psi(x+a)/rho(x) = exp(-a^2/(2 sigma^2)) for a real Gaussian amplitude.
      const double a = 0.5 * tau[i];
      CHECK(M[i].real() == doctest::Approx(std::exp(-a * a / (2 * sigma * sigma))).epsilon(1e-10));
      CHECK(std::abs(M[i].imag()) < 1e-12);
    }
    CHECK(M[2] == Complex(1.0, 0.0));
  }
  const double k = 3.0;
  const auto pw = build({ModelKind::plane_wave, {{"k", k}}}, Grid(0.0, 2 * pi, 256), unit);
  const auto M = characteristic_function(pw, 1.0, tau);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    CHECK(std::abs(M[i]) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(M[i] - std::polar(1.0, k * tau[i])) < 1e-10);
  }
  CHECK_THROWS_AS(characteristic_function(gauss, 3.0, std::vector<double>{40.0}), RangeError);
}

TEST_CASE("boosted Gaussian cumulants by both methods") {
  const Grid g(-20.0, 20.0, 4096);
  const double sigma = 1.0, p0 = 1.5;
  const auto st = build({ModelKind::gaussian_packet, {{"sigma", sigma}, {"p0", p0}}}, g, unit);
  const double exact[4] = {p0, 1.0 / (4 * sigma * sigma), 0.0, 0.0};
  for (auto method : {CumulantMethod::formula, CumulantMethod::characteristic_function}) {
    for (double x : {-1.5, 0.0, 2.0}) {
      const auto t = conditional_cumulants(st, x, 4, method);
      REQUIRE(t.kappa.size() == 4);
      for (int n = 0; n < 4; ++n) CHECK(std::abs(t.kappa[n] - exact[n]) < 1e-5);
      CHECK_FALSE(t.fit_degraded);
    }
  }
}

TEST_CASE("coherent state second cumulant by both methods") {
  const Grid g(-20.0, 20.0, 4096);
  const double omega = 0.8;
  const auto st = build({ModelKind::coherent_state, {{"omega", omega}, {"x0", 0.5}}}, g, unit);
  for (auto method : {CumulantMethod::formula, CumulantMethod::characteristic_function})
    CHECK(conditional_cumulants(st, 1.0, 2, method).kappa[1] == doctest::Approx(omega / 2).epsilon(1e-5));
}

TEST_CASE("plane wave cumulants") {
  const double k = 5.0;
  const auto st = build({ModelKind::plane_wave, {{"k", k}}}, Grid(0.0, 2 * pi, 1024), unit);
  const auto f = conditional_cumulants(st, 2.0, 4, CumulantMethod::formula);
  CHECK(f.kappa[0] == doctest::Approx(k).epsilon(1e-9));
  for (int n = 1; n < 4; ++n) CHECK(std::abs(f.kappa[n]) < 1e-6);
  const auto c = conditional_cumulants(st, 2.0, 4, CumulantMethod::characteristic_function);
  CHECK(c.kappa[0] == doctest::Approx(k).epsilon(1e-9));
  for (int n = 1; n < 4; ++n) CHECK(std::abs(c.kappa[n]) < 1e-4);
}

TEST_CASE("cumulants at a node are undefined") {
  const auto st = build({ModelKind::qho_eigenstate, {{"n", 3}, {"omega", 1.0}}}, Grid(-16.0, 16.0, 2048), unit);
  CHECK_THROWS_AS(conditional_cumulants(st, 0.0, 4, CumulantMethod::formula), NodeUndefinedError);
  CHECK_THROWS_AS(conditional_cumulants(st, 1.0, 5, CumulantMethod::formula), ConfigurationError);
}

TEST_CASE("Galilean boost shifts the first cumulant and the Wigner function") {
  const Grid g(-16.0, 16.0, 512);
  const double p0 = 0.75;
  const auto a = build({ModelKind::two_gaussian_superposition, {{"separation", 5.0}, {"sigma", 1.0}}}, g, unit);
  ComplexField boosted = a.psi();
  for (std::size_t j = 0; j < g.size(); ++j) boosted[j] *= std::polar(1.0, p0 * g.x(j));
  const WavefunctionGrid b(boosted, unit);
  const auto ka = conditional_cumulants(a, 1.0, 4, CumulantMethod::formula);
  const auto kb = conditional_cumulants(b, 1.0, 4, CumulantMethod::formula);
  CHECK(kb.kappa[0] - ka.kappa[0] == doctest::Approx(p0).epsilon(1e-8));
  for (int n = 1; n < 4; ++n) CHECK(kb.kappa[n] == doctest::Approx(ka.kappa[n]).epsilon(1e-8).scale(1.0));
  const auto wa = wigner_transform(a);
  const auto wb = wigner_transform(b);
  const double dp = wa.grid_p.dx();
  // p0 is not a lattice multiple in general; compare conditional means instead.
  const auto sa = conditional(wa, 1.0, 1e-14);
  const auto sb = conditional(wb, 1.0, 1e-14);
  CHECK(conditional_moment(sb, 1, false) - conditional_moment(sa, 1, false) == doctest::Approx(p0).epsilon(1e-7));
  CHECK(conditional_moment(sb, 2, true) == doctest::Approx(conditional_moment(sa, 2, true)).epsilon(1e-6));
  CHECK(dp > 0.0);
}

TEST_CASE("Wigner CSV export layout") {
  const Grid g(-8.0, 8.0, 64);
  const auto wg = wigner_transform(build({ModelKind::gaussian_packet, {{"sigma", 0.7}}}, g, unit));
  std::stringstream ss;
  export_csv(wg, ss);
  std::string line;
  std::size_t rows = 0;
  bool header = false;
  while (std::getline(ss, line)) {
    if (line.starts_with("#")) continue;
    if (!header) {
      CHECK(line == "x,p,w");
      header = true;
      continue;
    }
    ++rows;
  }
  CHECK(rows == g.size() * wg.grid_p.size());
}
