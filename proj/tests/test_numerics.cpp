#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "weakvar/errors.hpp"
#include "weakvar/numerics.hpp"
#include "weakvar/special.hpp"

using namespace weakvar;
using namespace weakvar::numerics;

namespace {

constexpr double pi = std::numbers::pi;

RealField sample(const Grid& g, auto f) {
  RealField out(g);
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = f(g.x(j));
  return out;
}

double wrap(double a) { return std::remainder(a, 2.0 * pi); }

}  // namespace

TEST_CASE("grid rejects sizes that are not powers of two") {
  CHECK_THROWS_AS(Grid(0.0, 1.0, 100), ConfigurationError);
  CHECK_THROWS_AS(Grid(0.0, 1.0, 8), ConfigurationError);
  CHECK_THROWS_AS(Grid(1.0, 0.0, 64), ConfigurationError);
  const Grid g(-2.0, 2.0, 64);
  CHECK(g.dx() == doctest::Approx(4.0 / 64));
  CHECK(g.nearest_index(0.0) == 32);
  CHECK(g.nearest_index(-100.0) == 0);
  CHECK(g.nearest_index(100.0) == 63);
}

TEST_CASE("spectral first derivative of sin is exact") {
  const Grid g(0.0, 2.0 * pi, 128);
  const double k = 3.0;
  const auto f = sample(g, [&](double x) { return std::sin(k * x); });
  const auto d = derivative(f, 1);
  double err = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) err = std::max(err, std::abs(d[j] - k * std::cos(k * g.x(j))));
  CHECK(err < 1e-10);
}

TEST_CASE("fd4 second derivative of x^2 is 2 in the interior") {
  const Grid g(-1.0, 1.0, 64);
  const auto f = sample(g, [](double x) { return x * x; });
  const auto d = derivative(f, 2, DiffMethod::fd4);
  for (std::size_t j = 3; j + 3 < g.size(); ++j) CHECK(d[j] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("spectral second derivative of a Gaussian") {
  const Grid g(-8.0, 8.0, 256);
  const auto f = sample(g, [](double x) { return std::exp(-0.5 * x * x); });
  const auto d = derivative(f, 2);
  double err = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.x(j);
    err = std::max(err, std::abs(d[j] - (x * x - 1.0) * std::exp(-0.5 * x * x)));
  }
  CHECK(err < 1e-9);
}

TEST_CASE("fd8 derivatives of a Gaussian up to fourth order") {
  const Grid g(-8.0, 8.0, 1024);
  const auto f = sample(g, [](double x) { return std::exp(-0.5 * x * x); });
  for (int order = 1; order <= 4; ++order) {
    const auto d = derivative(f, order, DiffMethod::fd8);
    double err = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double x = g.x(j);
      // He_n(x) e^{-x^2/2} with sign (-1)^n.
      const double he = special::hermite(order, x / std::sqrt(2.0)) * std::pow(2.0, -0.5 * order);
      const double exact = (order % 2 ? -1.0 : 1.0) * he * std::exp(-0.5 * x * x);
      err = std::max(err, std::abs(d[j] - exact));
    }
    CHECK(err < 1e-7);
  }
}

TEST_CASE("composition of first derivatives matches the second derivative") {
  const Grid g(-10.0, 10.0, 512);
  const auto f = sample(g, [](double x) { return std::exp(-0.3 * x * x) * std::cos(1.5 * x); });
  for (auto method : {DiffMethod::spectral, DiffMethod::fd8}) {
    const auto dd = derivative(derivative(f, 1, method), 1, method);
    const auto d2 = derivative(f, 2, method);
    double err = 0.0;
    for (std::size_t j = 8; j + 8 < g.size(); ++j) err = std::max(err, std::abs(dd[j] - d2[j]));
    CHECK(err < 1e-6);
  }
}

TEST_CASE("derivative is linear") {
  const Grid g(-10.0, 10.0, 256);
  const auto f = sample(g, [](double x) { return std::exp(-x * x); });
  const auto h = sample(g, [](double x) { return std::exp(-0.5 * (x - 1) * (x - 1)); });
  RealField sum(g);
  for (std::size_t j = 0; j < g.size(); ++j) sum[j] = 2.0 * f[j] - 3.0 * h[j];
  for (auto method : {DiffMethod::spectral, DiffMethod::fd4, DiffMethod::fd8}) {
    const auto ds = derivative(sum, 1, method);
    const auto df = derivative(f, 1, method);
    const auto dh = derivative(h, 1, method);
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(ds[j] == doctest::Approx(2.0 * df[j] - 3.0 * dh[j]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("fd_weights reproduce the classical centred stencil") {
  const std::vector<double> nodes{-1.0, 0.0, 1.0};
  const auto w = fd_weights(0.0, nodes, 2);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(-2.0));
  CHECK(w[2] == doctest::Approx(1.0));
}

TEST_CASE("integrate examples") {
  CHECK(integrate(RealField(Grid(0.0, 1.0, 64), std::vector<double>(64, 1.0))) == doctest::Approx(1.0).epsilon(1e-15));
  const double sigma = 0.7;
  const Grid g(-8.0 * sigma, 8.0 * sigma, 512);
  const auto gauss = sample(g, [&](double x) { return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * pi)); });
  CHECK(std::abs(integrate(gauss) - 1.0) < 1e-12);
  const auto odd = sample(Grid(-8.0, 8.0, 512), [](double x) { return x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi); });
  CHECK(std::abs(integrate(odd)) < 1e-12);
}

TEST_CASE("Parseval: spectral momentum norm equals the position norm") {
  const Grid g(-20.0, 20.0, 1024);
  ComplexField psi(g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.x(j);
    psi[j] = std::exp(-0.5 * (x - 1.0) * (x - 1.0)) * std::polar(1.0, 0.8 * x) + 0.3 * std::exp(-(x + 3) * (x + 3));
  }
  RealField rho(g);
  for (std::size_t j = 0; j < g.size(); ++j) rho[j] = std::norm(psi[j]);
  const auto mom = momentum_moments(psi, 1.0);
  CHECK(mom.norm == doctest::Approx(integrate(rho)).epsilon(1e-12));
  const auto md = momentum_density(psi, 1.0, 4);
  double sum = 0.0;
  for (double v : md.density) sum += v;
  CHECK(sum * md.grid_p.dx() == doctest::Approx(integrate(rho)).epsilon(1e-10));
}

TEST_CASE("unwrap recovers a linear phase spanning several turns") {
  const Grid g(0.0, 1.0, 256);
  const double k = 6.0 * pi;
  const auto wrapped = sample(g, [&](double x) { return wrap(k * x); });
  const auto u = unwrap_phase(wrapped, 0);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(u.phase[j] == doctest::Approx(k * g.x(j)).epsilon(1e-14).scale(1.0));
  CHECK(u.ambiguous.empty());
}

TEST_CASE("unwrap leaves a constant phase unchanged") {
  const Grid g(0.0, 1.0, 64);
  const auto c = sample(g, [](double) { return 1.25; });
  const auto u = unwrap_phase(c, 10);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(u.phase[j] == 1.25);
}

TEST_CASE("unwrap recovers a quadratic chirp") {
  const Grid g(-4.0, 4.0, 2048);
  auto S = [](double x) { return 3.0 * x * x + 0.5 * x; };
  const auto wrapped = sample(g, [&](double x) { return wrap(S(x)); });
  const std::size_t anchor = g.nearest_index(0.0);
  const auto u = unwrap_phase(wrapped, anchor);
  const double offset = S(g.x(anchor)) - u.phase[anchor];
  double err = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) err = std::max(err, std::abs(u.phase[j] + offset - S(g.x(j))));
  CHECK(err < 1e-10);
}

TEST_CASE("unwrap reports exact half-turn jumps as ambiguous") {
  std::vector<double> theta{0.0, pi, 0.0};
  const auto amb = unwrap_in_place(theta, 0);
  CHECK(amb.size() >= 1);
}

TEST_CASE("local interpolation of a smooth function") {
  const Grid g(-10.0, 10.0, 512);
  const auto f = sample(g, [](double x) { return std::exp(-0.5 * x * x) * std::sin(2.0 * x); });
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int i = 0; i < 50; ++i) {
    const double x = u(rng);
    CHECK(std::abs(interpolate(f, x) - std::exp(-0.5 * x * x) * std::sin(2.0 * x)) < 1e-10);
  }
}

TEST_CASE("band-limited interpolation of a periodic function") {
  const Grid g(0.0, 2.0 * pi, 64);
  ComplexField f(g);
  for (std::size_t j = 0; j < g.size(); ++j) f[j] = std::polar(1.0, 5.0 * g.x(j));
  const BandLimited b(f);
  for (double x : {0.1, 1.3, 4.9}) {
    CHECK(std::abs(b(x) - std::polar(1.0, 5.0 * x)) < 1e-12);
    CHECK(std::abs(b.derivative(x) - Complex(0.0, 5.0) * std::polar(1.0, 5.0 * x)) < 1e-11);
  }
}

TEST_CASE("momentum moments of a boosted Gaussian") {
  const Grid g(-20.0, 20.0, 1024);
  const double sigma = 1.3;
  const double p0 = 0.9;
  ComplexField psi(g);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double x = g.x(j);
    psi[j] = std::exp(-x * x / (4 * sigma * sigma)) * std::polar(1.0, p0 * x);
  }
  const auto m = momentum_moments(psi, 1.0);
  CHECK(m.mean / m.norm == doctest::Approx(p0).epsilon(1e-12));
  CHECK(m.variance() == doctest::Approx(1.0 / (4 * sigma * sigma)).epsilon(1e-12));
}

TEST_CASE("special functions") {
  CHECK(special::hermite(0, 0.3) == 1.0);
  CHECK(special::hermite(3, 0.5) == doctest::Approx(8 * 0.125 - 12 * 0.5));
  CHECK(special::laguerre(2, 1.0, 0.4) == doctest::Approx(0.5 * (0.16 - 6 * 0.4 + 6)));
  // d^2/dy^2 ln(2y) = -1/y^2.
  CHECK(special::hermite_log_second_derivative(1, 0.5) == doctest::Approx(-4.0));
  CHECK(std::isinf(special::hermite_log_second_derivative(1, 0.0)));
  double norm = 0.0;
  for (int j = -4000; j < 4000; ++j) norm += std::pow(special::hermite_function(20, j * 0.005), 2) * 0.005;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
}
