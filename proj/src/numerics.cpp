#include "weakvar/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "weakvar/errors.hpp"
#include "weakvar/fft.hpp"

namespace weakvar::numerics {

namespace {

constexpr int kLagrangePoints = 16;

double wrap_to_pi(double d) {
  // Result in (-pi, pi].
  const double two_pi = 2.0 * std::numbers::pi;
  d = std::remainder(d, two_pi);
  if (d <= -std::numbers::pi) d += two_pi;
  return d;
}

void check_order(int order) {
  if (order < 1 || order > 4) throw ConfigurationError("derivative order must be 1..4, got " + std::to_string(order));
}

int centered_half_width(int order, int accuracy) { return (order + accuracy - 1) / 2; }

template <class T>
void fd_apply(std::span<const T> f, double dx, int order, int accuracy, std::span<T> out) {
  check_order(order);
  const auto n = static_cast<long>(f.size());
  if (out.size() != f.size()) throw ConfigurationError("fd_derivative: output size mismatch");
  if (n == 0) return;
  if (n == 1) {
    out[0] = T{};
    return;
  }
  const double scale = 1.0 / std::pow(dx, order);
  const long half = centered_half_width(order, accuracy);

  auto apply_window = [&](long j, long start, long width) {
    std::vector<double> nodes(static_cast<std::size_t>(width));
    for (long i = 0; i < width; ++i) nodes[static_cast<std::size_t>(i)] = static_cast<double>(start + i - j);
    const int eff_order = std::min<int>(order, static_cast<int>(width) - 1);
    if (eff_order < order) {
      out[static_cast<std::size_t>(j)] = T{};
      return;
    }
    const auto w = fd_weights(0.0, nodes, order);
    T acc{};
    for (long i = 0; i < width; ++i) acc += w[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(start + i)];
    out[static_cast<std::size_t>(j)] = acc * scale;
  };

  if (n < 2 * half + 1) {
    for (long j = 0; j < n; ++j) apply_window(j, 0, n);
    return;
  }

  std::vector<double> nodes(static_cast<std::size_t>(2 * half + 1));
  for (long i = -half; i <= half; ++i) nodes[static_cast<std::size_t>(i + half)] = static_cast<double>(i);
  const auto centered = fd_weights(0.0, nodes, order);
  for (long j = half; j < n - half; ++j) {
    T acc{};
    for (long i = -half; i <= half; ++i) acc += centered[static_cast<std::size_t>(i + half)] * f[static_cast<std::size_t>(j + i)];
    out[static_cast<std::size_t>(j)] = acc * scale;
  }
  const long width = std::min<long>(n, order + accuracy);
  for (long j = 0; j < half; ++j) apply_window(j, 0, width);
  for (long j = n - half; j < n; ++j) apply_window(j, n - width, width);
}

std::vector<Complex> spectral_derivative(std::span<const Complex> f, double dx, int order) {
  check_order(order);
  const std::size_t n = f.size();
  if (!is_power_of_two(n)) throw ConfigurationError("spectral derivative requires a power-of-two grid");
  std::vector<Complex> data(f.begin(), f.end());
  const FftPlan plan(n);
  plan.forward(data);
  const auto k = wavenumbers(n, dx);
  const Complex i_unit(0.0, 1.0);
  for (std::size_t m = 0; m < n; ++m) {
    if (m == n / 2 && order % 2 == 1) {
      data[m] = 0.0;
      continue;
    }
    data[m] *= std::pow(i_unit * k[m], order);
  }
  plan.inverse(data);
  return data;
}

std::vector<double> lagrange_weights(std::span<const double> nodes, double z) {
  std::vector<double> w(nodes.size(), 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (k != i) w[i] *= (z - nodes[k]) / (nodes[i] - nodes[k]);
    }
  }
  return w;
}

template <class T>
T interpolate_impl(const Field<T>& f, double x, bool periodic) {
  const auto n = static_cast<long>(f.size());
  const double t = (x - f.grid.x_min()) / f.grid.dx();
  const double fl = std::floor(t);
  if (!periodic && t >= 0.0 && t <= static_cast<double>(n - 1) && fl == t) return f.values[static_cast<std::size_t>(fl)];
  long start = static_cast<long>(fl) - kLagrangePoints / 2 + 1;
  if (!periodic) start = std::clamp<long>(start, 0, n - kLagrangePoints);
  std::vector<double> nodes(kLagrangePoints);
  for (int i = 0; i < kLagrangePoints; ++i) nodes[static_cast<std::size_t>(i)] = static_cast<double>(start + i);
  const auto w = lagrange_weights(nodes, t);
  T acc{};
  for (int i = 0; i < kLagrangePoints; ++i) {
    long idx = start + i;
    if (periodic) idx = ((idx % n) + n) % n;
    acc += w[static_cast<std::size_t>(i)] * f.values[static_cast<std::size_t>(idx)];
  }
  return acc;
}

}  // namespace

Grid::Grid(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n), dx_(0.0) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min))
    throw ConfigurationError("grid requires finite x_min < x_max");
  if (n < 16 || !is_power_of_two(n))
    throw ConfigurationError("grid size must be a power of two >= 16, got " + std::to_string(n));
  dx_ = (x_max - x_min) / static_cast<double>(n);
}

std::vector<double> Grid::points() const {
  std::vector<double> xs(n_);
  for (std::size_t j = 0; j < n_; ++j) xs[j] = x(j);
  return xs;
}

std::size_t Grid::nearest_index(double x) const noexcept {
  const double t = std::round((x - x_min_) / dx_);
  if (!(t > 0.0)) return 0;
  if (t >= static_cast<double>(n_ - 1)) return n_ - 1;
  return static_cast<std::size_t>(t);
}

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

template <class T>
Field<T>::Field(const Grid& g, std::vector<T> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.size())
    throw ConfigurationError("field has " + std::to_string(values.size()) + " samples for a grid of " +
                             std::to_string(grid.size()));
}

template struct Field<double>;
template struct Field<Complex>;

int accuracy_order(DiffMethod method) {
  switch (method) {
    case DiffMethod::fd4: return 4;
    case DiffMethod::fd8: return 8;
    case DiffMethod::spectral: break;
  }
  throw ConfigurationError("spectral differentiation has no finite-difference accuracy order");
}

std::vector<double> fd_weights(double z, std::span<const double> nodes, int order) {
  const std::size_t np = nodes.size();
  if (np == 0 || order < 0 || static_cast<std::size_t>(order) >= np)
    throw ConfigurationError("fd_weights: need more nodes than the derivative order");
  const auto m = static_cast<std::size_t>(order);
  std::vector<std::vector<double>> c(np, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < np; ++i) {
    const std::size_t mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k)
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(np);
  for (std::size_t i = 0; i < np; ++i) w[i] = c[i][m];
  return w;
}

void fd_derivative(std::span<const double> f, double dx, int order, int accuracy, std::span<double> out) {
  fd_apply<double>(f, dx, order, accuracy, out);
}

void fd_derivative(std::span<const Complex> f, double dx, int order, int accuracy, std::span<Complex> out) {
  fd_apply<Complex>(f, dx, order, accuracy, out);
}

RealField derivative(const RealField& f, int order, DiffMethod method) {
  RealField out(f.grid);
  if (method == DiffMethod::spectral) {
    std::vector<Complex> c(f.values.begin(), f.values.end());
    const auto d = spectral_derivative(c, f.grid.dx(), order);
    for (std::size_t j = 0; j < d.size(); ++j) out[j] = d[j].real();
    return out;
  }
  fd_derivative(f.values, f.grid.dx(), order, accuracy_order(method), out.values);
  return out;
}

ComplexField derivative(const ComplexField& f, int order, DiffMethod method) {
  if (method == DiffMethod::spectral) return ComplexField(f.grid, spectral_derivative(f.values, f.grid.dx(), order));
  ComplexField out(f.grid);
  fd_derivative(f.values, f.grid.dx(), order, accuracy_order(method), out.values);
  return out;
}

double integrate(std::span<const double> values, double dx) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum * dx;
}

double integrate(const RealField& f) { return integrate(f.values, f.grid.dx()); }

std::vector<std::size_t> unwrap_in_place(std::span<double> theta, std::size_t anchor) {
  std::vector<std::size_t> ambiguous;
  const std::size_t n = theta.size();
  if (n == 0) return ambiguous;
  if (anchor >= n) throw RangeError("unwrap anchor outside the sample range");
  const std::vector<double> raw(theta.begin(), theta.end());
  auto step = [&](std::size_t lo, std::size_t hi) {
    const double d = raw[hi] - raw[lo];
    const double w = wrap_to_pi(d);
    if (std::abs(std::abs(w) - std::numbers::pi) <= 1e-12) {
      ambiguous.push_back(hi);
      // Tie between +pi and -pi: keep the raw increment when it is one of them.
      if (std::abs(std::abs(d) - std::numbers::pi) <= 1e-12) return d;
    }
    return w;
  };
  for (std::size_t j = anchor + 1; j < n; ++j) theta[j] = theta[j - 1] + step(j - 1, j);
  for (std::size_t j = anchor; j-- > 0;) theta[j] = theta[j + 1] - step(j, j + 1);
  std::sort(ambiguous.begin(), ambiguous.end());
  return ambiguous;
}

UnwrappedPhase unwrap_phase(const RealField& theta, std::size_t anchor) {
  UnwrappedPhase result{theta, {}};
  result.ambiguous = unwrap_in_place(result.phase.values, anchor);
  return result;
}

Complex interpolate(const ComplexField& f, double x, bool periodic) { return interpolate_impl(f, x, periodic); }

double interpolate(const RealField& f, double x, bool periodic) { return interpolate_impl(f, x, periodic); }

std::vector<Complex> half_cell_samples(const ComplexField& f, bool periodic) {
  const auto n = static_cast<long>(f.size());
  constexpr long half = kLagrangePoints / 2;
  std::vector<double> nodes(kLagrangePoints);
  for (long i = 0; i < kLagrangePoints; ++i) nodes[static_cast<std::size_t>(i)] = static_cast<double>(i - half + 1);
  const auto w = lagrange_weights(nodes, 0.5);
  std::vector<Complex> out(static_cast<std::size_t>(n));
  for (long j = 0; j < n; ++j) {
    Complex acc{};
    for (long i = 0; i < kLagrangePoints; ++i) {
      long idx = j + i - half + 1;
      if (periodic) {
        idx = ((idx % n) + n) % n;
      } else if (idx < 0 || idx >= n) {
        continue;
      }
      acc += w[static_cast<std::size_t>(i)] * f.values[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

BandLimited::BandLimited(const ComplexField& f) : grid_(f.grid), coeffs_(f.values), k_(wavenumbers(f.size(), f.grid.dx())) {
  const FftPlan plan(coeffs_.size());
  plan.forward(coeffs_);
  const double inv = 1.0 / static_cast<double>(coeffs_.size());
  for (auto& c : coeffs_) c *= inv;
}

Complex BandLimited::operator()(double x) const {
  const double u = x - grid_.x_min();
  const std::size_t nyq = coeffs_.size() / 2;
  Complex acc{};
  for (std::size_t m = 0; m < coeffs_.size(); ++m) {
    if (m == nyq) {
      acc += coeffs_[m] * std::cos(k_[m] * u);
    } else {
      acc += coeffs_[m] * std::polar(1.0, k_[m] * u);
    }
  }
  return acc;
}

Complex BandLimited::derivative(double x) const {
  const double u = x - grid_.x_min();
  const std::size_t nyq = coeffs_.size() / 2;
  Complex acc{};
  for (std::size_t m = 0; m < coeffs_.size(); ++m) {
    if (m == nyq) continue;
    acc += coeffs_[m] * Complex(0.0, k_[m]) * std::polar(1.0, k_[m] * u);
  }
  return acc;
}

std::vector<double> wavenumbers(std::size_t n, double dx) {
  std::vector<double> k(n);
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * dx);
  for (std::size_t m = 0; m < n; ++m) {
    const auto s = static_cast<long>(m);
    const long signed_m = (m < n / 2) ? s : s - static_cast<long>(n);
    k[m] = base * static_cast<double>(signed_m);
  }
  return k;
}

MomentumDensity momentum_density(const ComplexField& psi, double hbar, std::size_t padding) {
  if (padding == 0 || !is_power_of_two(padding)) throw ConfigurationError("momentum padding must be a power of two");
  const std::size_t n = psi.size();
  const std::size_t big = n * padding;
  const double dx = psi.grid.dx();
  std::vector<Complex> data(big, Complex{});
  std::copy(psi.values.begin(), psi.values.end(), data.begin());
  const FftPlan plan(big);
  plan.forward(data);
  const double p_max = std::numbers::pi * hbar / dx;
  MomentumDensity out{Grid(-p_max, p_max, big), std::vector<double>(big)};
  const double scale = dx * dx / (2.0 * std::numbers::pi * hbar);
  for (std::size_t m = 0; m < big; ++m) {
    const std::size_t src = (m + big / 2) % big;
    out.density[m] = std::norm(data[src]) * scale;
  }
  return out;
}

MomentumMoments momentum_moments(const ComplexField& psi, double hbar) {
  const std::size_t n = psi.size();
  std::vector<Complex> data(psi.values);
  const FftPlan plan(n);
  plan.forward(data);
  const auto k = wavenumbers(n, psi.grid.dx());
  MomentumMoments mom{0.0, 0.0, 0.0};
  // Weights dx/n make the norm equal to dx * sum |psi_j|^2 by Parseval.
  const double w = psi.grid.dx() / static_cast<double>(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double a = std::norm(data[m]) * w;
    const double p = hbar * k[m];
    mom.norm += a;
    if (m != n / 2) mom.mean += p * a;
    mom.second += p * p * a;
  }
  return mom;
}

}  // namespace weakvar::numerics
