#include "weakvar/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "weakvar/errors.hpp"
#include "weakvar/fft.hpp"
#include "weakvar/io.hpp"
#include "weakvar/parallel.hpp"

namespace weakvar::wigner {

namespace {
constexpr double kBoundaryDecay = 1e-8;
}

double WignerGrid::min() const { return *std::min_element(W.begin(), W.end()); }

WignerGrid wigner_transform(const WavefunctionGrid& state) {
  const auto& psi = state.psi();
  const Grid& gx = state.grid();
  const std::size_t n = gx.size();
  const bool periodic = state.periodic();
  if (!periodic && state.boundary_amplitude() >= kBoundaryDecay)
    throw DomainTooSmallError("Wigner transform needs |psi| < 1e-8 at the grid boundary");

  const double h = gx.dx();
  const double hbar = state.constants().hbar;
  const std::size_t m = 2 * n;
  const double p_max = std::numbers::pi * hbar / h;
  WignerGrid wg{gx, Grid(-p_max, p_max, m), std::vector<double>(n * m), 0.0};

  // Samples on the half-spaced lattice: even entries are psi_j, odd entries psi(x_j + h/2).
  const auto half = numerics::half_cell_samples(psi, periodic);
  std::vector<Complex> fine(m);
  for (std::size_t j = 0; j < n; ++j) {
    fine[2 * j] = psi[j];
    fine[2 * j + 1] = half[j];
  }

  const numerics::FftPlan plan(m);
  const double scale = h / (2.0 * std::numbers::pi * hbar);
  const auto lm = static_cast<long>(m);
  const auto ln = static_cast<long>(n);
  std::vector<double> residues(n, 0.0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<Complex> buf(m);
    for (std::size_t j = begin; j < end; ++j) {
      const long centre = 2 * static_cast<long>(j);
      for (long k = -ln; k < ln; ++k) {
        long a = centre + k;
        long b = centre - k;
        Complex c{};
        if (periodic) {
          a = ((a % lm) + lm) % lm;
          b = ((b % lm) + lm) % lm;
          c = fine[static_cast<std::size_t>(a)] * std::conj(fine[static_cast<std::size_t>(b)]);
        } else if (a >= 0 && a < lm && b >= 0 && b < lm) {
          c = fine[static_cast<std::size_t>(a)] * std::conj(fine[static_cast<std::size_t>(b)]);
        }
        buf[static_cast<std::size_t>((k + lm) % lm)] = c;
      }
      plan.forward(buf);
      double* row = wg.W.data() + j * m;
      double residue = 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        const Complex v = buf[(q + n) % m] * scale;
        row[q] = v.real();
        residue = std::max(residue, std::abs(v.imag()));
      }
      residues[j] = residue;
    }
  });
  wg.imag_residue = *std::max_element(residues.begin(), residues.end());
  return wg;
}

RealField marginal_x(const WignerGrid& wg) {
  RealField out(wg.grid_x);
  const double dp = wg.grid_p.dx();
  for (std::size_t i = 0; i < wg.grid_x.size(); ++i) out[i] = numerics::integrate(wg.row(i), dp);
  return out;
}

RealField marginal_p(const WignerGrid& wg) {
  RealField out(wg.grid_p);
  const std::size_t np = wg.grid_p.size();
  for (std::size_t i = 0; i < wg.grid_x.size(); ++i) {
    const auto r = wg.row(i);
    for (std::size_t k = 0; k < np; ++k) out[k] += r[k];
  }
  for (auto& v : out.values) v *= wg.grid_x.dx();
  return out;
}

ConditionalSlice conditional(const WignerGrid& wg, double x, double eps_node) {
  const std::size_t i = wg.grid_x.nearest_index(x);
  const auto r = wg.row(i);
  const double rho = numerics::integrate(r, wg.grid_p.dx());
  if (!(rho >= eps_node) || rho <= 0.0)
    throw NodeUndefinedError("position density " + io::format_double(rho) + " at x = " +
                             io::format_double(wg.grid_x.x(i)) + " is below the node threshold");
  ConditionalSlice s{wg.grid_x.x(i), i, rho, RealField(wg.grid_p), true};
  for (std::size_t k = 0; k < r.size(); ++k) s.values[k] = r[k] / rho;
  return s;
}

double conditional_moment(const ConditionalSlice& slice, int order, bool central) {
  if (!slice.normalized) throw ConfigurationError("conditional moments need a normalized slice");
  if (order < 0) throw ConfigurationError("moment order must be nonnegative");
  const Grid& gp = slice.values.grid;
  const double dp = gp.dx();
  double shift = 0.0;
  if (central) {
    for (std::size_t k = 0; k < gp.size(); ++k) shift += gp.x(k) * slice.values[k];
    shift *= dp;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < gp.size(); ++k) acc += std::pow(gp.x(k) - shift, order) * slice.values[k];
  return acc * dp;
}

void export_csv(const WignerGrid& wg, std::ostream& out, std::size_t stride_x, std::size_t stride_p) {
  if (stride_x == 0 || stride_p == 0) throw ConfigurationError("export strides must be positive");
  out << "# n_x=" << wg.grid_x.size() << " x_min=" << io::format_double(wg.grid_x.x_min())
      << " x_max=" << io::format_double(wg.grid_x.x_max()) << " stride_x=" << stride_x << '\n';
  out << "# n_p=" << wg.grid_p.size() << " p_min=" << io::format_double(wg.grid_p.x_min())
      << " p_max=" << io::format_double(wg.grid_p.x_max()) << " stride_p=" << stride_p << '\n';
  out << "x,p,w\n";
  for (std::size_t i = 0; i < wg.grid_x.size(); i += stride_x) {
    const auto r = wg.row(i);
    const std::string xs = io::format_double(wg.grid_x.x(i));
    for (std::size_t k = 0; k < r.size(); k += stride_p)
      out << xs << ',' << io::format_double(wg.grid_p.x(k)) << ',' << io::format_double(r[k]) << '\n';
  }
}

}  // namespace weakvar::wigner
