#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "weakvar/errors.hpp"
#include "weakvar/states.hpp"

namespace weakvar::states {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// A sign change marks a node when the bracketing densities are this small relative to max rho,
// or when they sit in a local dip of rho.
constexpr double kSignChangeDensity = 1e-3;

struct Run {
  std::size_t begin;
  std::size_t end;
};

std::vector<Run> runs_where(const std::vector<bool>& flags, bool value) {
  std::vector<Run> runs;
  std::size_t j = 0;
  while (j < flags.size()) {
    if (flags[j] != value) {
      ++j;
      continue;
    }
    const std::size_t begin = j;
    while (j < flags.size() && flags[j] == value) ++j;
    runs.push_back({begin, j});
  }
  return runs;
}

// One-sided slope of the phase at the edge of a run.
double edge_slope(const std::vector<double>& s, const Run& run, bool at_end, double dx) {
  if (run.end - run.begin < 2) return 0.0;
  if (at_end) return (s[run.end - 1] - s[run.end - 2]) / dx;
  return (s[run.begin + 1] - s[run.begin]) / dx;
}

}  // namespace

PolarFields polar_decompose(const WavefunctionGrid& state, std::optional<double> eps_node) {
  const auto& psi = state.psi();
  const Grid& grid = state.grid();
  const std::size_t n = grid.size();
  const double dx = grid.dx();

  PolarFields p{psi, RealField(grid), RealField(grid), RealField(grid), {}, {}, {}, {}, {}, 0.0, state.constants(),
                state.periodic()};
  double max_rho = 0.0;
  std::size_t anchor = 0;
  for (std::size_t j = 0; j < n; ++j) {
    p.amplitude[j] = std::abs(psi[j]);
    p.density[j] = std::norm(psi[j]);
    if (p.density[j] > max_rho) {
      max_rho = p.density[j];
      anchor = j;
    }
  }
  p.eps_node = eps_node.value_or(kDefaultRelativeEpsNode * max_rho);
  if (!(p.eps_node >= 0.0)) throw ConfigurationError("eps_node must be nonnegative");

  p.node_mask.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) p.node_mask[j] = p.density[j] < p.eps_node;
  const double sign_floor = kSignChangeDensity * max_rho;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double overlap = (psi[j] * std::conj(psi[j + 1])).real();
    const double pair = std::max(p.density[j], p.density[j + 1]);
    const bool dip = j >= 1 && j + 2 < n && pair < std::min(p.density[j - 1], p.density[j + 2]);
    if (overlap < 0.0 && (pair < sign_floor || dip)) {
      p.node_mask[j] = true;
      p.node_mask[j + 1] = true;
    }
  }

  p.singular_mask.assign(n, false);
  const double reach = static_cast<double>(kStencilReach) * dx;
  for (double xk : state.kinks()) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(grid.x(j) - xk) < reach) p.singular_mask[j] = true;
    }
  }

  bool any_valid = false;
  for (std::size_t j = 0; j < n; ++j) any_valid = any_valid || !p.masked(j);
  if (!any_valid) throw DegenerateStateError("every grid point is masked");

  for (const auto& r : runs_where(p.node_mask, true)) {
    if (r.begin > 0 && r.end < n) p.nodes.push_back({r.begin, r.end});
  }

  // Phase: unwrap each unmasked run, anchored at the global amplitude maximum, then reconcile
  // neighbouring runs outward from the anchor run.
  std::vector<double> s(n, kNaN);
  for (std::size_t j = 0; j < n; ++j)
    if (!p.node_mask[j]) s[j] = std::arg(psi[j]);
  const auto segs = runs_where(p.node_mask, false);
  std::size_t anchor_seg = 0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (anchor >= segs[k].begin && anchor < segs[k].end) anchor_seg = k;
  }
  std::vector<bool> reconciled(segs.size(), false);
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const auto& r = segs[k];
    const std::size_t local_anchor = (k == anchor_seg) ? anchor - r.begin : 0;
    auto amb = numerics::unwrap_in_place(std::span<double>(s.data() + r.begin, r.end - r.begin), local_anchor);
    for (auto a : amb) p.ambiguous_phase.push_back(a + r.begin);
  }
  auto reconcile = [&](std::size_t from, std::size_t to) {
    const Run& a = segs[from];
    const Run& b = segs[to];
    const bool rightward = to > from;
    const double slope_a = edge_slope(s, a, rightward, dx);
    const double slope_b = edge_slope(s, b, !rightward, dx);
    const std::size_t ia = rightward ? a.end - 1 : a.begin;
    const std::size_t ib = rightward ? b.begin : b.end - 1;
    const double gap = grid.x(ib) - grid.x(ia);
    if (std::abs(slope_a - slope_b) * std::abs(gap) >= 0.5 * std::numbers::pi) return;
    const double predicted = s[ia] + 0.5 * (slope_a + slope_b) * gap;
    const double shift = 2.0 * std::numbers::pi * std::round((predicted - s[ib]) / (2.0 * std::numbers::pi));
    for (std::size_t j = b.begin; j < b.end; ++j) s[j] += shift;
    reconciled[to] = true;
  };
  for (std::size_t k = anchor_seg + 1; k < segs.size(); ++k) reconcile(k - 1, k);
  for (std::size_t k = anchor_seg; k-- > 0;) reconcile(k + 1, k);
  for (std::size_t k = 0; k < segs.size(); ++k) p.segments.push_back({segs[k].begin, segs[k].end, reconciled[k]});
  std::sort(p.ambiguous_phase.begin(), p.ambiguous_phase.end());
  p.phase.values = std::move(s);
  return p;
}

LogDerivatives log_derivatives(const PolarFields& polar, DiffMethod method) {
  const Grid& grid = polar.grid();
  const std::size_t n = grid.size();
  LogDerivatives d{grid, std::vector<bool>(n), {}, {}, {}, {}};
  for (std::size_t j = 0; j < n; ++j) d.mask[j] = polar.masked(j);

  d.rho[0] = polar.density.values;
  std::array<std::vector<Complex>, 5> psi_k;
  psi_k[0] = polar.psi.values;
  for (int k = 1; k <= 4; ++k) {
    d.rho[k] = numerics::derivative(polar.density, k, method).values;
    psi_k[k] = numerics::derivative(polar.psi, k, method).values;
  }
  for (auto& v : d.log_rho) v.assign(n, kNaN);
  for (auto& v : d.log_psi) v.assign(n, Complex(kNaN, kNaN));
  for (std::size_t j = 0; j < n; ++j) {
    if (d.mask[j]) continue;
    std::array<double, 4> r{};
    std::array<Complex, 4> c{};
    for (int k = 0; k < 4; ++k) {
      r[k] = d.rho[k + 1][j] / d.rho[0][j];
      c[k] = psi_k[k + 1][j] / psi_k[0][j];
    }
    const auto lr = log_derivatives_from_ratios(r);
    const auto lc = log_derivatives_from_ratios(c);
    for (int k = 0; k < 4; ++k) {
      d.log_rho[k][j] = lr[k];
      d.log_psi[k][j] = lc[k];
    }
  }

  const int accuracy = method == DiffMethod::fd4 ? 4 : 8;
  for (auto& v : d.phase) v.assign(n, kNaN);
  std::vector<bool> masked(d.mask.begin(), d.mask.end());
  for (const auto& run : runs_where(masked, false)) {
    const std::size_t len = run.end - run.begin;
    std::span<const double> seg(polar.phase.values.data() + run.begin, len);
    for (int k = 1; k <= 3; ++k) {
      std::span<double> out(d.phase[k - 1].data() + run.begin, len);
      numerics::fd_derivative(seg, grid.dx(), k, accuracy, out);
    }
  }
  return d;
}

}  // namespace weakvar::states
