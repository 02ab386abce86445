#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "weakvar/errors.hpp"
#include "weakvar/fft.hpp"
#include "weakvar/io.hpp"
#include "weakvar/states.hpp"

namespace weakvar::states {

namespace {

constexpr std::size_t kMinRows = 16;
constexpr double kSpacingTolerance = 1e-6;

enum class Schema { psi, polar };

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

double parse_number(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("cannot parse number '" + cell + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite sample '" + cell + "'", line);
  return v;
}

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 16;
  while (p < n) p <<= 1;
  return p;
}

// Trigonometric resampling of m samples onto big >= m samples over the same period.
std::vector<Complex> resample(const std::vector<Complex>& v, std::size_t big) {
  const std::size_t m = v.size();
  std::vector<Complex> spec(v);
  numerics::FftPlan(m).forward(spec);
  std::vector<Complex> padded(big, Complex{});
  const std::size_t pos = (m + 1) / 2;  // non-negative frequencies 0..pos-1
  for (std::size_t k = 0; k < pos; ++k) padded[k] = spec[k];
  for (std::size_t k = pos; k < m; ++k) padded[big - (m - k)] = spec[k];
  if (m % 2 == 0) {
    // Split the Nyquist coefficient symmetrically.
    const Complex nyq = spec[m / 2];
    padded[big - m / 2] = 0.5 * nyq;
    padded[m / 2] = 0.5 * nyq;
  }
  numerics::FftPlan(big).inverse(padded);
  const double scale = static_cast<double>(big) / static_cast<double>(m);
  for (auto& c : padded) c *= scale;
  return padded;
}

}  // namespace

void export_csv(const WavefunctionGrid& state, std::ostream& out) {
  out << "x,re_psi,im_psi\n";
  const auto& g = state.grid();
  for (std::size_t j = 0; j < g.size(); ++j) {
    out << io::format_double(g.x(j)) << ',' << io::format_double(state.psi()[j].real()) << ','
        << io::format_double(state.psi()[j].imag()) << '\n';
  }
}

WavefunctionGrid ingest(std::istream& in, const PhysicalConstants& constants) {
  std::string line;
  std::size_t line_no = 0;
  Schema schema = Schema::psi;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t);
    if (cols == std::vector<std::string>{"x", "re_psi", "im_psi"}) {
      schema = Schema::psi;
    } else if (cols == std::vector<std::string>{"x", "rho", "S"}) {
      schema = Schema::polar;
    } else {
      throw ParseError("header must be 'x,re_psi,im_psi' or 'x,rho,S'", line_no);
    }
    have_header = true;
  }
  if (!have_header) throw ParseError("missing header row", line_no);

  std::vector<double> xs;
  std::vector<Complex> values;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t);
    if (cols.size() != 3) throw ParseError("expected 3 columns, found " + std::to_string(cols.size()), line_no);
    const double x = parse_number(cols[0], line_no);
    const double a = parse_number(cols[1], line_no);
    const double b = parse_number(cols[2], line_no);
    if (!xs.empty() && !(x > xs.back())) throw ParseError("x is not strictly increasing", line_no);
    if (schema == Schema::polar) {
      if (a < 0.0) throw ParseError("negative density", line_no);
      values.push_back(std::polar(std::sqrt(a), b));
    } else {
      values.emplace_back(a, b);
    }
    xs.push_back(x);
    lines.push_back(line_no);
  }
  if (xs.size() < kMinRows)
    throw ParseError("need at least " + std::to_string(kMinRows) + " samples, found " + std::to_string(xs.size()), line_no);

  const std::size_t m = xs.size();
  const double dx = (xs.back() - xs.front()) / static_cast<double>(m - 1);
  for (std::size_t j = 1; j < m; ++j) {
    if (std::abs((xs[j] - xs[j - 1]) - dx) > kSpacingTolerance * dx)
      throw ParseError("non-uniform x spacing", lines[j]);
  }
  const double x_max = xs.front() + static_cast<double>(m) * dx;
  if (numerics::is_power_of_two(m)) {
    return WavefunctionGrid(ComplexField(Grid(xs.front(), x_max, m), std::move(values)), constants);
  }
  const std::size_t big = next_power_of_two(m);
  return WavefunctionGrid(ComplexField(Grid(xs.front(), x_max, big), resample(values, big)), constants);
}

WavefunctionGrid ingest(const std::filesystem::path& path, const PhysicalConstants& constants) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open input file " + path.string());
  return ingest(in, constants);
}

}  // namespace weakvar::states
