#include "weakvar/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace weakvar::special {

double hermite(int n, double y) {
  if (n < 0) return 0.0;
  double h_prev = 1.0;
  if (n == 0) return h_prev;
  double h = 2.0 * y;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * y * h - 2.0 * k * h_prev;
    h_prev = h;
    h = next;
  }
  return h;
}

double hermite_function(int n, double y) {
  double prev = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * y * y);
  if (n == 0) return prev;
  double cur = std::sqrt(2.0) * y * prev;
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_log_derivative(int n, double y) {
  const double h = hermite(n, y);
  return 2.0 * n * hermite(n - 1, y) / h;
}

double hermite_log_second_derivative(int n, double y) {
  const double h = hermite(n, y);
  if (h == 0.0) return -std::numeric_limits<double>::infinity();
  const double d1 = 2.0 * n * hermite(n - 1, y) / h;
  const double d2 = 4.0 * n * (n - 1) * hermite(n - 2, y) / h;
  return d2 - d1 * d1;
}

double laguerre(int k, double alpha, double y) {
  if (k < 0) return 0.0;
  double l_prev = 1.0;
  if (k == 0) return l_prev;
  double l = 1.0 + alpha - y;
  for (int j = 1; j < k; ++j) {
    const double next = ((2.0 * j + 1.0 + alpha - y) * l - (j + alpha) * l_prev) / (j + 1.0);
    l_prev = l;
    l = next;
  }
  return l;
}

}  // namespace weakvar::special
