#pragma once

namespace weakvar::special {

/// Physicists' Hermite polynomial H_n(y) by three-term recurrence.
double hermite(int n, double y);

/// Normalized Hermite function pi^(-1/4) (2^n n!)^(-1/2) H_n(y) exp(-y^2/2), stable for large n.
double hermite_function(int n, double y);

/// d^2/dy^2 ln H_n(y); -inf at an exact zero of H_n.
double hermite_log_second_derivative(int n, double y);

/// d/dy ln H_n(y).
double hermite_log_derivative(int n, double y);

/// Generalized Laguerre polynomial L_k^(alpha)(y) by three-term recurrence; zero for k < 0.
double laguerre(int k, double alpha, double y);

}  // namespace weakvar::special
