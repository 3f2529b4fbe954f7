#pragma once

namespace decomp {

/// Regularized lower incomplete gamma P(a, x); a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// P{chi^2_df >= statistic}.
double chi_square_upper_tail(double statistic, double df);

}  // namespace decomp
