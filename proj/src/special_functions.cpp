#include "decomp/special_functions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "decomp/errors.hpp"

namespace decomp {
namespace {

constexpr double kEpsilon = 1e-15;
constexpr int kMaxIterations = 100000;

// log of x^a e^-x / Gamma(a), the common prefactor of both expansions.
double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

// P(a, x) by its power series; converges fast for x < a + 1.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEpsilon) break;
  }
  return sum * std::exp(log_prefactor(a, x));
}

// Q(a, x) by its continued fraction (modified Lentz); converges fast for x >= a + 1.
double upper_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEpsilon;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) break;
  }
  return std::exp(log_prefactor(a, x)) * h;
}

void check_arguments(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("incomplete gamma needs a > 0");
  if (!(x >= 0.0)) throw DomainError("incomplete gamma needs x >= 0");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  check_arguments(a, x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return x < a + 1.0 ? lower_series(a, x) : 1.0 - upper_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
  check_arguments(a, x);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return x < a + 1.0 ? 1.0 - lower_series(a, x) : upper_fraction(a, x);
}

double chi_square_upper_tail(double statistic, double df) {
  if (!(df > 0.0)) throw DomainError("chi-square needs df > 0, got " + std::to_string(df));
  if (!(statistic >= 0.0)) throw DomainError("chi-square statistic must be >= 0");
  return regularized_gamma_q(0.5 * df, 0.5 * statistic);
}

}  // namespace decomp
