#include "decomp/core_model.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace decomp {
namespace {

void require_positive_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda <= 0.0) {
    throw DomainError("lambda must be finite and positive, got " + std::to_string(lambda));
  }
}

void require_unit_interval(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("s must lie in [0, 1], got " + std::to_string(s));
  }
}

double pgf(double lambda, double s) { return std::exp(lambda * (s - 1.0)); }

double compose(double lambda, std::uint64_t n, double s) {
  for (std::uint64_t i = 0; i < n; ++i) s = pgf(lambda, s);
  return s;
}

double chain_derivative(double lambda, std::uint64_t n, double s) {
  double value = s;
  double derivative = 1.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double f = pgf(lambda, value);
    derivative *= lambda * f;
    value = f;
  }
  return derivative;
}

// (x^n - 1)/(x - 1). Near x = 1 the direct form cancels, so switch to expm1.
double geometric_sum(double x, double n) {
  const double excess = x - 1.0;
  if (excess < 1e-2) return std::expm1(n * std::log1p(excess)) / excess;
  return (std::pow(x, n) - 1.0) / excess;
}

}  // namespace

OffspringModel::OffspringModel(double lambda) : lambda_(lambda) {
  if (!std::isfinite(lambda) || lambda <= 1.0 + kMinSupercriticalExcess) {
    throw DomainError("model requires lambda > 1, got " + std::to_string(lambda));
  }
}

double OffspringModel::pmf(std::uint64_t n) const { return poisson_pmf(lambda_, n); }

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw DomainError("rational requires num >= 0 and den > 0");
  const std::int64_t g = std::gcd(num, den);
  return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

double poisson_pmf(double lambda, std::uint64_t n) {
  require_positive_lambda(lambda);
  const double k = static_cast<double>(n);
  return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

double offspring_pgf(double lambda, double s) {
  require_positive_lambda(lambda);
  require_unit_interval(s);
  return pgf(lambda, s);
}

double iterated_pgf(double lambda, std::uint64_t n, double s) {
  require_positive_lambda(lambda);
  require_unit_interval(s);
  return compose(lambda, n, s);
}

double iterated_pgf_derivative(double lambda, std::uint64_t n, double s) {
  require_positive_lambda(lambda);
  require_unit_interval(s);
  if (n == 0) throw DomainError("iterated_pgf_derivative requires n >= 1");
  return chain_derivative(lambda, n, s);
}

ExtinctionProfile extinction_probability(const OffspringModel& model) {
  const double lambda = model.lambda();
  constexpr double kTolerance = 1e-12;
  constexpr int kMaxIterations = 10000;

  // f_n(0) increases monotonically to the smallest fixed point.
  double alpha = 0.0;
  bool converged = false;
  for (int i = 0; i < kMaxIterations && !converged; ++i) {
    const double next = pgf(lambda, alpha);
    converged = std::abs(next - alpha) < kTolerance;
    alpha = next;
  }
  // Near-critical lambdas converge sublinearly. h(a) = f(a) - a is convex and
  // decreasing left of the root, so Newton from below stays below and converges.
  for (int i = 0; i < 200 && !converged; ++i) {
    const double f = pgf(lambda, alpha);
    const double step = (f - alpha) / (1.0 - lambda * f);
    alpha += step;
    converged = std::abs(step) < kTolerance;
  }

  ExtinctionProfile profile;
  profile.alpha = alpha;
  profile.gamma = 1.0 - alpha;
  profile.delta_n = delta_n(model);
  const MaxHorizon horizon = max_horizon(model);
  profile.g_lambda = horizon.g_lambda;
  profile.k_max = horizon.k_max;
  return profile;
}

double lambda_from_detail(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("level of detail must lie in (0, 1), got " + std::to_string(gamma));
  }
  return -std::log1p(-gamma) / gamma;
}

double conditioned_extinction_mass(const OffspringModel& model, std::uint64_t n) {
  if (n == 0) throw DomainError("conditioned_extinction_mass requires n >= 1");
  const double lambda = model.lambda();
  const double first_extinction = pgf(lambda, 0.0);
  return first_extinction * chain_derivative(lambda, n, first_extinction);
}

double delta_n(const OffspringModel& model) {
  const double lambda = model.lambda();
  return lambda * std::exp(lambda * (std::exp(-lambda) - 2.0));
}

MaxHorizon max_horizon(const OffspringModel& model) {
  const double lambda = model.lambda();
  MaxHorizon result;
  result.g_lambda = lambda * (2.0 - std::exp(-lambda)) / std::log(lambda) - 1.0;
  result.k_max = static_cast<int>(std::floor(result.g_lambda));
  return result;
}

HorizonDistribution horizon_distribution(int k) {
  if (k < 1 || k > kMaxHorizonLimit) {
    throw DomainError("horizon distribution requires 1 <= k <= " +
                      std::to_string(kMaxHorizonLimit) + ", got " + std::to_string(k));
  }
  const std::int64_t K = k;
  const bool even = K % 2 == 0;

  HorizonDistribution dist;
  dist.k = k;
  dist.k_m = static_cast<int>((K + 2) / 2);  // ceil((K + 1) / 2)

  // Rising and falling edges use different denominators when K is even.
  const std::int64_t rise_den = even ? (K + 1) * (K + 2) : (K + 1) * (K + 1);
  const std::int64_t fall_den = even ? K * (K + 1) : (K + 1) * (K + 1);
  // Common denominator for the exact mean.
  const std::int64_t mean_den = even ? K * (K + 1) * (K + 2) : (K + 1) * (K + 1);
  std::int64_t mean_num = 0;

  dist.probs.reserve(static_cast<std::size_t>(K + 2));
  dist.exact_probs.reserve(static_cast<std::size_t>(K + 2));
  for (std::int64_t n = 0; n <= K + 1; ++n) {
    const bool rising = n <= dist.k_m;
    const std::int64_t num = rising ? 4 * n : 4 * (K + 1 - n);
    const std::int64_t den = rising ? rise_den : fall_den;
    dist.exact_probs.push_back(Rational::make(num, den));
    dist.probs.push_back(static_cast<double>(num) / static_cast<double>(den));
    mean_num += n * num * (mean_den / den);
  }
  dist.mean_exact = Rational::make(mean_num, mean_den);
  dist.k_bar = static_cast<int>(dist.mean_exact.ceil());
  return dist;
}

int expected_horizon(const OffspringModel& model) {
  return horizon_distribution(max_horizon(model).k_max).k_bar;
}

double expected_total_fixed(const OffspringModel& model, std::uint64_t n) {
  return geometric_sum(model.lambda(), static_cast<double>(n) + 1.0);
}

double variance_total_fixed(const OffspringModel& model, std::uint64_t n) {
  if (n == 0) return 0.0;
  const double lambda = model.lambda();
  const double k = static_cast<double>(n);
  const double lambda_n = std::pow(lambda, k);
  const double s_n = geometric_sum(lambda, k);                     // (lambda^n - 1)/(lambda - 1)
  const double s_2n = geometric_sum(lambda * lambda, k);             // (lambda^2n - 1)/(lambda^2 - 1)
  return lambda_n * s_n + (2.0 * lambda + 1.0) / (lambda - 1.0) * (s_2n - s_n);
}

MixtureMoments mixture_totals(const OffspringModel& model, std::span<const double> horizon_probs) {
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t n = 0; n < horizon_probs.size(); ++n) {
    const double p = horizon_probs[n];
    if (p == 0.0) continue;
    const double e = expected_total_fixed(model, n);
    mean += p * e;
    second += p * (variance_total_fixed(model, n) + e * e);
  }
  return {mean, second - mean * mean};
}

TotalsPrediction totals_random_horizon(const OffspringModel& model) {
  const HorizonDistribution dist = horizon_distribution(max_horizon(model).k_max);
  const MixtureMoments mixture = mixture_totals(model, dist.probs);

  TotalsPrediction out;
  out.horizon = dist.k_bar;
  out.mean_fixed = expected_total_fixed(model, static_cast<std::uint64_t>(dist.k_bar));
  out.var_fixed = variance_total_fixed(model, static_cast<std::uint64_t>(dist.k_bar));
  out.mean_random = mixture.mean;
  out.var_random = mixture.variance;
  return out;
}

double resource_total(const OffspringModel& model, std::uint64_t k) {
  return expected_total_fixed(model, k);
}

int resource_limited_depth(const OffspringModel& model, double t_budget) {
  if (!std::isfinite(t_budget) || t_budget < 1.0) {
    throw DomainError("resource budget must be finite and >= 1, got " + std::to_string(t_budget));
  }
  const double lambda = model.lambda();
  const double exponent = std::log1p((lambda - 1.0) * t_budget) / std::log(lambda);
  auto depth = static_cast<std::int64_t>(std::ceil(exponent)) - 1;
  if (depth < 0) depth = 0;
  // Rounding in the logarithms can misplace the ceiling by one; settle it on the sums.
  while (depth > 0 && resource_total(model, static_cast<std::uint64_t>(depth - 1)) >= t_budget) --depth;
  while (resource_total(model, static_cast<std::uint64_t>(depth)) < t_budget) ++depth;
  return static_cast<int>(depth);
}

}  // namespace decomp
