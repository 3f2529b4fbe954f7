#pragma once

// Closed-form quantities of the Poisson Galton-Watson decomposition model.
//
// A business process is decomposed level by level; every business function
// splits into a Poisson(lambda) number of children. All functions here are
// pure; inputs are validated and a DomainError is thrown otherwise.

#include <cstdint>
#include <span>
#include <vector>

#include "decomp/errors.hpp"

namespace decomp {

/// Smallest accepted excess over the critical value lambda = 1.
inline constexpr double kMinSupercriticalExcess = 1e-9;

/// Poisson offspring law of a supercritical decomposition process.
class OffspringModel {
 public:
  /// Throws DomainError unless lambda is finite and lambda > 1 + 1e-9.
  explicit OffspringModel(double lambda);

  double lambda() const noexcept { return lambda_; }

  /// P{X = n}.
  double pmf(std::uint64_t n) const;

 private:
  double lambda_;
};

struct ExtinctionProfile {
  double alpha = 0.0;    ///< extinction probability
  double gamma = 0.0;    ///< level of detail, 1 - alpha
  double delta_n = 0.0;  ///< expected mass of subprocesses dying at the second generation
  double g_lambda = 0.0; ///< continuous bound on the maximum horizon
  int k_max = 0;         ///< floor(g_lambda)
};

struct MaxHorizon {
  double g_lambda = 0.0;
  int k_max = 0;
};

/// Nonnegative fraction in lowest terms. Used where exact arithmetic decides
/// an integer answer (ceilings of expectations).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  double to_double() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  std::int64_t ceil() const noexcept { return (num + den - 1) / den; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Triangular approximation of the law of the decomposition horizon G on 0..K+1.
struct HorizonDistribution {
  int k = 0;                         ///< maximum horizon
  int k_m = 0;                       ///< mode, ceil((K+1)/2)
  std::vector<double> probs;         ///< P{G = n}, n = 0..K+1
  std::vector<Rational> exact_probs; ///< same values as exact fractions
  Rational mean_exact;               ///< E[G]
  int k_bar = 0;                     ///< expected horizon, ceil(E[G])

  double mean() const noexcept { return mean_exact.to_double(); }
};

struct TotalsPrediction {
  int horizon = 0;          ///< depth used for the fixed-horizon columns (the expected horizon)
  double mean_fixed = 0.0;  ///< E[T(n)]
  double var_fixed = 0.0;   ///< D[T(n)]
  double mean_random = 0.0; ///< E[T(G)]
  double var_random = 0.0;  ///< D[T(G)]
};

struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Offspring law and generating functions. lambda only needs to be positive here.

/// lambda^n e^-lambda / n!, evaluated in log space.
double poisson_pmf(double lambda, std::uint64_t n);

/// f(s) = exp(lambda (s - 1)), s in [0, 1].
double offspring_pgf(double lambda, double s);

/// f_n(s): n-fold composition of f, with f_0(s) = s.
double iterated_pgf(double lambda, std::uint64_t n, double s);

/// f_n'(s) from the chain rule f_n'(s) = f'(f_{n-1}(s)) f_{n-1}'(s); n >= 1.
double iterated_pgf_derivative(double lambda, std::uint64_t n, double s);

// Extinction and level of detail.

/// Smallest root of exp(lambda (a - 1)) = a, together with the horizon bound.
ExtinctionProfile extinction_probability(const OffspringModel& model);

/// Inverse of gamma(lambda): -ln(1 - gamma) / gamma, gamma in (0, 1).
double lambda_from_detail(double gamma);

/// E[Z(n); Z(n+1) = 0] = f_1(0) f_n'(f_1(0)); n >= 1.
double conditioned_extinction_mass(const OffspringModel& model, std::uint64_t n);

/// Closed form of the n = 1 mass: lambda exp(lambda (exp(-lambda) - 2)).
double delta_n(const OffspringModel& model);

// Horizons.

MaxHorizon max_horizon(const OffspringModel& model);

/// Largest accepted maximum horizon; keeps the exact arithmetic inside 64 bits.
inline constexpr int kMaxHorizonLimit = 10000;

/// Throws DomainError for k < 1 or k > kMaxHorizonLimit.
HorizonDistribution horizon_distribution(int k);

int expected_horizon(const OffspringModel& model);

// Totals.

/// E[T(n)] = (lambda^(n+1) - 1) / (lambda - 1).
double expected_total_fixed(const OffspringModel& model, std::uint64_t n);

/// D[T(n)] of the depth-n truncated total.
double variance_total_fixed(const OffspringModel& model, std::uint64_t n);

/// Mean and variance of T(G) when G has the given law over 0..size-1.
MixtureMoments mixture_totals(const OffspringModel& model, std::span<const double> horizon_probs);

TotalsPrediction totals_random_horizon(const OffspringModel& model);

// Resource limits.

/// Size of a complete tree of depth k with branching lambda.
double resource_total(const OffspringModel& model, std::uint64_t k);

/// Smallest depth whose expected full tree reaches t_budget elements; t_budget >= 1.
int resource_limited_depth(const OffspringModel& model, double t_budget);

}  // namespace decomp
