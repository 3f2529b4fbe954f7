#pragma once

// Fitting the offspring intensity to observed decomposition sizes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decomp/errors.hpp"

namespace decomp {

/// Value -> frequency. Used directly for count data that may contain zeros,
/// such as simulated Poisson samples.
using Frequencies = std::map<std::uint64_t, std::uint64_t>;

/// Frequencies of observed decomposition sizes (number of children per decomposed function).
class SampleHistogram {
 public:
  /// Zero frequencies are dropped. Throws DomainError for size 0 or an empty sample.
  explicit SampleHistogram(const std::map<std::uint64_t, std::uint64_t>& counts);

  const std::map<std::uint64_t, std::uint64_t>& counts() const noexcept { return counts_; }
  std::uint64_t n() const noexcept { return n_; }
  std::uint64_t total_elements() const noexcept { return total_elements_; }
  std::uint64_t max_size() const noexcept { return counts_.rbegin()->first; }

  /// Frequency of `size`, zero when absent.
  std::uint64_t count(std::uint64_t size) const;

  friend bool operator==(const SampleHistogram&, const SampleHistogram&) = default;

 private:
  std::map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t n_ = 0;
  std::uint64_t total_elements_ = 0;
};

/// Parse either the CSV histogram format (header `size,count`) or the raw
/// format (one positive integer per line). Duplicate sizes are summed.
/// Throws ParseError carrying the offending line number.
SampleHistogram ingest_histogram(std::string_view text);

/// Read and parse a file. Throws IoError if it cannot be opened; ParseErrors carry the path.
SampleHistogram load_histogram(const std::filesystem::path& path);

/// One cell of the pooled chi-square table. `last` is empty for the open upper tail.
struct PooledBin {
  std::uint64_t first = 0;
  std::optional<std::uint64_t> last;
  std::uint64_t observed = 0;
  double expected = 0.0;

  std::string label() const;
};

struct GofResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  double significance = 0.05;
  bool rejected = false;
  std::vector<PooledBin> bins;
};

struct FitReport {
  double lambda_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.95;
  std::uint64_t n = 0;
  std::uint64_t total_elements = 0;
  double sample_std = 0.0;
  std::optional<GofResult> gof;
};

/// Minimum expected count per pooled cell.
inline constexpr double kMinExpectedPerBin = 5.0;

/// Sample mean with a Student-t interval. Throws InsufficientDataError for n < 2.
FitReport fit_lambda(const SampleHistogram& hist, double confidence = 0.95);
FitReport fit_lambda(const Frequencies& counts, double confidence = 0.95);

/// Pearson chi-square against Poisson(sample mean) with tail pooling.
/// Throws InsufficientDataError when fewer than 3 pooled cells remain.
GofResult poisson_gof(const SampleHistogram& hist, double significance = 0.05);
GofResult poisson_gof(const Frequencies& counts, double significance = 0.05);

/// Cells 0..max_size plus the open upper tail, pooled until each expects >= 5.
std::vector<PooledBin> pool_bins(const SampleHistogram& hist, double lambda);
std::vector<PooledBin> pool_bins(const Frequencies& counts, double lambda);

/// fit_lambda plus poisson_gof; the GOF part is left empty when the sample is too small for it.
FitReport fit_and_test(const SampleHistogram& hist, double confidence = 0.95, double significance = 0.05);

}  // namespace decomp
