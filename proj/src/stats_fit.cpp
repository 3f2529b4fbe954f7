#include "decomp/stats_fit.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "decomp/core_model.hpp"
#include "decomp/special_functions.hpp"

namespace decomp {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Signed parse so that "-3" is reported as negative rather than as garbage.
std::int64_t parse_integer(std::string_view field, std::string_view what, std::size_t line) {
  field = trim(field);
  std::int64_t value = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || end != field.data() + field.size()) {
    throw ParseError(std::string(what) + " is not an integer: '" + std::string(field) + "'", line);
  }
  return value;
}

void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(what) + " must lie in (0, 1)");
}

struct Sums {
  std::uint64_t count = 0;
  std::uint64_t total = 0;
};

Sums sums(const Frequencies& counts) {
  Sums s;
  for (const auto& [value, frequency] : counts) {
    s.count += frequency;
    s.total += value * frequency;
  }
  return s;
}

}  // namespace

SampleHistogram::SampleHistogram(const std::map<std::uint64_t, std::uint64_t>& counts) {
  for (const auto& [size, frequency] : counts) {
    if (frequency == 0) continue;
    if (size == 0) throw DomainError("decomposition sizes must be positive");
    counts_[size] += frequency;
    n_ += frequency;
    total_elements_ += size * frequency;
  }
  if (n_ == 0) throw DomainError("histogram holds no observations");
}

std::uint64_t SampleHistogram::count(std::uint64_t size) const {
  const auto it = counts_.find(size);
  return it == counts_.end() ? 0 : it->second;
}

SampleHistogram ingest_histogram(std::string_view text) {
  std::map<std::uint64_t, std::uint64_t> counts;
  std::optional<bool> csv;
  std::size_t line_no = 0;
  std::size_t data_rows = 0;

  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    const std::string_view line = trim(text.substr(0, eol));
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    ++line_no;
    if (line.empty()) continue;

    if (!csv) {
      csv = line.find(',') != std::string_view::npos;
      if (*csv) {
        if (line != "size,count") throw ParseError("expected CSV header 'size,count'", line_no);
        continue;
      }
    }

    std::int64_t size = 0;
    std::int64_t frequency = 1;
    if (*csv) {
      const std::size_t comma = line.find(',');
      if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
        throw ParseError("expected two fields 'size,count'", line_no);
      }
      size = parse_integer(line.substr(0, comma), "size", line_no);
      frequency = parse_integer(line.substr(comma + 1), "count", line_no);
      if (frequency < 0) throw ParseError("negative count", line_no);
    } else {
      size = parse_integer(line, "size", line_no);
    }
    if (size < 1) throw ParseError("decomposition size must be a positive integer", line_no);
    counts[static_cast<std::uint64_t>(size)] += static_cast<std::uint64_t>(frequency);
    ++data_rows;
  }

  if (data_rows == 0) throw ParseError("no observations in input", line_no);
  std::uint64_t n = 0;
  for (const auto& [size, frequency] : counts) n += frequency;
  if (n == 0) throw ParseError("all counts are zero", line_no);
  return SampleHistogram(counts);
}

SampleHistogram load_histogram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return ingest_histogram(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), path.string());
  }
}

std::string PooledBin::label() const {
  if (!last) return ">=" + std::to_string(first);
  if (*last == first) return std::to_string(first);
  return std::to_string(first) + "-" + std::to_string(*last);
}

FitReport fit_lambda(const Frequencies& counts, double confidence) {
  require_probability(confidence, "confidence");
  const auto [count, total] = sums(counts);
  if (count < 2) throw InsufficientDataError("need at least two observations to estimate a variance");

  const double n = static_cast<double>(count);
  const double mean = static_cast<double>(total) / n;
  double squares = 0.0;
  for (const auto& [size, frequency] : counts) {
    const double d = static_cast<double>(size) - mean;
    squares += static_cast<double>(frequency) * d * d;
  }

  FitReport report;
  report.lambda_hat = mean;
  report.n = count;
  report.total_elements = total;
  report.confidence = confidence;
  report.sample_std = std::sqrt(squares / (n - 1.0));

  const boost::math::students_t t_dist(n - 1.0);
  const double t = boost::math::quantile(t_dist, 0.5 * (1.0 + confidence));
  const double margin = t * report.sample_std / std::sqrt(n);
  report.ci_low = mean - margin;
  report.ci_high = mean + margin;
  return report;
}

FitReport fit_lambda(const SampleHistogram& hist, double confidence) { return fit_lambda(hist.counts(), confidence); }

std::vector<PooledBin> pool_bins(const Frequencies& counts, double lambda) {
  const auto [count, total] = sums(counts);
  if (count == 0) throw DomainError("no observations to pool");
  const double n = static_cast<double>(count);
  const std::uint64_t top = counts.rbegin()->first;
  auto observed = [&](std::uint64_t k) -> std::uint64_t {
    const auto it = counts.find(k);
    return it == counts.end() ? 0 : it->second;
  };

  std::vector<PooledBin> cells;
  cells.reserve(static_cast<std::size_t>(top) + 2);
  for (std::uint64_t k = 0; k <= top; ++k) {
    cells.push_back({k, k, observed(k), n * poisson_pmf(lambda, k)});
  }
  // P{X >= top + 1} = P(top + 1, lambda).
  cells.push_back({top + 1, std::nullopt, 0, n * regularized_gamma_p(static_cast<double>(top + 1), lambda)});

  std::vector<PooledBin> pooled;
  std::optional<PooledBin> open;
  for (const PooledBin& cell : cells) {
    if (!open) {
      open = cell;
    } else {
      open->last = cell.last;
      open->observed += cell.observed;
      open->expected += cell.expected;
    }
    if (open->expected >= kMinExpectedPerBin) {
      pooled.push_back(*open);
      open.reset();
    }
  }
  if (open) {
    if (pooled.empty()) {
      pooled.push_back(*open);
    } else {
      pooled.back().last = open->last;
      pooled.back().observed += open->observed;
      pooled.back().expected += open->expected;
    }
  }
  return pooled;
}

std::vector<PooledBin> pool_bins(const SampleHistogram& hist, double lambda) {
  return pool_bins(hist.counts(), lambda);
}

GofResult poisson_gof(const Frequencies& counts, double significance) {
  require_probability(significance, "significance");
  const auto [count, total] = sums(counts);
  if (count == 0) throw InsufficientDataError("no observations");
  const double lambda = static_cast<double>(total) / static_cast<double>(count);

  GofResult result;
  result.significance = significance;
  result.bins = pool_bins(counts, lambda);
  if (result.bins.size() < 3) {
    throw InsufficientDataError("only " + std::to_string(result.bins.size()) +
                                " pooled cells with expected count >= 5; need 3");
  }
  for (const PooledBin& bin : result.bins) {
    const double d = static_cast<double>(bin.observed) - bin.expected;
    result.statistic += d * d / bin.expected;
  }
  // One degree lost to normalization, one to the fitted mean.
  result.df = static_cast<int>(result.bins.size()) - 2;
  result.p_value = chi_square_upper_tail(result.statistic, result.df);
  result.rejected = result.p_value < significance;
  return result;
}

GofResult poisson_gof(const SampleHistogram& hist, double significance) {
  return poisson_gof(hist.counts(), significance);
}

FitReport fit_and_test(const SampleHistogram& hist, double confidence, double significance) {
  FitReport report = fit_lambda(hist, confidence);
  try {
    report.gof = poisson_gof(hist, significance);
  } catch (const InsufficientDataError&) {
    report.gof.reset();
  }
  return report;
}

}  // namespace decomp
