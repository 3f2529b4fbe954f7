#include "decomp/estimator.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace decomp {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <class T>
T parse_field(const std::string& field, std::size_t line, const std::string& source) {
  std::istringstream in(field);
  T value{};
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw ParseError("malformed field '" + field + "'", line, source);
  }
  return value;
}

std::vector<Transition> transitions(const std::vector<SweepRow>& rows, int SweepRow::*column) {
  std::vector<Transition> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].*column != rows[i - 1].*column) {
      out.push_back({rows[i - 1].lambda, rows[i].lambda, rows[i - 1].*column, rows[i].*column});
    }
  }
  return out;
}

}  // namespace

std::int64_t display_count(double value) { return static_cast<std::int64_t>(std::trunc(value)); }

ProjectEstimate estimate_project(double lambda_hat, double ci_low, double ci_high) {
  if (!(ci_low > 1.0 + kMinSupercriticalExcess)) {
    throw ModelInapplicableError(fmt::format(
        "lower confidence limit {:.4g} is not supercritical; the model requires lambda > 1", ci_low));
  }
  if (!(ci_low <= lambda_hat && lambda_hat <= ci_high)) {
    throw ModelInapplicableError("estimate must lie inside its confidence interval");
  }
  const OffspringModel center(lambda_hat);
  const OffspringModel low(ci_low);
  const OffspringModel high(ci_high);

  ProjectEstimate est;
  est.lambda_hat = lambda_hat;
  est.ci_low = ci_low;
  est.ci_high = ci_high;
  est.k_max = max_horizon(center).k_max;
  est.horizon_expected = expected_horizon(center);
  est.horizon_low = std::max(1, est.horizon_expected - 1);
  est.horizon_high = std::min(est.k_max, est.horizon_expected + 1);

  const auto depth = static_cast<std::uint64_t>(est.horizon_expected);
  est.expected_elements = expected_total_fixed(center, depth);
  est.lower_bound = expected_total_fixed(low, depth) - std::sqrt(variance_total_fixed(low, depth));
  est.upper_bound = expected_total_fixed(high, depth) + std::sqrt(variance_total_fixed(high, depth));
  return est;
}

ProjectEstimate estimate_project(const FitReport& fit) {
  return estimate_project(fit.lambda_hat, fit.ci_low, fit.ci_high);
}

std::vector<PublishedRow> load_published_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string source = path.string();
  constexpr const char* kHeader =
      "project,horizon,mean,ci_low,ci_high,total,model_low,model_expected,model_high";

  std::vector<PublishedRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kHeader) throw ParseError(std::string("expected header '") + kHeader + "'", 1, source);
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 9) throw ParseError("expected 9 fields", line_no, source);
    PublishedRow row;
    row.project = parse_field<int>(f[0], line_no, source);
    row.horizon = parse_field<int>(f[1], line_no, source);
    row.mean = parse_field<double>(f[2], line_no, source);
    row.ci_low = parse_field<double>(f[3], line_no, source);
    row.ci_high = parse_field<double>(f[4], line_no, source);
    row.total = parse_field<std::uint64_t>(f[5], line_no, source);
    row.model_low = parse_field<std::int64_t>(f[6], line_no, source);
    row.model_expected = parse_field<std::int64_t>(f[7], line_no, source);
    row.model_high = parse_field<std::int64_t>(f[8], line_no, source);
    rows.push_back(row);
  }
  return rows;
}

bool VerificationReport::all_inside() const noexcept {
  return !projects.empty() &&
         std::all_of(projects.begin(), projects.end(), [](const auto& p) { return p.inside(); });
}

VerificationReport verify_bundled(const std::filesystem::path& data_dir, double confidence,
                                  double significance) {
  const auto published = load_published_table(data_dir / "table2_published.csv");

  VerificationReport report;
  for (int project = 1; project <= kBundledProjects; ++project) {
    const auto row = std::find_if(published.begin(), published.end(),
                                  [&](const PublishedRow& r) { return r.project == project; });
    if (row == published.end()) {
      throw IoError(fmt::format("{}: no row for project {}", (data_dir / "table2_published.csv").string(), project));
    }
    const SampleHistogram hist = load_histogram(data_dir / fmt::format("project{}.csv", project));

    ProjectVerification v;
    v.project = project;
    v.fit = fit_and_test(hist, confidence, significance);
    v.observed_total = hist.total_elements();
    v.published = *row;
    v.from_fit = estimate_project(v.fit);
    v.from_published = estimate_project(row->mean, row->ci_low, row->ci_high);

    const auto total = static_cast<double>(row->total);
    v.observed_inside = v.from_fit.contains(static_cast<double>(v.observed_total));
    v.published_inside = v.from_fit.contains(total) && v.from_published.contains(total);

    // Published figures carry two decimals; differences beyond rounding are reported.
    if (std::abs(v.fit.lambda_hat - row->mean) > 0.0051) {
      v.notes.push_back(fmt::format("fitted mean {:.3f} differs from published {:.2f}", v.fit.lambda_hat, row->mean));
    }
    if (std::abs(v.fit.ci_low - row->ci_low) > 0.02 || std::abs(v.fit.ci_high - row->ci_high) > 0.02) {
      v.notes.push_back(fmt::format("fitted interval [{:.2f}, {:.2f}] differs from published [{:.2f}, {:.2f}]",
                                    v.fit.ci_low, v.fit.ci_high, row->ci_low, row->ci_high));
    }
    if (v.observed_total != row->total) {
      v.notes.push_back(fmt::format("histogram rows sum to {} elements, published total is {}",
                                    v.observed_total, row->total));
    }
    const std::pair<const char*, std::pair<double, std::int64_t>> columns[] = {
        {"lower bound", {v.from_published.lower_bound, row->model_low}},
        {"expected elements", {v.from_published.expected_elements, row->model_expected}},
        {"upper bound", {v.from_published.upper_bound, row->model_high}},
    };
    for (const auto& [name, values] : columns) {
      if (std::abs(display_count(values.first) - values.second) > 1) {
        v.notes.push_back(fmt::format("published {} {} disagrees with reconstructed {:.2f}", name,
                                      values.second, values.first));
      }
    }
    if (row->horizon < v.from_fit.horizon_low || row->horizon > v.from_fit.horizon_high) {
      v.notes.push_back(fmt::format("observed horizon {} outside predicted range {}-{}", row->horizon,
                                    v.from_fit.horizon_low, v.from_fit.horizon_high));
    }
    report.projects.push_back(std::move(v));
  }
  return report;
}

SweepRow sweep_point(double lambda, double t_budget) {
  const OffspringModel model(lambda);
  const ExtinctionProfile extinction = extinction_probability(model);
  const TotalsPrediction totals = totals_random_horizon(model);

  SweepRow row;
  row.lambda = lambda;
  row.k_max = extinction.k_max;
  row.k_bar = totals.horizon;
  row.e_t_fixed = totals.mean_fixed;
  row.sd_fixed = std::sqrt(totals.var_fixed);
  row.e_t_random = totals.mean_random;
  row.sd_random = std::sqrt(totals.var_random);
  row.alpha = extinction.alpha;
  row.gamma = extinction.gamma;
  row.k_resource = resource_limited_depth(model, t_budget);
  return row;
}

std::vector<SweepRow> sweep(double lambda_min, double lambda_max, double step, double t_budget) {
  if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max) || !(lambda_min < lambda_max)) {
    throw UsageError("sweep needs finite bounds with min < max");
  }
  if (!(step > 0.0) || !std::isfinite(step)) throw UsageError("sweep step must be positive");
  if (!(lambda_min > 1.0 + kMinSupercriticalExcess)) throw UsageError("model requires lambda > 1");
  if (!(t_budget >= 1.0)) throw UsageError("resource budget must be >= 1");

  // Grid points are computed from the index, never accumulated, to avoid drift.
  const auto count = static_cast<std::size_t>(std::floor((lambda_max - lambda_min) / step + 1e-9)) + 1;
  std::vector<SweepRow> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    rows.push_back(sweep_point(lambda_min + static_cast<double>(i) * step, t_budget));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    fmt::print(out, "{:.12g},{},{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{}\n", r.lambda, r.k_max,
               r.k_bar, r.e_t_fixed, r.sd_fixed, r.e_t_random, r.sd_random, r.alpha, r.gamma, r.k_resource);
  }
}

std::vector<Transition> k_bar_transitions(const std::vector<SweepRow>& rows) {
  return transitions(rows, &SweepRow::k_bar);
}

std::vector<Transition> k_max_transitions(const std::vector<SweepRow>& rows) {
  return transitions(rows, &SweepRow::k_max);
}

}  // namespace decomp
