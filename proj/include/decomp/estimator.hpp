#pragma once

// Project effort predictions built from a fitted (or given) offspring intensity.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "decomp/core_model.hpp"
#include "decomp/stats_fit.hpp"

namespace decomp {

/// Element-count prediction for one project.
///
/// The band is reconstructed as
///   lower = E[T(K̄); ci_low]  - sqrt(D[T(K̄); ci_low])
///   upper = E[T(K̄); ci_high] + sqrt(D[T(K̄); ci_high])
/// with K̄ the expected horizon at lambda_hat, so both endpoints share one depth.
struct ProjectEstimate {
  double lambda_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int k_max = 0;
  int horizon_expected = 0;
  int horizon_low = 0;   ///< max(1, K̄ - 1)
  int horizon_high = 0;  ///< min(k_max, K̄ + 1)
  double expected_elements = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;

  bool contains(double total) const noexcept { return lower_bound <= total && total <= upper_bound; }
};

/// Element counts are displayed truncated toward zero, the convention of the published tables.
std::int64_t display_count(double value);

/// Throws ModelInapplicableError unless 1 < ci_low <= lambda_hat <= ci_high.
ProjectEstimate estimate_project(double lambda_hat, double ci_low, double ci_high);
ProjectEstimate estimate_project(const FitReport& fit);

/// A row of the published comparison table for one bundled project.
struct PublishedRow {
  int project = 0;
  int horizon = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t total = 0;
  std::int64_t model_low = 0;
  std::int64_t model_expected = 0;
  std::int64_t model_high = 0;
};

/// Reads `project,horizon,mean,ci_low,ci_high,total,model_low,model_expected,model_high`.
std::vector<PublishedRow> load_published_table(const std::filesystem::path& path);

struct ProjectVerification {
  int project = 0;
  FitReport fit;                 ///< fitted on the bundled histogram
  std::uint64_t observed_total;  ///< sum over the histogram rows
  PublishedRow published;
  ProjectEstimate from_fit;        ///< band from the fitted interval
  ProjectEstimate from_published;  ///< band from the published (mean, interval)
  bool observed_inside = false;    ///< observed_total inside from_fit
  bool published_inside = false;   ///< published total inside both bands
  std::vector<std::string> notes;  ///< disagreements with the published figures

  bool inside() const noexcept { return observed_inside && published_inside; }
};

struct VerificationReport {
  std::vector<ProjectVerification> projects;
  bool all_inside() const noexcept;
};

inline constexpr int kBundledProjects = 5;

/// Runs projects 1..5 from `data_dir`/project{N}.csv against `data_dir`/table2_published.csv.
/// Missing files raise IoError naming the file.
VerificationReport verify_bundled(const std::filesystem::path& data_dir, double confidence = 0.95,
                                  double significance = 0.05);

struct SweepRow {
  double lambda = 0.0;
  int k_max = 0;
  int k_bar = 0;
  double e_t_fixed = 0.0;
  double sd_fixed = 0.0;
  double e_t_random = 0.0;
  double sd_random = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  int k_resource = 0;
};

SweepRow sweep_point(double lambda, double t_budget = 1000.0);

/// Rows at lambda_min, lambda_min + step, ... up to lambda_max inclusive.
/// Throws UsageError for an empty or subcritical range or a nonpositive step.
std::vector<SweepRow> sweep(double lambda_min, double lambda_max, double step, double t_budget = 1000.0);

inline constexpr const char* kSweepHeader =
    "lambda,k_max,k_bar,e_t_fixed,sd_fixed,e_t_random,sd_random,alpha,gamma,k_resource";

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Where an integer column of a sweep changes between consecutive rows.
struct Transition {
  double lambda_before = 0.0;
  double lambda_after = 0.0;
  int from = 0;
  int to = 0;
};

std::vector<Transition> k_bar_transitions(const std::vector<SweepRow>& rows);
std::vector<Transition> k_max_transitions(const std::vector<SweepRow>& rows);

}  // namespace decomp
