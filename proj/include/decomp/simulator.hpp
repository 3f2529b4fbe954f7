#pragma once

// Seeded Monte-Carlo simulation of the decomposition process.
//
// Every replicate owns an mt19937_64 stream seeded from (master seed,
// replicate index) through a 64-bit mixer, so results do not depend on the
// order in which replicates run or on the number of worker threads.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decomp/core_model.hpp"

namespace decomp {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of replicate `index` under `master_seed`.
std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

Rng make_stream(std::uint64_t seed);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng) noexcept;

/// Poisson variates by inversion with sequential search. Means above 30 are
/// split into equal parts and summed, which keeps every draw an exact inversion.
class PoissonSampler {
 public:
  explicit PoissonSampler(double lambda);

  std::uint64_t operator()(Rng& rng) const;
  double lambda() const noexcept { return lambda_; }

 private:
  std::uint64_t draw_part(Rng& rng) const;

  double lambda_;
  double part_lambda_;
  int parts_;
  std::vector<double> cdf_;  ///< cumulative sums of the part pmf until the terms underflow
};

/// Generations beyond this population are not simulated in traces by default.
inline constexpr std::uint64_t kDefaultPopulationCeiling = 1000;

struct GenerationTrace {
  std::vector<std::uint64_t> z;   ///< z[k] = population of generation k; z[0] = 1
  std::optional<int> extinct_at;  ///< first k with z[k] = 0
  bool escaped = false;           ///< stopped early because z exceeded the population ceiling

  /// Last generation whose population is known.
  int last_generation() const noexcept { return static_cast<int>(z.size()) - 1; }

  /// Z(n); zero past extinction. Throws DomainError when generation n was not simulated.
  std::uint64_t population(int n) const;

  /// z[0] + ... + z[n].
  std::uint64_t truncated_total(int n) const;

  bool known_through(int n) const noexcept {
    return extinct_at.has_value() || n <= last_generation();
  }
};

/// Simulate generations 0..depth_cap. Each individual of generation k draws its
/// offspring in order. If a generation exceeds `population_ceiling` (0 disables
/// the ceiling) before depth_cap, the trace stops there and is flagged escaped.
GenerationTrace simulate_trace(const OffspringModel& model, std::uint64_t seed, int depth_cap,
                               std::uint64_t population_ceiling = kDefaultPopulationCeiling);

inline constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

struct TreeNode {
  std::size_t parent = kNoParent;
  int level = 0;
  std::size_t first_child = 0;
  std::size_t child_count = 0;
};

/// Decomposition tree stored in generation order; the children of a node are contiguous.
class DecompositionTree {
 public:
  explicit DecompositionTree(std::vector<TreeNode> nodes);

  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }

  /// Node counts per level, root level first.
  std::vector<std::uint64_t> level_counts() const;
  int depth() const noexcept { return nodes_.empty() ? 0 : nodes_.back().level; }

 private:
  std::vector<TreeNode> nodes_;
};

/// Largest tree simulate_tree will materialize.
inline constexpr std::size_t kMaxTreeNodes = 10'000'000;

/// Same draws as simulate_trace with the same seed, keeping parent links.
DecompositionTree simulate_tree(const OffspringModel& model, std::uint64_t seed, int depth_cap);

enum class TreeFormat { json, dot };

/// "json" or "dot"; anything else is a UsageError.
TreeFormat parse_tree_format(std::string_view token);

/// JSON: nested {"id","level","children"}. DOT: one edge per parent-child pair.
std::string export_tree(const DecompositionTree& tree, TreeFormat format);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
  friend bool operator==(const Estimate&, const Estimate&) = default;
};

struct StudyConfig {
  std::uint64_t replicates = 100000;
  int depth_cap = 60;
  std::uint64_t master_seed = 0;
  unsigned workers = 1;  ///< 0 selects std::thread::hardware_concurrency()
  std::uint64_t population_ceiling = kDefaultPopulationCeiling;
};

inline constexpr int kCondMassGenerations = 3;

struct SimulationSummary {
  std::uint64_t replicates = 0;
  int depth_cap = 0;
  Estimate extinction_frequency;  ///< fraction extinct by generation depth_cap
  std::uint64_t escaped = 0;      ///< replicates that hit the population ceiling
  /// Moments of z[0] + ... + z[depth_cap]; empty if some replicate escaped first.
  std::optional<Estimate> mean_truncated_total;
  std::optional<Estimate> var_truncated_total;
  /// E[Z(n); Z(n+1) = 0] for n = 1..3, index n - 1.
  std::array<std::optional<Estimate>, kCondMassGenerations> cond_mass;

  /// Throws DomainError if n is outside 1..3 or the estimate is unavailable.
  Estimate cond_mass_estimate(int n) const;

  friend bool operator==(const SimulationSummary&, const SimulationSummary&) = default;
};

/// Throws DomainError for fewer than 100 replicates or depth_cap < 1.
SimulationSummary run_study(const OffspringModel& model, const StudyConfig& config);

}  // namespace decomp
