#include "decomp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

namespace decomp {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return mix64(mix64(master_seed) ^ (index * 0xd1b54a32d192ed03ULL));
}

Rng make_stream(std::uint64_t seed) { return Rng(mix64(seed)); }

double uniform01(Rng& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

PoissonSampler::PoissonSampler(double lambda) : lambda_(lambda) {
  if (!std::isfinite(lambda) || lambda <= 0.0) {
    throw DomainError("Poisson mean must be finite and positive, got " + std::to_string(lambda));
  }
  constexpr double kMaxInversionMean = 30.0;
  parts_ = static_cast<int>(std::ceil(lambda / kMaxInversionMean));
  part_lambda_ = lambda / parts_;
  double p = std::exp(-part_lambda_);
  double cdf = p;
  cdf_.push_back(cdf);
  for (std::uint64_t k = 1; p > 0.0; ++k) {
    p *= part_lambda_ / static_cast<double>(k);
    cdf += p;
    cdf_.push_back(cdf);
  }
}

std::uint64_t PoissonSampler::draw_part(Rng& rng) const {
  const double u = uniform01(rng);
  std::size_t k = 0;
  const std::size_t last = cdf_.size() - 1;
  while (k < last && u > cdf_[k]) ++k;
  return k;
}

std::uint64_t PoissonSampler::operator()(Rng& rng) const {
  std::uint64_t total = 0;
  for (int i = 0; i < parts_; ++i) total += draw_part(rng);
  return total;
}

std::uint64_t GenerationTrace::population(int n) const {
  if (n < 0) throw DomainError("generation index must be nonnegative");
  if (n <= last_generation()) return z[static_cast<std::size_t>(n)];
  if (extinct_at) return 0;
  throw DomainError("generation " + std::to_string(n) + " was not simulated");
}

std::uint64_t GenerationTrace::truncated_total(int n) const {
  if (!known_through(n)) throw DomainError("generation " + std::to_string(n) + " was not simulated");
  const auto end = std::min<std::size_t>(z.size(), static_cast<std::size_t>(n) + 1);
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < end; ++k) total += z[k];
  return total;
}

GenerationTrace simulate_trace(const OffspringModel& model, std::uint64_t seed, int depth_cap,
                               std::uint64_t population_ceiling) {
  if (depth_cap < 1) throw DomainError("depth_cap must be >= 1");
  const PoissonSampler offspring(model.lambda());
  Rng rng = make_stream(seed);

  GenerationTrace trace;
  trace.z.push_back(1);
  for (int k = 0; k < depth_cap; ++k) {
    const std::uint64_t parents = trace.z.back();
    if (population_ceiling != 0 && parents > population_ceiling) {
      trace.escaped = true;
      break;
    }
    std::uint64_t children = 0;
    for (std::uint64_t i = 0; i < parents; ++i) children += offspring(rng);
    trace.z.push_back(children);
    if (children == 0) {
      trace.extinct_at = k + 1;
      break;
    }
  }
  return trace;
}

DecompositionTree::DecompositionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DomainError("a decomposition tree has at least its root");
}

std::vector<std::uint64_t> DecompositionTree::level_counts() const {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(depth()) + 1, 0);
  for (const TreeNode& n : nodes_) ++counts[static_cast<std::size_t>(n.level)];
  return counts;
}

DecompositionTree simulate_tree(const OffspringModel& model, std::uint64_t seed, int depth_cap) {
  if (depth_cap < 1) throw DomainError("depth_cap must be >= 1");
  const PoissonSampler offspring(model.lambda());
  Rng rng = make_stream(seed);

  std::vector<TreeNode> nodes(1);
  std::size_t level_begin = 0;
  for (int level = 0; level < depth_cap; ++level) {
    const std::size_t level_end = nodes.size();
    for (std::size_t id = level_begin; id < level_end; ++id) {
      const std::uint64_t count = offspring(rng);
      if (nodes.size() + count > kMaxTreeNodes) {
        throw DomainError("tree exceeds " + std::to_string(kMaxTreeNodes) + " nodes");
      }
      nodes[id].first_child = nodes.size();
      nodes[id].child_count = static_cast<std::size_t>(count);
      for (std::uint64_t c = 0; c < count; ++c) nodes.push_back({id, level + 1, 0, 0});
    }
    if (nodes.size() == level_end) break;  // extinct
    level_begin = level_end;
  }
  return DecompositionTree(std::move(nodes));
}

namespace {

// Running central moments up to order four with pairwise merging.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void add(double x) {
    const double n1 = n;
    n += 1.0;
    const double delta = x - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean += dn;
    m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += term1 * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += term1;
  }

  void merge(const Moments& b) {
    if (b.n == 0.0) return;
    if (n == 0.0) {
      *this = b;
      return;
    }
    const double na = n;
    const double nb = b.n;
    const double nt = na + nb;
    const double delta = b.mean - mean;
    const double d2 = delta * delta;
    const double d3 = d2 * delta;
    const double d4 = d2 * d2;
    const double new_m4 = m4 + b.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nt * nt * nt) +
                          6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nt * nt) +
                          4.0 * delta * (na * b.m3 - nb * m3) / nt;
    const double new_m3 = m3 + b.m3 + d3 * na * nb * (na - nb) / (nt * nt) +
                          3.0 * delta * (na * b.m2 - nb * m2) / nt;
    m2 += b.m2 + d2 * na * nb / nt;
    m3 = new_m3;
    m4 = new_m4;
    mean += delta * nb / nt;
    n = nt;
  }

  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }

  Estimate mean_estimate() const { return {mean, std::sqrt(variance() / n)}; }

  // Large-sample standard error of the unbiased variance.
  Estimate variance_estimate() const {
    const double s2 = variance();
    const double fourth = m4 / n;
    const double spread = std::max(0.0, fourth - s2 * s2 * (n - 3.0) / (n - 1.0));
    return {s2, std::sqrt(spread / n)};
  }
};

struct ChunkResult {
  std::uint64_t extinct = 0;
  std::uint64_t escaped = 0;
  std::uint64_t totals_missing = 0;
  Moments totals;
  std::array<std::uint64_t, kCondMassGenerations> cond_missing{};
  std::array<Moments, kCondMassGenerations> cond;

  void merge(const ChunkResult& other) {
    extinct += other.extinct;
    escaped += other.escaped;
    totals_missing += other.totals_missing;
    totals.merge(other.totals);
    for (std::size_t i = 0; i < cond.size(); ++i) {
      cond_missing[i] += other.cond_missing[i];
      cond[i].merge(other.cond[i]);
    }
  }
};

constexpr std::uint64_t kChunkSize = 1024;

ChunkResult run_chunk(const OffspringModel& model, const StudyConfig& config, std::uint64_t begin,
                      std::uint64_t end) {
  // Z(n + 1) for n up to 3 is needed for the conditioned masses.
  const int generations = std::max(config.depth_cap, kCondMassGenerations + 1);
  ChunkResult result;
  for (std::uint64_t r = begin; r < end; ++r) {
    const GenerationTrace trace = simulate_trace(model, replicate_seed(config.master_seed, r),
                                                 generations, config.population_ceiling);
    if (trace.extinct_at && *trace.extinct_at <= config.depth_cap) ++result.extinct;
    if (trace.escaped) ++result.escaped;

    if (trace.known_through(config.depth_cap)) {
      result.totals.add(static_cast<double>(trace.truncated_total(config.depth_cap)));
    } else {
      ++result.totals_missing;
    }
    for (int n = 1; n <= kCondMassGenerations; ++n) {
      const auto i = static_cast<std::size_t>(n - 1);
      if (!trace.known_through(n + 1)) {
        ++result.cond_missing[i];
        continue;
      }
      const double mass = trace.population(n + 1) == 0 ? static_cast<double>(trace.population(n)) : 0.0;
      result.cond[i].add(mass);
    }
  }
  return result;
}

}  // namespace

Estimate SimulationSummary::cond_mass_estimate(int n) const {
  if (n < 1 || n > kCondMassGenerations) {
    throw DomainError("conditioned mass is estimated for n in 1..3 only");
  }
  const auto& estimate = cond_mass[static_cast<std::size_t>(n - 1)];
  if (!estimate) throw DomainError("conditioned mass unavailable: replicates escaped the ceiling");
  return *estimate;
}

SimulationSummary run_study(const OffspringModel& model, const StudyConfig& config) {
  if (config.replicates < 100) throw DomainError("a study needs at least 100 replicates");
  if (config.depth_cap < 1) throw DomainError("depth_cap must be >= 1");

  const std::uint64_t chunks = (config.replicates + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkResult> results(static_cast<std::size_t>(chunks));
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t c = next++; c < chunks; c = next++) {
      const std::uint64_t begin = c * kChunkSize;
      const std::uint64_t end = std::min(config.replicates, begin + kChunkSize);
      results[static_cast<std::size_t>(c)] = run_chunk(model, config, begin, end);
    }
  };

  unsigned workers = config.workers == 0 ? std::thread::hardware_concurrency() : config.workers;
  workers = static_cast<unsigned>(std::clamp<std::uint64_t>(workers, 1, chunks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  // Merge in chunk order so the result is independent of scheduling.
  ChunkResult total;
  for (const ChunkResult& r : results) total.merge(r);

  const double n = static_cast<double>(config.replicates);
  SimulationSummary summary;
  summary.replicates = config.replicates;
  summary.depth_cap = config.depth_cap;
  const double p = static_cast<double>(total.extinct) / n;
  summary.extinction_frequency = {p, std::sqrt(p * (1.0 - p) / n)};
  summary.escaped = total.escaped;
  if (total.totals_missing == 0) {
    summary.mean_truncated_total = total.totals.mean_estimate();
    summary.var_truncated_total = total.totals.variance_estimate();
  }
  for (std::size_t i = 0; i < summary.cond_mass.size(); ++i) {
    if (total.cond_missing[i] == 0) summary.cond_mass[i] = total.cond[i].mean_estimate();
  }
  return summary;
}

}  // namespace decomp
