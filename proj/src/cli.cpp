#include "decomp/cli.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <string_view>

#include "CLI11.hpp"
#include "decomp/core_model.hpp"
#include "decomp/estimator.hpp"
#include "decomp/simulator.hpp"
#include "decomp/stats_fit.hpp"
#include "json.hpp"

#ifndef DECOMP_DATA_DIR
#define DECOMP_DATA_DIR "data"
#endif

namespace decomp {
namespace {

using Json = nlohmann::ordered_json;

// Validation failures detected after parsing; mapped to the usage exit code.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool color_requested() {
  const char* value = std::getenv("DECOMP_COLOR");
  if (value == nullptr) return false;
  const std::string_view v(value);
  return v == "1" || v == "always" || v == "true";
}

std::string paint(const CliConfig& cfg, std::string_view text, bool good) {
  if (!cfg.color) return std::string(text);
  return fmt::format("\x1b[{}m{}\x1b[0m", good ? 32 : 31, text);
}

OffspringModel model_from(const CliConfig& cfg) {
  if (!cfg.lambda) throw ValidationError("--lambda is required");
  if (!std::isfinite(*cfg.lambda) || *cfg.lambda <= 1.0 + kMinSupercriticalExcess) {
    throw ValidationError("model requires lambda > 1");
  }
  return OffspringModel(*cfg.lambda);
}

Json estimate_json(const Estimate& e) { return Json{{"value", e.value}, {"standard_error", e.standard_error}}; }

template <class T>
Json optional_json(const std::optional<T>& value) {
  return value ? estimate_json(*value) : Json(nullptr);
}

Json fit_json(const FitReport& fit) {
  Json j{{"n", fit.n},
         {"total_elements", fit.total_elements},
         {"lambda_hat", fit.lambda_hat},
         {"sample_std", fit.sample_std},
         {"confidence", fit.confidence},
         {"ci_low", fit.ci_low},
         {"ci_high", fit.ci_high}};
  if (fit.gof) {
    Json bins = Json::array();
    for (const PooledBin& b : fit.gof->bins) {
      bins.push_back(Json{{"sizes", b.label()}, {"observed", b.observed}, {"expected", b.expected}});
    }
    j["gof"] = Json{{"statistic", fit.gof->statistic},
                    {"df", fit.gof->df},
                    {"p_value", fit.gof->p_value},
                    {"significance", fit.gof->significance},
                    {"rejected", fit.gof->rejected},
                    {"pooled_bins", bins}};
  } else {
    j["gof"] = nullptr;
  }
  return j;
}

Json project_json(const ProjectEstimate& e) {
  return Json{{"lambda_hat", e.lambda_hat},
              {"ci_low", e.ci_low},
              {"ci_high", e.ci_high},
              {"k_max", e.k_max},
              {"horizon_expected", e.horizon_expected},
              {"horizon_range", Json::array({e.horizon_low, e.horizon_high})},
              {"expected_elements", e.expected_elements},
              {"lower_bound", e.lower_bound},
              {"upper_bound", e.upper_bound}};
}

void print_fit_text(std::ostream& out, const FitReport& fit) {
  fmt::print(out, "decompositions      {}\n", fit.n);
  fmt::print(out, "total elements      {}\n", fit.total_elements);
  fmt::print(out, "lambda_hat          {:.4f}\n", fit.lambda_hat);
  fmt::print(out, "sample std          {:.4f}\n", fit.sample_std);
  fmt::print(out, "{:.0f}% interval        [{:.4f}, {:.4f}]\n", fit.confidence * 100.0, fit.ci_low, fit.ci_high);
  if (!fit.gof) {
    fmt::print(out, "poisson gof         not run: fewer than 3 cells with expected count >= 5\n");
    return;
  }
  const GofResult& g = *fit.gof;
  fmt::print(out, "poisson gof         chi2 = {:.4f}, df = {}, p = {:.4f} -> {} at {}\n", g.statistic, g.df,
             g.p_value, g.rejected ? "rejected" : "not rejected", g.significance);
  fmt::print(out, "  {:>8} {:>9} {:>10}\n", "sizes", "observed", "expected");
  for (const PooledBin& b : g.bins) fmt::print(out, "  {:>8} {:>9} {:>10.3f}\n", b.label(), b.observed, b.expected);
}

int cmd_predict(const CliConfig& cfg, std::ostream& out) {
  const OffspringModel model = model_from(cfg);
  const ExtinctionProfile ext = extinction_probability(model);
  const TotalsPrediction totals = totals_random_horizon(model);
  if (cfg.format == OutputFormat::json) {
    out << Json{{"lambda", model.lambda()},
                {"g_lambda", ext.g_lambda},
                {"k_max", ext.k_max},
                {"k_bar", totals.horizon},
                {"e_t_fixed", totals.mean_fixed},
                {"sd_fixed", std::sqrt(totals.var_fixed)},
                {"e_t_random", totals.mean_random},
                {"sd_random", std::sqrt(totals.var_random)},
                {"alpha", ext.alpha},
                {"gamma", ext.gamma},
                {"delta_n", ext.delta_n}}
               .dump(2)
        << '\n';
    return 0;
  }
  fmt::print(out, "lambda              {}\n", model.lambda());
  fmt::print(out, "max horizon K       {} (g = {:.4f})\n", ext.k_max, ext.g_lambda);
  fmt::print(out, "expected horizon    {}\n", totals.horizon);
  fmt::print(out, "E[T({})]             {:.1f}\n", totals.horizon, totals.mean_fixed);
  fmt::print(out, "sd[T({})]            {:.1f}\n", totals.horizon, std::sqrt(totals.var_fixed));
  fmt::print(out, "E[T(G)]             {:.1f}\n", totals.mean_random);
  fmt::print(out, "sd[T(G)]            {:.1f}\n", std::sqrt(totals.var_random));
  fmt::print(out, "alpha               {:.6f}\n", ext.alpha);
  fmt::print(out, "gamma               {:.6f}\n", ext.gamma);
  return 0;
}

SampleHistogram input_histogram(const CliConfig& cfg) {
  if (!cfg.input_path) throw ValidationError("--input is required");
  return load_histogram(*cfg.input_path);
}

int cmd_fit(const CliConfig& cfg, std::ostream& out) {
  const FitReport fit = fit_and_test(input_histogram(cfg), cfg.confidence, cfg.significance);
  if (cfg.format == OutputFormat::json) {
    out << fit_json(fit).dump(2) << '\n';
  } else {
    print_fit_text(out, fit);
  }
  return 0;
}

int cmd_estimate(const CliConfig& cfg, std::ostream& out) {
  const FitReport fit = fit_and_test(input_histogram(cfg), cfg.confidence, cfg.significance);
  const ProjectEstimate est = estimate_project(fit);
  if (cfg.format == OutputFormat::json) {
    out << Json{{"fit", fit_json(fit)}, {"estimate", project_json(est)}}.dump(2) << '\n';
    return 0;
  }
  print_fit_text(out, fit);
  fmt::print(out, "horizon range       {}-{} (expected {}, max {})\n", est.horizon_low, est.horizon_high,
             est.horizon_expected, est.k_max);
  fmt::print(out, "expected elements   {} ({:.2f})\n", display_count(est.expected_elements), est.expected_elements);
  fmt::print(out, "element band        [{}, {}] ([{:.2f}, {:.2f}])\n", display_count(est.lower_bound),
             display_count(est.upper_bound), est.lower_bound, est.upper_bound);
  return 0;
}

int cmd_simulate(const CliConfig& cfg, std::ostream& out) {
  const OffspringModel model = model_from(cfg);
  if (cfg.export_tree) {
    const TreeFormat format = parse_tree_format(*cfg.export_tree);
    out << export_tree(simulate_tree(model, cfg.seed, cfg.tree_depth), format);
    if (format == TreeFormat::json) out << '\n';
    return 0;
  }
  StudyConfig study;
  study.replicates = cfg.replicates;
  study.depth_cap = cfg.depth_cap;
  study.master_seed = cfg.seed;
  study.workers = cfg.workers;
  const SimulationSummary s = run_study(model, study);
  const ExtinctionProfile ext = extinction_probability(model);

  if (cfg.format == OutputFormat::json) {
    Json cond = Json::array();
    for (const auto& c : s.cond_mass) cond.push_back(optional_json(c));
    out << Json{{"lambda", model.lambda()},
                {"seed", cfg.seed},
                {"replicates", s.replicates},
                {"depth_cap", s.depth_cap},
                {"extinction_frequency", estimate_json(s.extinction_frequency)},
                {"alpha", ext.alpha},
                {"escaped", s.escaped},
                {"mean_truncated_total", optional_json(s.mean_truncated_total)},
                {"var_truncated_total", optional_json(s.var_truncated_total)},
                {"cond_mass", cond}}
               .dump(2)
        << '\n';
    return 0;
  }
  fmt::print(out, "replicates          {}\n", s.replicates);
  fmt::print(out, "depth cap           {}\n", s.depth_cap);
  fmt::print(out, "extinction freq     {:.6f} +/- {:.6f} (closed form {:.6f})\n", s.extinction_frequency.value,
             s.extinction_frequency.standard_error, ext.alpha);
  if (s.mean_truncated_total) {
    fmt::print(out, "mean T({})           {:.4f} +/- {:.4f} (closed form {:.4f})\n", s.depth_cap,
               s.mean_truncated_total->value, s.mean_truncated_total->standard_error,
               expected_total_fixed(model, static_cast<std::uint64_t>(s.depth_cap)));
    fmt::print(out, "var T({})            {:.4f} +/- {:.4f} (closed form {:.4f})\n", s.depth_cap,
               s.var_truncated_total->value, s.var_truncated_total->standard_error,
               variance_total_fixed(model, static_cast<std::uint64_t>(s.depth_cap)));
  } else {
    fmt::print(out, "truncated totals    unavailable: {} replicates exceeded the population ceiling\n", s.escaped);
  }
  for (int n = 1; n <= kCondMassGenerations; ++n) {
    const auto& c = s.cond_mass[static_cast<std::size_t>(n - 1)];
    if (!c) continue;
    fmt::print(out, "E[Z({});Z({})=0]      {:.6f} +/- {:.6f} (closed form {:.6f})\n", n, n + 1, c->value,
               c->standard_error, conditioned_extinction_mass(model, static_cast<std::uint64_t>(n)));
  }
  return 0;
}

int cmd_sweep(const CliConfig& cfg, std::ostream& out) {
  const std::vector<SweepRow> rows = sweep(cfg.sweep_min, cfg.sweep_max, cfg.sweep_step, cfg.budget);
  if (!cfg.out_path) {
    write_sweep_csv(out, rows);
    return 0;
  }
  std::ofstream file(*cfg.out_path, std::ios::binary);
  if (!file) throw IoError("cannot write " + *cfg.out_path);
  write_sweep_csv(file, rows);
  fmt::print(out, "wrote {} rows to {}\n", rows.size(), *cfg.out_path);
  return 0;
}

int cmd_verify(const CliConfig& cfg, std::ostream& out) {
  const VerificationReport report = verify_bundled(cfg.data_dir, cfg.confidence, cfg.significance);

  if (cfg.format == OutputFormat::json) {
    Json projects = Json::array();
    for (const ProjectVerification& v : report.projects) {
      projects.push_back(Json{{"project", v.project},
                              {"fit", fit_json(v.fit)},
                              {"observed_total", v.observed_total},
                              {"published_total", v.published.total},
                              {"band_from_fit", project_json(v.from_fit)},
                              {"band_from_published", project_json(v.from_published)},
                              {"inside", v.inside()},
                              {"notes", v.notes}});
    }
    out << Json{{"projects", projects}, {"all_inside", report.all_inside()}}.dump(2) << '\n';
    return report.all_inside() ? 0 : 1;
  }

  fmt::print(out, "{:>7} {:>7} {:>15} {:>6} {:>6} | {:>7} {:>5} {:>8} {:>5} | {}\n", "project", "mean",
             "interval", "obs", "table", "horizon", "low", "expected", "high", "verdict");
  for (const ProjectVerification& v : report.projects) {
    const ProjectEstimate& e = v.from_fit;
    fmt::print(out, "{:>7} {:>7.3f} [{:>5.2f}, {:>5.2f}] {:>6} {:>6} | {:>5}-{} {:>5} {:>8} {:>5} | {}\n", v.project,
               v.fit.lambda_hat, v.fit.ci_low, v.fit.ci_high, v.observed_total, v.published.total, e.horizon_low,
               e.horizon_high, display_count(e.lower_bound), display_count(e.expected_elements),
               display_count(e.upper_bound), paint(cfg, v.inside() ? "inside band" : "OUTSIDE band", v.inside()));
  }
  fmt::print(out, "\nreconstruction from the published means and intervals:\n");
  fmt::print(out, "{:>7} {:>13} {:>13} {:>13}\n", "project", "low", "expected", "high");
  for (const ProjectVerification& v : report.projects) {
    const ProjectEstimate& e = v.from_published;
    fmt::print(out, "{:>7} {:>6} ({:>4}) {:>6} ({:>4}) {:>6} ({:>4})\n", v.project, display_count(e.lower_bound),
               v.published.model_low, display_count(e.expected_elements), v.published.model_expected,
               display_count(e.upper_bound), v.published.model_high);
  }
  bool any_notes = false;
  for (const ProjectVerification& v : report.projects) {
    for (const std::string& note : v.notes) {
      if (!any_notes) fmt::print(out, "\nnotes:\n");
      any_notes = true;
      fmt::print(out, "  project {}: {}\n", v.project, note);
    }
  }
  fmt::print(out, "\n{}\n", report.all_inside() ? paint(cfg, "all observed totals inside their model bands", true)
                                                  : paint(cfg, "verification FAILED", false));
  return report.all_inside() ? 0 : 1;
}

void add_format(CLI::App* sub, CliConfig& cfg, std::vector<std::string> allowed) {
  static const std::map<std::string, OutputFormat> kFormats{
      {"text", OutputFormat::text}, {"json", OutputFormat::json}, {"csv", OutputFormat::csv}};
  std::map<std::string, OutputFormat> subset;
  for (const auto& name : allowed) subset.emplace(name, kFormats.at(name));
  sub->add_option("--format", cfg.format, "Output format")->transform(CLI::CheckedTransformer(subset));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  cfg.data_dir = DECOMP_DATA_DIR;
  cfg.color = color_requested();

  CLI::App app{"Branching-process model of business-process decomposition", "decomp"};
  app.require_subcommand(1, 1);

  auto* predict = app.add_subcommand("predict", "Closed-form predictions for a given lambda");
  predict->add_option("--lambda", cfg.lambda, "Mean number of children per decomposition")->required();
  add_format(predict, cfg, {"text", "json"});

  auto* fit = app.add_subcommand("fit", "Fit lambda and test the Poisson hypothesis on a histogram");
  fit->add_option("--input", cfg.input_path, "Histogram file (CSV size,count or one size per line)")->required();
  fit->add_option("--confidence", cfg.confidence, "Confidence level of the interval");
  fit->add_option("--significance", cfg.significance, "Significance level of the chi-square test");
  add_format(fit, cfg, {"text", "json"});

  auto* estimate = app.add_subcommand("estimate", "Fit a histogram and predict the project element count");
  estimate->add_option("--input", cfg.input_path, "Histogram file")->required();
  estimate->add_option("--confidence", cfg.confidence, "Confidence level of the interval");
  estimate->add_option("--significance", cfg.significance, "Significance level of the chi-square test");
  add_format(estimate, cfg, {"text", "json"});

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo study, or export one simulated tree");
  simulate->add_option("--lambda", cfg.lambda, "Mean number of children per decomposition")->required();
  simulate->add_option("--seed", cfg.seed, "Master seed");
  simulate->add_option("--replicates", cfg.replicates, "Number of replicates");
  simulate->add_option("--depth-cap", cfg.depth_cap, "Generations simulated per replicate");
  simulate->add_option("--workers", cfg.workers, "Worker threads (0 = all cores)");
  simulate->add_option("--export-tree", cfg.export_tree, "Print the tree of --seed instead (json or dot)");
  simulate->add_option("--tree-depth", cfg.tree_depth, "Depth cap of the exported tree");
  add_format(simulate, cfg, {"text", "json"});

  auto* sweep_cmd = app.add_subcommand("sweep", "Curve data over a lambda grid as CSV");
  sweep_cmd->add_option("--min", cfg.sweep_min, "First lambda")->required();
  sweep_cmd->add_option("--max", cfg.sweep_max, "Last lambda")->required();
  sweep_cmd->add_option("--step", cfg.sweep_step, "Grid step")->required();
  sweep_cmd->add_option("--budget", cfg.budget, "Element budget for the resource-limited depth");
  sweep_cmd->add_option("--out", cfg.out_path, "Output file (stdout when omitted)");
  add_format(sweep_cmd, cfg, {"csv"});

  auto* verify = app.add_subcommand("verify", "Check the bundled projects against their model bands");
  verify->add_option("--data-dir", cfg.data_dir, "Directory holding project{1..5}.csv");
  verify->add_option("--confidence", cfg.confidence, "Confidence level of the interval");
  verify->add_option("--significance", cfg.significance, "Significance level of the chi-square test");
  add_format(verify, cfg, {"text", "json"});

  std::vector<const char*> argv{"decomp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) throw ValidationError("--confidence must lie in (0, 1)");
    if (!(cfg.significance > 0.0 && cfg.significance < 1.0)) {
      throw ValidationError("--significance must lie in (0, 1)");
    }
    if (cfg.depth_cap < 1 || cfg.tree_depth < 1) throw ValidationError("depth caps must be >= 1");
    if (cfg.replicates < 100) throw ValidationError("--replicates must be >= 100");

    cfg.command = app.get_subcommands().front()->get_name();
    if (cfg.command == "predict") return cmd_predict(cfg, out);
    if (cfg.command == "fit") return cmd_fit(cfg, out);
    if (cfg.command == "estimate") return cmd_estimate(cfg, out);
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    if (cfg.command == "sweep") return cmd_sweep(cfg, out);
    if (cfg.command == "verify") return cmd_verify(cfg, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::failure);
  }
  return static_cast<int>(ExitCode::usage);
}

}  // namespace decomp
