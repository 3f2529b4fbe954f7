#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace decomp {

enum class ExitCode : int { success = 0, failure = 1, usage = 2 };

enum class OutputFormat { text, json, csv };

struct CliConfig {
  std::string command;
  std::optional<double> lambda;
  std::optional<std::string> input_path;
  std::uint64_t seed = 0;
  std::uint64_t replicates = 100000;
  int depth_cap = 60;
  unsigned workers = 1;
  std::optional<std::string> export_tree;
  int tree_depth = 4;
  OutputFormat format = OutputFormat::text;
  double confidence = 0.95;
  double significance = 0.05;
  double sweep_min = 0.0;
  double sweep_max = 0.0;
  double sweep_step = 0.0;
  double budget = 1000.0;
  std::optional<std::string> out_path;
  std::string data_dir;
  bool color = false;
};

/// Runs one command line (args excludes the program name) and returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace decomp
