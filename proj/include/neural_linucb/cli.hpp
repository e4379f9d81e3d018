#ifndef NEURAL_LINUCB_CLI_HPP_
#define NEURAL_LINUCB_CLI_HPP_

// Command line front end.
//
//   run      --config <file> [--out <dir>]
//   ntk      --points <csv> --depth <L> [--widths a,b,c] [--seeds n] [--out <dir>]
//   plot     --in <glob> --out <svg>
//   validate --config <file>
//
// NLUCB_OUTPUT_DIR overrides the configured output directory of `run` and the
// default directory of `ntk`; an explicit --out wins over both.
//
// NTK CSVs:
//   #schema=ntk-gram/v1 depth=<L> points=<N> lambda_min=<v>
//   i,j,h
//   #schema=ntk-sweep/v1 depth=<L> points=<N>
//   m,seed,frob_error

#include <glob.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "neural_linucb/config.hpp"
#include "neural_linucb/ntk.hpp"
#include "neural_linucb/runner.hpp"
#include "neural_linucb/svg.hpp"
#include "neural_linucb/trace.hpp"

namespace nlucb {

// One point per line, comma separated; a non-numeric first line is a header.
inline std::vector<Vector> LoadPoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open points file " + path);
  std::vector<Vector> points;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    std::vector<double> values;
    bool numeric = true;
    for (std::string_view field : internal::SplitFields(trimmed)) {
      const auto v = internal::ParseDouble(field);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (points.empty() && line_number == 1) continue;
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": non-numeric field");
    }
    if (!points.empty() && static_cast<Eigen::Index>(values.size()) != points.front().size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": inconsistent point dimension");
    }
    points.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  }
  if (points.empty()) throw std::runtime_error(path + ": no points");
  return points;
}

inline std::vector<std::string> ExpandGlob(const std::string& pattern) {
  glob_t result{};
  const int status = ::glob(pattern.c_str(), 0, nullptr, &result);
  std::vector<std::string> paths;
  if (status == 0) {
    for (std::size_t i = 0; i < result.gl_pathc; ++i) paths.emplace_back(result.gl_pathv[i]);
  }
  globfree(&result);
  std::sort(paths.begin(), paths.end());
  return paths;
}

// Aggregates from a mix of trace and aggregate CSVs. Traces are grouped by
// algorithm and reduced; other files are skipped.
inline std::vector<Aggregate> LoadPlotInputs(const std::vector<std::string>& paths) {
  std::vector<Aggregate> aggregates;
  std::map<std::string, std::vector<RegretTrace>> traces;
  for (const std::string& path : paths) {
    std::string schema;
    try {
      schema = ReadSchema(path);
    } catch (const std::exception&) {
      continue;
    }
    if (schema == "aggregate/v1") {
      aggregates.push_back(ReadAggregateCsv(path));
    } else if (schema == "trace/v1") {
      RegretTrace trace = ReadTraceCsv(path);
      traces[trace.algorithm].push_back(std::move(trace));
    }
  }
  for (const auto& [algorithm, group] : traces) {
    const bool covered = std::any_of(aggregates.begin(), aggregates.end(),
                                     [&](const Aggregate& a) { return a.algorithm == algorithm; });
    if (covered) continue;
    std::vector<const RegretTrace*> pointers;
    for (const RegretTrace& t : group) pointers.push_back(&t);
    aggregates.push_back(AggregateTraces(pointers));
  }
  return aggregates;
}

namespace internal {

inline int CommandRun(const std::string& config_path, const std::string& out_flag, std::ostream& out,
                      std::ostream& err) {
  ExperimentConfig config = LoadConfig(config_path);
  const std::string dir = out_flag.empty() ? EffectiveOutputDir(config) : out_flag;
  const SuiteResult result = RunSuite(config, dir);
  for (const Aggregate& agg : result.aggregates) {
    const AggregateRow& last = agg.rows.back();
    out << agg.algorithm << ": final cumulative regret " << FormatG9(last.mean) << " +- " << FormatG9(last.stddev)
        << " over " << agg.runs << " runs\n";
  }
  if (!result.aggregates.empty()) EmitSvg(result.aggregates, dir + "/regret.svg");
  out << "wrote " << dir << " (config " << result.config_hash << ")\n";
  for (const RunFailure& f : result.failures) err << "failed: " << f.message << '\n';
  return result.failures.empty() ? 0 : 3;
}

inline int CommandNtk(const std::string& points_path, int depth, const std::vector<int>& widths, int seeds,
                      const std::string& out_flag, std::ostream& out) {
  const std::vector<Vector> points = LoadPoints(points_path);
  std::string dir = out_flag;
  if (dir.empty()) {
    const char* env = std::getenv("NLUCB_OUTPUT_DIR");
    dir = env != nullptr && *env != '\0' ? env : ".";
  }
  std::filesystem::create_directories(dir);
  const NtkGram gram = NtkMatrix(points, depth);
  const double lambda_min = MinEigenvalue(gram.h).value;
  const std::string gram_path = dir + "/ntk_gram.csv";
  {
    std::ofstream f(gram_path);
    if (!f) throw std::runtime_error("cannot open " + gram_path + " for writing");
    f << "#schema=ntk-gram/v1 depth=" << depth << " points=" << points.size() << " lambda_min=" << FormatG9(lambda_min)
      << "\ni,j,h\n";
    for (Eigen::Index i = 0; i < gram.h.rows(); ++i) {
      for (Eigen::Index j = 0; j < gram.h.cols(); ++j) f << i << ',' << j << ',' << FormatG9(gram.h(i, j)) << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + gram_path);
  }
  out << "lambda_min " << FormatG9(lambda_min) << "\nwrote " << gram_path << '\n';
  if (!widths.empty()) {
    const std::vector<GramErrorRow> rows = GramConvergence(points, depth, widths, seeds);
    const std::string sweep_path = dir + "/ntk_sweep.csv";
    std::ofstream f(sweep_path);
    if (!f) throw std::runtime_error("cannot open " + sweep_path + " for writing");
    f << "#schema=ntk-sweep/v1 depth=" << depth << " points=" << points.size() << "\nm,seed,frob_error\n";
    for (const GramErrorRow& r : rows) f << r.width << ',' << r.seed << ',' << FormatG9(r.frob_error) << '\n';
    if (!f) throw std::runtime_error("write failed: " + sweep_path);
    out << "wrote " << sweep_path << '\n';
  }
  return 0;
}

inline int CommandPlot(const std::string& pattern, const std::string& svg_path, std::ostream& out) {
  const std::vector<std::string> paths = ExpandGlob(pattern);
  if (paths.empty()) throw std::runtime_error("no files match " + pattern);
  const std::vector<Aggregate> aggregates = LoadPlotInputs(paths);
  if (aggregates.empty()) throw std::runtime_error("no trace or aggregate CSVs among files matching " + pattern);
  EmitSvg(aggregates, svg_path);
  out << "wrote " << svg_path << '\n';
  return 0;
}

inline int CommandValidate(const std::string& config_path, std::ostream& out) {
  const ExperimentConfig config = LoadConfig(config_path);
  ValidateConfig(config);
  out << "ok " << ConfigHash(config) << '\n';
  return 0;
}

}  // namespace internal

inline int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-LinUCB contextual bandits", "neural_linucb"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run every algorithm and repetition of a config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory");

  std::string points_path;
  int depth = 2;
  std::vector<int> widths;
  int seeds = 5;
  std::string ntk_out;
  auto* ntk = app.add_subcommand("ntk", "NTK Gram matrix, smallest eigenvalue and width sweep");
  ntk->add_option("--points", points_path, "CSV of unit points")->required();
  ntk->add_option("--depth", depth, "hidden layers L")->required()->check(CLI::NonNegativeNumber);
  ntk->add_option("--widths", widths, "widths for the convergence sweep")->delimiter(',');
  ntk->add_option("--seeds", seeds, "seeds per width")->check(CLI::PositiveNumber);
  ntk->add_option("--out", ntk_out, "output directory");

  std::string in_glob;
  std::string svg_path;
  auto* plot = app.add_subcommand("plot", "SVG of cumulative regret from trace or aggregate CSVs");
  plot->add_option("--in", in_glob, "glob of CSV files")->required();
  plot->add_option("--out", svg_path, "SVG path")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("--config", validate_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (run->parsed()) return internal::CommandRun(config_path, out_dir, out, err);
    if (ntk->parsed()) return internal::CommandNtk(points_path, depth, widths, seeds, ntk_out, out);
    if (plot->parsed()) return internal::CommandPlot(in_glob, svg_path, out);
    if (validate->parsed()) return internal::CommandValidate(validate_path, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_CLI_HPP_
