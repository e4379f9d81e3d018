#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "neural_linucb.hpp"
#include "test_util.h"

namespace nlucb {
namespace {

namespace fs = std::filesystem;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteFile(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

ExperimentConfig TinyConfig() {
  ExperimentConfig c = ParseConfigText(
      "synthetic_kind = cosine\n"
      "synthetic_dim = 3\n"
      "arms = 3\n"
      "horizon = 120\n"
      "epoch_length = 40\n"
      "width = 16\n"
      "iterations = 20\n"
      "repetitions = 2\n"
      "timing = off\n"
      "threads = 1\n");
  return c;
}

// Classification CSV with `classes` well-separated clusters.
std::string ClusterCsv(int classes, int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  std::string text = "x0,x1,x2,label\n";
  for (int r = 0; r < rows; ++r) {
    const int y = r % classes;
    text += std::to_string(y + 1 + normal(rng)) + "," + std::to_string(2.0 + normal(rng)) + "," +
            std::to_string(classes - y + normal(rng)) + "," + std::to_string(y) + "\n";
  }
  return text;
}

// Minimal structural XML check: balanced, properly nested tags.
bool WellFormedXml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '?' || tag.front() == '!') continue;
    if (tag.front() == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    if (tag.back() == '/') continue;
    stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
  }
  return stack.empty() && text.find('&', 0) == std::string::npos;
}

int CountOf(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

// ---------------------------------------------------------------- config

TEST(ConfigTest, ParsesTextGrammar) {
  const ExperimentConfig c = ParseConfigText(
      "# comment\n\n  horizon = 500 \nalgorithms = linucb, uniform\nalpha_mode=theorem\nhistory = epoch\n"
      "timing = off\nenv = dataset\ndataset_name = magic\ndataset_path = /x.csv\n");
  EXPECT_EQ(c.horizon, 500);
  EXPECT_EQ(c.algorithms, (std::vector<Algorithm>{Algorithm::kLinUcb, Algorithm::kUniform}));
  EXPECT_EQ(c.alpha_mode, AlphaSchedule::Mode::kTheorem);
  EXPECT_EQ(c.history, HistoryMode::kEpochOnly);
  EXPECT_FALSE(c.timing);
  EXPECT_EQ(c.environment, EnvironmentKind::kDataset);
  EXPECT_EQ(c.dataset_path, "/x.csv");
}

TEST(ConfigTest, RejectsDuplicateUnknownAndMalformed) {
  EXPECT_THROW(ParseConfigText("horizon = 1\nhorizon = 2\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("horizonn = 1\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("horizon\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("horizon = ten\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("algorithms = linucb,foo\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("profile = huge\n"), std::invalid_argument);
  EXPECT_THROW(ParseConfigText("timing = yes\n"), std::invalid_argument);
}

TEST(ConfigTest, ProfilesAndOverrides) {
  const ExperimentConfig desk = ParseConfigText("");
  EXPECT_EQ(desk.width, 128);
  EXPECT_EQ(desk.horizon, 3000);
  EXPECT_EQ(desk.epoch_length, 100);
  EXPECT_EQ(desk.iterations, 200);
  const ExperimentConfig paper = ParseConfigText("horizon = 100\nprofile = paper\n");
  EXPECT_EQ(paper.width, 2000);
  EXPECT_EQ(paper.depth, 2);
  EXPECT_EQ(paper.horizon, 100);
  EXPECT_EQ(paper.step_size, 1e-5);
  EXPECT_EQ(paper.iterations, 1000);
  EXPECT_EQ(paper.alpha, 0.02);
  EXPECT_EQ(paper.lambda, 1.0);
  EXPECT_EQ(paper.repetitions, 10);
  EXPECT_EQ(ExperimentConfig::Paper().horizon, 15000);
}

TEST(ConfigTest, JsonEncodingMatchesText) {
  const ExperimentConfig text = ParseConfigText("horizon = 700\nalgorithms = linucb,oracle\nlambda = 0.5\ncycle = true\n");
  const ExperimentConfig json = ParseConfigJson(nlohmann::json::parse(
      R"({"horizon": 700, "algorithms": ["linucb", "oracle"], "lambda": 0.5, "cycle": true})"));
  EXPECT_EQ(CanonicalConfig(text), CanonicalConfig(json));
  EXPECT_EQ(ConfigHash(text), ConfigHash(json));
  const auto dir = testing::TempDir("config_json");
  WriteFile(dir / "c.json", R"({"horizon": 700, "algorithms": "linucb,oracle", "lambda": 0.5, "cycle": true})");
  EXPECT_EQ(ConfigHash(LoadConfig((dir / "c.json").string())), ConfigHash(text));
}

TEST(ConfigTest, HashTracksEffectiveSettings) {
  const ExperimentConfig a = ParseConfigText("horizon = 700\n");
  const ExperimentConfig b = ParseConfigText("# same\nhorizon=700\n");
  const ExperimentConfig c = ParseConfigText("horizon = 701\n");
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_NE(ConfigHash(a), ConfigHash(c));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  EXPECT_EQ(ConfigHash(ParseConfigText("")), ConfigHash(ExperimentConfig::Desk()));
}

TEST(ConfigTest, Validation) {
  ExperimentConfig c = TinyConfig();
  EXPECT_NO_THROW(ValidateConfig(c));
  c.horizon = 8;  // 3 arms x 3 warm-start pulls
  EXPECT_THROW(ValidateConfig(c), std::invalid_argument);
  c = TinyConfig();
  c.repetitions = 0;
  EXPECT_THROW(ValidateConfig(c), std::invalid_argument);
  c = TinyConfig();
  c.width = 15;
  EXPECT_THROW(ValidateConfig(c), std::invalid_argument);
  c = TinyConfig();
  c.environment = EnvironmentKind::kDataset;
  c.dataset_path = "/nonexistent/statlog.csv";
  try {
    ValidateConfig(c);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/statlog.csv"), std::string::npos);
  }
}

// ------------------------------------------------------------ CSV files

RegretTrace SampleTrace() {
  RegretTrace t;
  t.algorithm = "linucb";
  t.seed = 7;
  t.config_hash = "00112233aabbccdd";
  double cum = 0.0;
  for (long i = 1; i <= 25; ++i) {
    const double inst = i % 3 == 0 ? 0.0 : 1.0 / (3.0 * i);
    cum += inst;
    t.rows.push_back({i, static_cast<int>(i % 4), std::sin(i) / 7.0, inst, cum, (i - 1) / 10, 0.001 * i});
  }
  return t;
}

TEST(TraceCsvTest, EmptyTraceIsHeaderOnly) {
  const auto dir = testing::TempDir("csv_empty");
  RegretTrace t = SampleTrace();
  t.rows.clear();
  WriteTraceCsv(t, (dir / "t.csv").string());
  EXPECT_EQ(ReadFile(dir / "t.csv"),
            "#schema=trace/v1 algorithm=linucb seed=7 config_hash=00112233aabbccdd\n"
            "t,arm,reward,inst_regret,cum_regret,epoch,wall_ms\n");
  EXPECT_TRUE(ReadTraceCsv((dir / "t.csv").string()).rows.empty());
}

TEST(TraceCsvTest, RoundTripAtNineDigits) {
  const auto dir = testing::TempDir("csv_round");
  const RegretTrace t = SampleTrace();
  WriteTraceCsv(t, (dir / "t.csv").string());
  const RegretTrace back = ReadTraceCsv((dir / "t.csv").string());
  EXPECT_EQ(back.algorithm, t.algorithm);
  EXPECT_EQ(back.seed, t.seed);
  EXPECT_EQ(back.config_hash, t.config_hash);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  auto g9 = [](double v) { return std::stod(FormatG9(v)); };
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].t, t.rows[i].t);
    EXPECT_EQ(back.rows[i].arm, t.rows[i].arm);
    EXPECT_EQ(back.rows[i].epoch, t.rows[i].epoch);
    EXPECT_EQ(back.rows[i].reward, g9(t.rows[i].reward));
    EXPECT_EQ(back.rows[i].cum_regret, g9(t.rows[i].cum_regret));
    EXPECT_NEAR(back.rows[i].reward, t.rows[i].reward, 5e-9 * std::abs(t.rows[i].reward));
  }
  // Rewriting the loaded trace reproduces the file byte for byte.
  WriteTraceCsv(back, (dir / "u.csv").string());
  EXPECT_EQ(ReadFile(dir / "t.csv"), ReadFile(dir / "u.csv"));
  std::istringstream lines(ReadFile(dir / "t.csv"));
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line, "1,1,0.120210141,0.333333333,0.333333333,0,0.001");
}

TEST(TraceCsvTest, RejectsWrongSchema) {
  const auto dir = testing::TempDir("csv_schema");
  WriteFile(dir / "a.csv", "#schema=aggregate/v1 algorithm=x runs=1 config_hash=0\nt,mean_cum_regret,std_cum_regret,count\n");
  EXPECT_THROW(ReadTraceCsv((dir / "a.csv").string()), std::runtime_error);
  WriteFile(dir / "b.csv", "t,arm\n1,2\n");
  EXPECT_THROW(ReadTraceCsv((dir / "b.csv").string()), std::runtime_error);
}

TEST(AggregateTest, SingleTraceAndRoundTrip) {
  const RegretTrace t = SampleTrace();
  const Aggregate agg = AggregateTraces({&t});
  EXPECT_EQ(agg.runs, 1);
  ASSERT_EQ(agg.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(agg.rows[i].t, t.rows[i].t);
    EXPECT_EQ(agg.rows[i].mean, t.rows[i].cum_regret);
    EXPECT_EQ(agg.rows[i].stddev, 0.0);
    EXPECT_EQ(agg.rows[i].count, 1);
  }
  const auto dir = testing::TempDir("agg_round");
  WriteAggregateCsv(agg, (dir / "a.csv").string());
  const Aggregate back = ReadAggregateCsv((dir / "a.csv").string());
  EXPECT_EQ(back.algorithm, "linucb");
  EXPECT_EQ(back.runs, 1);
  ASSERT_EQ(back.rows.size(), agg.rows.size());
  EXPECT_EQ(back.rows.back().mean, std::stod(FormatG9(agg.rows.back().mean)));
  EXPECT_THROW(AggregateTraces({}), std::invalid_argument);
}

TEST(AggregateTest, MeanStdAndPermutationInvariance) {
  std::vector<RegretTrace> traces(4, SampleTrace());
  for (int k = 0; k < 4; ++k) {
    traces[k].seed = 10 + k;
    for (TraceRow& r : traces[k].rows) r.cum_regret *= (1.0 + 0.37 * k);
  }
  const Aggregate a = AggregateTraces({&traces[0], &traces[1], &traces[2], &traces[3]});
  const Aggregate b = AggregateTraces({&traces[2], &traces[0], &traces[3], &traces[1]});
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mean, b.rows[i].mean);
    EXPECT_EQ(a.rows[i].stddev, b.rows[i].stddev);
    std::vector<double> v;
    for (const RegretTrace& t : traces) v.push_back(t.rows[i].cum_regret);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 4.0;
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    EXPECT_NEAR(a.rows[i].mean, mean, 1e-12);
    EXPECT_NEAR(a.rows[i].stddev, std::sqrt(sq / 3.0), 1e-12);
    EXPECT_EQ(a.rows[i].count, 4);
  }
}

TEST(AggregateTest, IdenticalSeedsGiveZeroStd) {
  ExperimentConfig c = TinyConfig();
  c.algorithms = {Algorithm::kLinUcb};
  const RegretTrace x = RunOne(c, Algorithm::kLinUcb, 5);
  const RegretTrace y = RunOne(c, Algorithm::kLinUcb, 5);
  const Aggregate agg = AggregateTraces({&x, &y});
  for (const AggregateRow& r : agg.rows) EXPECT_EQ(r.stddev, 0.0);
}

// ------------------------------------------------------------------ SVG

Aggregate ConstantAggregate(const std::string& name, double level, int n) {
  Aggregate a;
  a.algorithm = name;
  a.runs = 1;
  for (int t = 1; t <= n; ++t) a.rows.push_back({t, level, 0.0, 1});
  return a;
}

TEST(SvgTest, WellFormedWithOneLineAndLegendPerAlgorithm) {
  Aggregate growing;
  growing.algorithm = "neural-linucb";
  growing.runs = 3;
  for (int t = 1; t <= 2000; ++t) growing.rows.push_back({t, std::sqrt(t), 0.1 * std::sqrt(t), 3});
  const std::string svg = RenderSvg({growing, ConstantAggregate("a<b&c", 5.0, 2000)});
  EXPECT_TRUE(WellFormedXml(std::regex_replace(svg, std::regex("&(amp|lt|gt|quot);"), "")));
  EXPECT_EQ(CountOf(svg, "<polyline"), 2);
  EXPECT_EQ(CountOf(svg, "<polygon class=\"band\""), 2);
  EXPECT_EQ(CountOf(svg, "<g class=\"legend\">"), 2);
  EXPECT_NE(svg.find(">round</text>"), std::string::npos);
  EXPECT_NE(svg.find(">cumulative regret</text>"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b&amp;c"), std::string::npos);
  EXPECT_NE(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\""), std::string::npos);
}

TEST(SvgTest, ConstantSeriesIsHorizontal) {
  const std::string svg = RenderSvg({ConstantAggregate("flat", 2.0, 50)});
  const std::size_t start = svg.find("<polyline");
  const std::size_t points = svg.find("points=\"", start) + 8;
  const std::string list = svg.substr(points, svg.find('"', points) - points);
  std::istringstream in(list);
  std::string pair;
  std::vector<double> ys;
  std::vector<double> xs;
  while (in >> pair) {
    const auto comma = pair.find(',');
    xs.push_back(std::stod(pair.substr(0, comma)));
    ys.push_back(std::stod(pair.substr(comma + 1)));
  }
  ASSERT_EQ(ys.size(), 50u);
  for (double y : ys) EXPECT_EQ(y, ys.front());
  EXPECT_LT(xs.front(), xs.back());
}

TEST(SvgTest, DownsamplesAndRejectsEmpty) {
  Aggregate big = ConstantAggregate("big", 1.0, 15000);
  SvgOptions options;
  options.max_points = 100;
  const std::string svg = RenderSvg({big}, options);
  const std::size_t start = svg.find("<polyline");
  const std::string line = svg.substr(start, svg.find("/>", start) - start);
  EXPECT_EQ(CountOf(line, ","), 100);
  EXPECT_THROW(RenderSvg({}), std::invalid_argument);
  const auto dir = testing::TempDir("svg_emit");
  EmitSvg({big}, (dir / "r.svg").string());
  EXPECT_GT(fs::file_size(dir / "r.svg"), 500u);
}

// ---------------------------------------------------------------- runs

void ExpectBookkeeping(const RegretTrace& trace, const ExperimentConfig& c) {
  ASSERT_EQ(static_cast<long>(trace.rows.size()), c.horizon);
  double cum = 0.0;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    EXPECT_EQ(r.t, static_cast<long>(i) + 1);
    EXPECT_GE(r.inst_regret, 0.0);
    cum += r.inst_regret;
    EXPECT_EQ(r.cum_regret, cum);
    EXPECT_LE(r.cum_regret, static_cast<double>(r.t));
    EXPECT_EQ(r.epoch, (r.t - 1) / c.epoch_length);
    EXPECT_GE(r.wall_ms, 0.0);
  }
}

TEST(RunOneTest, OracleHasZeroRegret) {
  ExperimentConfig c = TinyConfig();
  c.horizon = 500;
  const RegretTrace t = RunOne(c, Algorithm::kOracle, 1);
  ExpectBookkeeping(t, c);
  EXPECT_EQ(t.final_regret(), 0.0);
}

TEST(RunOneTest, RegretBookkeepingForEveryAlgorithm) {
  const ExperimentConfig c = TinyConfig();
  for (Algorithm a : c.algorithms) {
    const RegretTrace t = RunOne(c, a, 2);
    EXPECT_EQ(t.algorithm, AlgorithmName(a));
    EXPECT_EQ(t.config_hash, ConfigHash(c));
    ExpectBookkeeping(t, c);
    for (int k = 0; k < 9; ++k) EXPECT_EQ(t.rows[k].arm, k % 3);
  }
}

TEST(RunOneTest, UniformOnClassificationMatchesExpectedRegret) {
  const auto dir = testing::TempDir("uniform_cls");
  WriteFile(dir / "d.csv", ClusterCsv(4, 6000, 3));
  ExperimentConfig c = TinyConfig();
  c.environment = EnvironmentKind::kDataset;
  c.dataset_path = (dir / "d.csv").string();
  c.horizon = 5000;
  c.warm_start = 0;
  const RegretTrace t = RunOne(c, Algorithm::kUniform, 4);
  ExpectBookkeeping(t, c);
  for (const TraceRow& r : t.rows) {
    EXPECT_TRUE(r.inst_regret == 0.0 || r.inst_regret == 1.0);
    EXPECT_EQ(r.reward, 1.0 - r.inst_regret);
  }
  const double expected = 0.75;
  EXPECT_NEAR(t.final_regret() / 5000.0, expected, 0.05 * expected);
}

TEST(RunOneTest, DeterministicAndByteIdenticalFiles) {
  const ExperimentConfig c = TinyConfig();
  const auto dir = testing::TempDir("determinism");
  for (Algorithm a : c.algorithms) {
    const RegretTrace x = RunOne(c, a, 9);
    const RegretTrace y = RunOne(c, a, 9);
    WriteTraceCsv(x, (dir / "x.csv").string());
    WriteTraceCsv(y, (dir / "y.csv").string());
    EXPECT_EQ(ReadFile(dir / "x.csv"), ReadFile(dir / "y.csv")) << AlgorithmName(a);
  }
  const RegretTrace other = RunOne(c, Algorithm::kNeuralLinUcb, 10);
  const RegretTrace base = RunOne(c, Algorithm::kNeuralLinUcb, 9);
  EXPECT_NE(other.rows.back().cum_regret, base.rows.back().cum_regret);
}

TEST(RunOneTest, SharedStreamAcrossAlgorithms) {
  // Every algorithm of a seed sees the same contexts: the oracle's regret is
  // zero and the per-round best reward is common.
  ExperimentConfig c = TinyConfig();
  const RegretTrace o = RunOne(c, Algorithm::kOracle, 3);
  const RegretTrace u = RunOne(c, Algorithm::kUniform, 3);
  for (std::size_t i = 0; i < o.rows.size(); ++i) {
    if (o.rows[i].arm == u.rows[i].arm) {
      EXPECT_EQ(u.rows[i].inst_regret, 0.0);
    }
  }
}

TEST(RunOneTest, WallTimeSumsToRunTime) {
  ExperimentConfig c = TinyConfig();
  c.timing = true;
  c.horizon = 400;
  c.width = 64;
  c.iterations = 100;
  c.repetitions = 1;
  c.algorithms = {Algorithm::kNeuralLinUcb};
  const SuiteResult r = RunSuite(c);
  ASSERT_EQ(r.traces.size(), 1u);
  double sum = 0.0;
  for (const TraceRow& row : r.traces[0].rows) {
    EXPECT_GE(row.wall_ms, 0.0);
    sum += row.wall_ms;
  }
  EXPECT_NEAR(sum, r.run_elapsed_ms[0], 0.1 * r.run_elapsed_ms[0]);
}

TEST(RunOneTest, TimingOffZeroesOnlyWallColumn) {
  ExperimentConfig c = TinyConfig();
  const RegretTrace off = RunOne(c, Algorithm::kNeuralLinUcb, 6);
  c.timing = true;
  const RegretTrace on = RunOne(c, Algorithm::kNeuralLinUcb, 6);
  ASSERT_EQ(on.rows.size(), off.rows.size());
  for (std::size_t i = 0; i < on.rows.size(); ++i) {
    EXPECT_EQ(off.rows[i].wall_ms, 0.0);
    EXPECT_EQ(on.rows[i].arm, off.rows[i].arm);
    EXPECT_EQ(on.rows[i].reward, off.rows[i].reward);
    EXPECT_EQ(on.rows[i].cum_regret, off.rows[i].cum_regret);
  }
}

TEST(RunOneTest, ResumeFromSnapshotIsBitIdentical) {
  const ExperimentConfig c = TinyConfig();
  const auto dir = testing::TempDir("resume");
  for (Algorithm a : c.algorithms) {
    const RegretTrace full = RunOne(c, a, 11);
    const std::string snap = (dir / (std::string(AlgorithmName(a)) + ".json")).string();

    // The last snapshot before the horizon is taken at round 90.
    RunOptions first;
    first.snapshot_path = snap;
    first.snapshot_every = 30;
    const RegretTrace partial = RunOne(c, a, 11, first);
    ASSERT_TRUE(fs::exists(snap));
    const nlohmann::json j = nlohmann::json::parse(ReadFile(snap));
    EXPECT_EQ(j.at("format"), "neural-linucb-run-snapshot");
    EXPECT_EQ(j.at("t"), 90);

    RunOptions resume;
    resume.snapshot_path = snap;
    resume.resume = true;
    const RegretTrace resumed = RunOne(c, a, 11, resume);
    ASSERT_EQ(resumed.rows.size(), full.rows.size());
    WriteTraceCsv(full, (dir / "full.csv").string());
    WriteTraceCsv(resumed, (dir / "resumed.csv").string());
    EXPECT_EQ(ReadFile(dir / "full.csv"), ReadFile(dir / "resumed.csv")) << AlgorithmName(a);
    EXPECT_EQ(partial.rows.size(), full.rows.size());
  }
}

TEST(RunOneTest, ResumeRejectsForeignSnapshot) {
  const ExperimentConfig c = TinyConfig();
  const auto dir = testing::TempDir("resume_foreign");
  const std::string snap = (dir / "s.json").string();
  RunOptions save;
  save.snapshot_path = snap;
  save.snapshot_every = 50;
  RunOne(c, Algorithm::kLinUcb, 1, save);
  RunOptions resume;
  resume.snapshot_path = snap;
  resume.resume = true;
  EXPECT_THROW(RunOne(c, Algorithm::kLinUcb, 2, resume), std::runtime_error);
  EXPECT_THROW(RunOne(c, Algorithm::kUniform, 1, resume), std::runtime_error);
}

TEST(RunOneTest, ErrorCarriesPartialTrace) {
  ExperimentConfig c = TinyConfig();
  c.step_size = 1e12;
  try {
    RunOne(c, Algorithm::kNeuralLinUcb, 1);
    FAIL();
  } catch (const RunError& e) {
    EXPECT_EQ(e.partial().rows.size(), 39u);
    EXPECT_NE(std::string(e.what()).find("round 40"), std::string::npos) << e.what();
  }
}

TEST(RunSuiteTest, WritesArtifactsAndSeedsByAddition) {
  ExperimentConfig c = TinyConfig();
  c.seed = 100;
  c.repetitions = 3;
  c.algorithms = {Algorithm::kLinUcb, Algorithm::kUniform};
  const auto dir = testing::TempDir("suite");
  const SuiteResult r = RunSuite(c, dir.string());
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.aggregates.size(), 2u);
  EXPECT_EQ(r.aggregates[0].runs, 3);
  for (const AggregateRow& row : r.aggregates[0].rows) EXPECT_EQ(row.count, 3);
  for (std::uint64_t seed : {100, 101, 102}) {
    const fs::path p = dir / TraceFileName("linucb", seed);
    ASSERT_TRUE(fs::exists(p));
    const RegretTrace t = ReadTraceCsv(p.string());
    EXPECT_EQ(t.seed, seed);
    EXPECT_EQ(t.config_hash, r.config_hash);
    const RegretTrace direct = RunOne(c, Algorithm::kLinUcb, seed);
    EXPECT_EQ(t.rows.back().cum_regret, std::stod(FormatG9(direct.rows.back().cum_regret)));
  }
  EXPECT_EQ(ReadAggregateCsv((dir / AggregateFileName("uniform")).string()).config_hash, r.config_hash);
  const nlohmann::json summary = nlohmann::json::parse(ReadFile(dir / "summary.json"));
  EXPECT_EQ(summary.at("config_hash"), r.config_hash);
  EXPECT_EQ(summary.at("runs").size(), 6u);

  ExperimentConfig threaded = c;
  threaded.threads = 3;
  const SuiteResult p = RunSuite(threaded);
  ASSERT_EQ(p.aggregates.size(), 2u);
  EXPECT_EQ(p.aggregates[1].rows.back().mean, r.aggregates[1].rows.back().mean);
}

TEST(RunSuiteTest, RecordsFailuresAndContinues) {
  ExperimentConfig c = TinyConfig();
  c.algorithms = {Algorithm::kNeuralLinUcb, Algorithm::kLinUcb};
  c.step_size = 1e12;  // training diverges at the first epoch
  c.repetitions = 2;
  const auto dir = testing::TempDir("suite_fail");
  const SuiteResult r = RunSuite(c, dir.string());
  // Depending on the seed the huge step either overflows the loss or kills
  // every unit; at least one run must fail.
  ASSERT_GE(r.failures.size(), 1u);
  for (const RunFailure& f : r.failures) {
    EXPECT_EQ(f.algorithm, "neural-linucb");
    EXPECT_EQ(f.rounds_completed, c.epoch_length - 1);
    std::string name = TraceFileName(f.algorithm, f.seed);
    name.replace(name.size() - 4, 4, ".partial.csv");
    ASSERT_TRUE(fs::exists(dir / name));
    EXPECT_EQ(ReadTraceCsv((dir / name).string()).rows.size(), static_cast<std::size_t>(c.epoch_length - 1));
  }
  ASSERT_FALSE(r.aggregates.empty());
  EXPECT_EQ(r.aggregates.back().algorithm, "linucb");
  EXPECT_EQ(r.aggregates.back().runs, 2);
  const nlohmann::json summary = nlohmann::json::parse(ReadFile(dir / "summary.json"));
  EXPECT_EQ(summary.at("failures").size(), r.failures.size());
}

// ------------------------------------------------------------------ CLI

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "neural_linucb");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kCliConfig =
    "synthetic_dim = 3\narms = 3\nhorizon = 100\nepoch_length = 50\nwidth = 16\niterations = 10\n"
    "repetitions = 2\nalgorithms = linucb,uniform\ntiming = off\nthreads = 1\n";

TEST(CliTest, ValidateRunAndPlot) {
  const auto dir = testing::TempDir("cli");
  WriteFile(dir / "c.conf", kCliConfig);
  const CliResult v = Cli({"validate", "--config", (dir / "c.conf").string()});
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_EQ(v.out.rfind("ok ", 0), 0u);

  const CliResult run = Cli({"run", "--config", (dir / "c.conf").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(run.code, 0) << run.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "regret.svg"));
  EXPECT_TRUE(fs::exists(dir / "out" / "trace_linucb_seed1.csv"));

  const CliResult plot = Cli({"plot", "--in", (dir / "out" / "trace_*.csv").string(), "--out", (dir / "p.svg").string()});
  EXPECT_EQ(plot.code, 0) << plot.err;
  ASSERT_TRUE(fs::exists(dir / "p.svg"));
  const std::string svg = ReadFile(dir / "p.svg");
  EXPECT_EQ(CountOf(svg, "<polyline"), 2);
}

TEST(CliTest, MissingDatasetNamesPath) {
  const auto dir = testing::TempDir("cli_missing");
  const std::string missing = (dir / "no_such_statlog.csv").string();
  WriteFile(dir / "c.conf", "env = dataset\ndataset_name = statlog\ndataset_path = " + missing + "\nhorizon = 100\n");
  for (const char* cmd : {"run", "validate"}) {
    const CliResult r = Cli({cmd, "--config", (dir / "c.conf").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  }
}

TEST(CliTest, RejectsUnknownFlagsWithUsage) {
  const CliResult a = Cli({"run", "--config", "x.conf", "--fast"});
  EXPECT_NE(a.code, 0);
  EXPECT_NE(a.err.find("--fast"), std::string::npos);
  EXPECT_NE(a.err.find("Usage"), std::string::npos);
  EXPECT_NE(Cli({}).code, 0);
  EXPECT_NE(Cli({"dance"}).code, 0);
  EXPECT_NE(Cli({"ntk", "--points", "p.csv"}).code, 0);
}

TEST(CliTest, NtkWritesGramAndSweep) {
  const auto dir = testing::TempDir("cli_ntk");
  std::mt19937_64 rng(1);
  std::string csv = "a,b,c,d\n";
  for (int i = 0; i < 5; ++i) {
    const Vector x = testing::RandomUnitHalves(2, rng);
    csv += FormatG9(x(0)) + "," + FormatG9(x(1)) + "," + FormatG9(x(2)) + "," + FormatG9(x(3)) + "\n";
  }
  WriteFile(dir / "p.csv", csv);
  const CliResult r = Cli({"ntk", "--points", (dir / "p.csv").string(), "--depth", "2", "--widths", "16,64",
                           "--seeds", "2", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string gram = ReadFile(dir / "o" / "ntk_gram.csv");
  EXPECT_EQ(gram.rfind("#schema=ntk-gram/v1 depth=2 points=5 lambda_min=", 0), 0u);
  EXPECT_EQ(CountOf(gram, "\n"), 2 + 25);
  const std::string sweep = ReadFile(dir / "o" / "ntk_sweep.csv");
  EXPECT_EQ(CountOf(sweep, "\n"), 2 + 4);
  EXPECT_NE(r.out.find("lambda_min"), std::string::npos);
}

TEST(CliTest, BinaryExitCodes) {
  const std::string binary = NLUCB_CLI_PATH;
  ASSERT_TRUE(fs::exists(binary)) << binary;
  const auto dir = testing::TempDir("cli_binary");
  WriteFile(dir / "c.conf", kCliConfig);
  const std::string quiet = " > " + (dir / "log").string() + " 2>&1";
  EXPECT_EQ(std::system((binary + " validate --config " + (dir / "c.conf").string() + quiet).c_str()), 0);
  EXPECT_NE(std::system((binary + " validate --config " + (dir / "nope.conf").string() + quiet).c_str()), 0);
  EXPECT_NE(std::system((binary + " validate --bogus" + quiet).c_str()), 0);
}

}  // namespace
}  // namespace nlucb
