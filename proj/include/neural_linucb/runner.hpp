#ifndef NEURAL_LINUCB_RUNNER_HPP_
#define NEURAL_LINUCB_RUNNER_HPP_

// Seeded runs, suites of repetitions, and crash-resume snapshots.
//
// Seeds: run r of a suite uses seed = base + r. The context stream is seeded
// with the run seed, reward noise and agent randomness with values derived
// from it, so every algorithm in a repetition faces the same contexts and the
// same noise draws.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "neural_linucb/config.hpp"
#include "neural_linucb/environment.hpp"
#include "neural_linucb/policies.hpp"
#include "neural_linucb/trace.hpp"

namespace nlucb {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t NoiseSeed(std::uint64_t run_seed) { return SplitMix64(run_seed ^ 0x6e6f697365ULL); }
inline std::uint64_t AgentSeed(std::uint64_t run_seed) { return SplitMix64(run_seed ^ 0x6167656e74ULL); }

// Read-only data shared by all runs of a suite.
struct PreparedEnvironment {
  std::optional<RawDataset> dataset;  // scaled
};

inline PreparedEnvironment PrepareEnvironment(const ExperimentConfig& config) {
  PreparedEnvironment prepared;
  if (config.environment == EnvironmentKind::kDataset) {
    const std::string path = ResolveDatasetPath(config);
    RawDataset dataset = LoadDataset(path, config.dataset_name);
    MinMaxScale(dataset);
    prepared.dataset = std::move(dataset);
  }
  return prepared;
}

inline std::unique_ptr<ContextStream> MakeStream(const ExperimentConfig& config, const PreparedEnvironment& prepared,
                                                 std::uint64_t seed) {
  if (config.environment == EnvironmentKind::kSynthetic) {
    return std::make_unique<SyntheticStream>(config.synthetic_kind, config.synthetic_dim, config.arms, seed,
                                             config.noise);
  }
  if (!prepared.dataset) throw std::logic_error("dataset environment was not prepared");
  return std::make_unique<ClassificationStream>(*prepared.dataset, config.horizon, seed, config.cycle);
}

inline AgentConfig MakeAgentConfig(const ExperimentConfig& config, Algorithm algorithm, int arms, int feature_dim,
                                   std::uint64_t run_seed) {
  AgentConfig a;
  a.algorithm = algorithm;
  a.epoch_length = config.epoch_length;
  a.lambda = config.lambda;
  a.alpha.mode = config.alpha_mode;
  a.alpha.alpha = config.alpha;
  a.alpha.nu = config.noise;
  a.alpha.dim = feature_dim;
  a.alpha.epoch_length = config.epoch_length;
  a.alpha.arms = arms;
  a.alpha.lambda = config.lambda;
  a.alpha.delta = config.delta;
  a.alpha.bound = config.bound;
  a.width = config.width;
  a.depth = config.depth;
  a.train = TrainConfig{config.step_size, config.iterations, config.early_stop, config.history, config.warm_train,
                        false};
  if (algorithm == Algorithm::kNeuralUcbDiag) a.train.step_size = config.diag_step_size;
  a.init = config.init;
  a.warm_start_pulls = config.warm_start;
  a.warm_start_updates = config.warm_start_updates;
  a.seed = AgentSeed(run_seed);
  return a;
}

// Thrown when a run aborts; carries the rounds completed before the error.
class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, RegretTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const RegretTrace& partial() const { return partial_; }

 private:
  RegretTrace partial_;
};

struct RunOptions {
  // Snapshot file for crash-resume; empty disables snapshots.
  std::string snapshot_path;
  long snapshot_every = 0;  // rounds between snapshots
  bool resume = false;      // continue from snapshot_path if it exists
  // Inspection hook, called with the agent after the last round.
  std::function<void(const Agent&)> after_run;
};

namespace internal {

inline nlohmann::json TraceRowsToJson(const std::vector<TraceRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const TraceRow& r : rows) {
    out.push_back({r.t, r.arm, r.reward, r.inst_regret, r.cum_regret, r.epoch, r.wall_ms});
  }
  return out;
}

inline std::vector<TraceRow> TraceRowsFromJson(const nlohmann::json& j) {
  std::vector<TraceRow> rows;
  for (const auto& r : j) {
    rows.push_back({r[0].get<long>(), r[1].get<int>(), r[2].get<double>(), r[3].get<double>(), r[4].get<double>(),
                    r[5].get<long>(), r[6].get<double>()});
  }
  return rows;
}

inline void WriteFileAtomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace internal

// Snapshot file (format "neural-linucb-run-snapshot", version 1): config
// hash, algorithm, seed, completed round t, noise generator state, agent
// state and the trace so far. Resuming replays the stream for t rounds.
inline void SaveRunSnapshot(const std::string& path, const RegretTrace& trace, long t, const std::mt19937_64& noise,
                            const Agent& agent) {
  nlohmann::json j = {{"format", "neural-linucb-run-snapshot"},
                      {"version", 1},
                      {"config_hash", trace.config_hash},
                      {"algorithm", trace.algorithm},
                      {"seed", trace.seed},
                      {"t", t},
                      {"noise_rng", internal::RngToString(noise)},
                      {"agent", agent.SaveState()},
                      {"rows", internal::TraceRowsToJson(trace.rows)}};
  internal::WriteFileAtomic(path, j.dump());
}

// Runs T rounds: select, draw reward, observe, maybe retrain. Regret is
// measured against expected rewards.
inline RegretTrace RunOne(const ExperimentConfig& config, const PreparedEnvironment& prepared, Algorithm algorithm,
                          std::uint64_t seed, const RunOptions& options = {}) {
  RegretTrace trace;
  trace.algorithm = std::string(AlgorithmName(algorithm));
  trace.seed = seed;
  trace.config_hash = ConfigHash(config);
  trace.rows.reserve(static_cast<std::size_t>(config.horizon));

  std::unique_ptr<ContextStream> stream = MakeStream(config, prepared, seed);
  const AgentConfig agent_config =
      MakeAgentConfig(config, algorithm, stream->arm_count(), stream->feature_dim(), seed);
  std::unique_ptr<Agent> agent = MakeAgent(agent_config, stream->arm_count(), stream->feature_dim());
  std::mt19937_64 noise_rng(NoiseSeed(seed));
  const double noise = stream->noise();

  long start = 1;
  double cumulative = 0.0;
  if (options.resume && !options.snapshot_path.empty() && std::filesystem::exists(options.snapshot_path)) {
    std::ifstream in(options.snapshot_path);
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "neural-linucb-run-snapshot" || j.at("version") != 1) {
      throw std::runtime_error(options.snapshot_path + ": not a version 1 run snapshot");
    }
    if (j.at("config_hash") != trace.config_hash || j.at("algorithm") != trace.algorithm ||
        j.at("seed").get<std::uint64_t>() != seed) {
      throw std::runtime_error(options.snapshot_path + ": snapshot belongs to a different run");
    }
    const long done = j.at("t").get<long>();
    for (long s = 0; s < done; ++s) stream->Next();
    internal::RngFromString(noise_rng, j.at("noise_rng").get<std::string>());
    agent->LoadState(j.at("agent"));
    trace.rows = internal::TraceRowsFromJson(j.at("rows"));
    if (static_cast<long>(trace.rows.size()) != done) throw std::runtime_error("snapshot: trace length mismatch");
    if (!trace.rows.empty()) cumulative = trace.rows.back().cum_regret;
    start = done + 1;
  }

  using Clock = std::chrono::steady_clock;
  for (long t = start; t <= config.horizon; ++t) {
    try {
      const auto begin = config.timing ? Clock::now() : Clock::time_point{};
      const ContextSet contexts = stream->Next();
      const int arm = algorithm == Algorithm::kOracle ? contexts.best_arm : agent->SelectArm(contexts, t);
      const double reward = DrawReward(contexts, arm, noise, noise_rng);
      agent->Observe(t, contexts, arm, reward);
      agent->MaybeRetrain(t);
      const double inst = contexts.best_reward() - contexts.expected_rewards[arm];
      cumulative += inst;
      double wall_ms = 0.0;
      if (config.timing) wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - begin).count();
      trace.rows.push_back({t, arm, reward, inst, cumulative, (t - 1) / config.epoch_length, wall_ms});
    } catch (const std::exception& e) {
      throw RunError(trace.algorithm + " seed " + std::to_string(seed) + " round " + std::to_string(t) + ": " +
                         e.what(),
                     trace);
    }
    if (!options.snapshot_path.empty() && options.snapshot_every > 0 && t % options.snapshot_every == 0 &&
        t < config.horizon) {
      SaveRunSnapshot(options.snapshot_path, trace, t, noise_rng, *agent);
    }
  }
  if (options.after_run) options.after_run(*agent);
  return trace;
}

inline RegretTrace RunOne(const ExperimentConfig& config, Algorithm algorithm, std::uint64_t seed,
                          const RunOptions& options = {}) {
  return RunOne(config, PrepareEnvironment(config), algorithm, seed, options);
}

struct RunFailure {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string message;
  long rounds_completed = 0;
};

struct SuiteResult {
  std::string config_hash;
  std::vector<RegretTrace> traces;  // completed runs, by algorithm then seed
  std::vector<Aggregate> aggregates;
  std::vector<RunFailure> failures;
  std::vector<double> run_elapsed_ms;  // parallel to traces
};

inline std::string TraceFileName(const std::string& algorithm, std::uint64_t seed) {
  return "trace_" + algorithm + "_seed" + std::to_string(seed) + ".csv";
}

inline std::string AggregateFileName(const std::string& algorithm) { return "aggregate_" + algorithm + ".csv"; }

// Runs algorithms x repetitions, in parallel when threads allow. When
// `out_dir` is non-empty, each worker writes its own trace CSV (failed runs
// get a ".partial.csv"), then aggregates and summary.json are written.
inline SuiteResult RunSuite(const ExperimentConfig& config, const std::string& out_dir = "") {
  ValidateConfig(config);
  const PreparedEnvironment prepared = PrepareEnvironment(config);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  struct Job {
    Algorithm algorithm;
    std::uint64_t seed;
    std::optional<RegretTrace> trace;
    std::optional<RunFailure> failure;
    double elapsed_ms = 0.0;
  };
  std::vector<Job> jobs;
  for (Algorithm a : config.algorithms) {
    for (int r = 0; r < config.repetitions; ++r) jobs.push_back({a, config.seed + static_cast<std::uint64_t>(r), std::nullopt, std::nullopt, 0.0});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      Job& job = jobs[i];
      const auto begin = std::chrono::steady_clock::now();
      try {
        job.trace = RunOne(config, prepared, job.algorithm, job.seed);
        if (!out_dir.empty()) {
          WriteTraceCsv(*job.trace, out_dir + "/" + TraceFileName(job.trace->algorithm, job.seed));
        }
      } catch (const RunError& e) {
        job.failure = RunFailure{std::string(AlgorithmName(job.algorithm)), job.seed, e.what(),
                                 static_cast<long>(e.partial().rows.size())};
        if (!out_dir.empty()) {
          std::string name = TraceFileName(e.partial().algorithm, job.seed);
          name.replace(name.size() - 4, 4, ".partial.csv");
          try {
            WriteTraceCsv(e.partial(), out_dir + "/" + name);
          } catch (const std::exception&) {
          }
        }
      } catch (const std::exception& e) {
        job.failure = RunFailure{std::string(AlgorithmName(job.algorithm)), job.seed, e.what(), 0};
      }
      job.elapsed_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begin).count();
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  SuiteResult result;
  result.config_hash = ConfigHash(config);
  for (Job& job : jobs) {
    if (job.trace) {
      result.traces.push_back(std::move(*job.trace));
      result.run_elapsed_ms.push_back(job.elapsed_ms);
    }
    if (job.failure) result.failures.push_back(*job.failure);
  }
  for (Algorithm a : config.algorithms) {
    std::vector<const RegretTrace*> group;
    for (const RegretTrace& trace : result.traces) {
      if (trace.algorithm == AlgorithmName(a)) group.push_back(&trace);
    }
    if (group.empty()) continue;
    result.aggregates.push_back(AggregateTraces(group));
  }

  if (!out_dir.empty()) {
    nlohmann::json summary = {{"config_hash", result.config_hash},
                              {"config", CanonicalConfig(config)},
                              {"runs", nlohmann::json::array()},
                              {"failures", nlohmann::json::array()}};
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
      const RegretTrace& trace = result.traces[i];
      summary["runs"].push_back({{"algorithm", trace.algorithm},
                                 {"seed", trace.seed},
                                 {"final_regret", trace.final_regret()},
                                 {"elapsed_ms", config.timing ? result.run_elapsed_ms[i] : 0.0}});
    }
    for (const RunFailure& f : result.failures) {
      summary["failures"].push_back({{"algorithm", f.algorithm},
                                     {"seed", f.seed},
                                     {"message", f.message},
                                     {"rounds_completed", f.rounds_completed}});
    }
    for (const Aggregate& agg : result.aggregates) {
      WriteAggregateCsv(agg, out_dir + "/" + AggregateFileName(agg.algorithm));
    }
    internal::WriteFileAtomic(out_dir + "/summary.json", summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_RUNNER_HPP_
