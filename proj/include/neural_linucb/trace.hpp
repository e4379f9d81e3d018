#ifndef NEURAL_LINUCB_TRACE_HPP_
#define NEURAL_LINUCB_TRACE_HPP_

// Regret traces, suite aggregates, and their CSV files.
//
// Trace CSV (schema trace/v1):
//   #schema=trace/v1 algorithm=<tag> seed=<n> config_hash=<hex>
//   t,arm,reward,inst_regret,cum_regret,epoch,wall_ms
//   ...
// Aggregate CSV (schema aggregate/v1):
//   #schema=aggregate/v1 algorithm=<tag> runs=<n> config_hash=<hex>
//   t,mean_cum_regret,std_cum_regret,count
//   ...
// Floating-point fields are written with 9 significant digits. `epoch` is
// the 0-based epoch index (t - 1) / H.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "neural_linucb/environment.hpp"

namespace nlucb {

struct TraceRow {
  long t = 0;
  int arm = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  long epoch = 0;
  double wall_ms = 0.0;
};

struct RegretTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<TraceRow> rows;

  double final_regret() const { return rows.empty() ? 0.0 : rows.back().cum_regret; }
};

struct AggregateRow {
  long t = 0;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

struct Aggregate {
  std::string algorithm;
  std::string config_hash;
  int runs = 0;
  std::vector<AggregateRow> rows;
};

inline constexpr const char* kTraceColumns = "t,arm,reward,inst_regret,cum_regret,epoch,wall_ms";
inline constexpr const char* kAggregateColumns = "t,mean_cum_regret,std_cum_regret,count";

inline std::string FormatG9(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

// Per-round mean and sample standard deviation of cumulative regret. Traces
// are reduced in seed order so the result does not depend on run order.
inline Aggregate AggregateTraces(std::vector<const RegretTrace*> traces) {
  if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
  std::sort(traces.begin(), traces.end(),
            [](const RegretTrace* a, const RegretTrace* b) { return a->seed < b->seed; });
  Aggregate agg;
  agg.algorithm = traces.front()->algorithm;
  agg.config_hash = traces.front()->config_hash;
  agg.runs = static_cast<int>(traces.size());
  std::size_t length = 0;
  for (const RegretTrace* trace : traces) length = std::max(length, trace->rows.size());
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    int count = 0;
    long t = 0;
    for (const RegretTrace* trace : traces) {
      if (i < trace->rows.size()) {
        sum += trace->rows[i].cum_regret;
        t = trace->rows[i].t;
        ++count;
      }
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const RegretTrace* trace : traces) {
      if (i < trace->rows.size()) sq += (trace->rows[i].cum_regret - mean) * (trace->rows[i].cum_regret - mean);
    }
    agg.rows.push_back({t, mean, count > 1 ? std::sqrt(sq / (count - 1)) : 0.0, count});
  }
  return agg;
}

inline void WriteTraceCsv(const RegretTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "#schema=trace/v1 algorithm=" << trace.algorithm << " seed=" << trace.seed
      << " config_hash=" << trace.config_hash << '\n'
      << kTraceColumns << '\n';
  for (const TraceRow& r : trace.rows) {
    out << r.t << ',' << r.arm << ',' << FormatG9(r.reward) << ',' << FormatG9(r.inst_regret) << ','
        << FormatG9(r.cum_regret) << ',' << r.epoch << ',' << FormatG9(r.wall_ms) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void WriteAggregateCsv(const Aggregate& agg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "#schema=aggregate/v1 algorithm=" << agg.algorithm << " runs=" << agg.runs
      << " config_hash=" << agg.config_hash << '\n'
      << kAggregateColumns << '\n';
  for (const AggregateRow& r : agg.rows) {
    out << r.t << ',' << FormatG9(r.mean) << ',' << FormatG9(r.stddev) << ',' << r.count << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace internal {

// Parses `#schema=<name> key=value ...` into a map including "schema".
inline std::map<std::string, std::string> ParseSchemaLine(const std::string& line, const std::string& path) {
  if (line.rfind("#schema=", 0) != 0) throw std::runtime_error(path + ": missing #schema= header line");
  std::map<std::string, std::string> fields;
  std::istringstream in(line.substr(1));
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return fields;
}

inline std::vector<double> ParseRow(const std::string& line, std::size_t expected, const std::string& path,
                                    int line_number) {
  std::vector<double> values;
  for (std::string_view field : SplitFields(line)) {
    const auto value = ParseDouble(field);
    if (!value) throw std::runtime_error(path + ":" + std::to_string(line_number) + ": bad number");
    values.push_back(*value);
  }
  if (values.size() != expected) {
    throw std::runtime_error(path + ":" + std::to_string(line_number) + ": expected " + std::to_string(expected) +
                             " columns");
  }
  return values;
}

}  // namespace internal

// Schema name ("trace/v1", "aggregate/v1", ...) of a CSV produced here.
inline std::string ReadSchema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  return internal::ParseSchemaLine(line, path).at("schema");
}

inline RegretTrace ReadTraceCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto meta = internal::ParseSchemaLine(line, path);
  if (meta.at("schema") != "trace/v1") throw std::runtime_error(path + ": not a trace/v1 file");
  RegretTrace trace;
  trace.algorithm = meta.count("algorithm") ? meta.at("algorithm") : "";
  trace.seed = meta.count("seed") ? std::stoull(meta.at("seed")) : 0;
  trace.config_hash = meta.count("config_hash") ? meta.at("config_hash") : "";
  std::getline(in, line);
  if (internal::Trim(line) != kTraceColumns) throw std::runtime_error(path + ": unexpected trace columns");
  int line_number = 2;
  while (std::getline(in, line)) {
    ++line_number;
    if (internal::Trim(line).empty()) continue;
    const auto v = internal::ParseRow(line, 7, path, line_number);
    trace.rows.push_back({static_cast<long>(v[0]), static_cast<int>(v[1]), v[2], v[3], v[4],
                          static_cast<long>(v[5]), v[6]});
  }
  return trace;
}

inline Aggregate ReadAggregateCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  const auto meta = internal::ParseSchemaLine(line, path);
  if (meta.at("schema") != "aggregate/v1") throw std::runtime_error(path + ": not an aggregate/v1 file");
  Aggregate agg;
  agg.algorithm = meta.count("algorithm") ? meta.at("algorithm") : "";
  agg.runs = meta.count("runs") ? std::stoi(meta.at("runs")) : 0;
  agg.config_hash = meta.count("config_hash") ? meta.at("config_hash") : "";
  std::getline(in, line);
  if (internal::Trim(line) != kAggregateColumns) throw std::runtime_error(path + ": unexpected aggregate columns");
  int line_number = 2;
  while (std::getline(in, line)) {
    ++line_number;
    if (internal::Trim(line).empty()) continue;
    const auto v = internal::ParseRow(line, 4, path, line_number);
    agg.rows.push_back({static_cast<long>(v[0]), v[1], v[2], static_cast<int>(v[3])});
  }
  return agg;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_TRACE_HPP_
