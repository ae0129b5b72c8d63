#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "bpnc/channel/scenario.hpp"
#include "bpnc/protocol/node.hpp"

namespace bpnc::engine {

/// One metrics row: the state of one node at one sampling instant.
struct Sample {
  double time_s = 0;
  NodeId node = 0;
  std::uint64_t backlog = 0;
  double energy_mj = 0;
  std::uint64_t overhead = 0;
  /// Source packets this node has decoded correctly as a destination.
  std::uint64_t delivered = 0;
};

struct AccuracyPoint {
  std::size_t received = 0;
  double sum = 0;
  std::size_t count = 0;

  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

struct FlowSummary {
  FlowIndex index = 0;
  NodeId source = 0;
  std::vector<NodeId> destinations;
  std::uint64_t injected = 0;
  /// Correctly decoded source packets per destination.
  std::map<NodeId, std::uint64_t> decoded;
  /// Source packets decoded by every destination of the flow.
  std::uint64_t delivered = 0;
  double throughput_pps = 0;
};

struct NodeSummary {
  NodeId id = 0;
  protocol::NodeCounters counters;
  double energy_mj = 0;
  std::uint64_t final_backlog = 0;
  double mean_backlog = 0;
  double data_power_dbm = 0;
  std::map<NodeId, std::uint64_t> data_from;
  std::map<NodeId, std::uint64_t> data_to;
};

struct RunResult {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_s = 0;
  std::vector<Sample> samples;
  std::vector<FlowSummary> flows;
  std::vector<NodeSummary> nodes;
  /// Mean fraction of symbols correct against packets received, pooled over
  /// sampled generations and destinations.
  std::vector<AccuracyPoint> accuracy;
  /// Fractions correct in the last rank-deficient state of each generation
  /// that reached full rank (rank-deficient decoder only).
  std::vector<double> pre_full_rank;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  /// Failed DATA frames at their intended receiver while interference was on
  /// the air.
  std::uint64_t collisions = 0;
  std::uint64_t decode_errors = 0;
  /// Independent global energy meter (mJ), for cross-checking node totals.
  double energy_meter_mj = 0;
  std::uint64_t events = 0;

  double throughput_pps() const;
  std::uint64_t delivered() const;
  double total_energy_mj() const;
  std::uint64_t total_overhead() const;
  double mean_backlog() const;
  double pre_full_rank_mean() const;
};

struct RunOptions {
  /// Receives one line per transmitted frame: time_us,channel,src,TYPE,hex.
  std::ostream* packet_log = nullptr;
};

/// Validates the scenario, then runs it for scenario.duration_s with
/// scenario.seed. Deterministic for a given scenario.
RunResult run(const channel::Scenario& scenario, const RunOptions& options = {});

/// Scalar metrics aggregated by sweeps, in a fixed order.
std::vector<std::pair<std::string, double>> scalar_metrics(const RunResult& r);

struct SweepConfig {
  channel::Scenario base;
  std::string key;
  std::vector<std::string> values;
  /// Seeds base.seed, base.seed + 1, ... are run for every value.
  std::size_t seeds = 1;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  bool keep_packet_logs = false;
};

struct SweepRun {
  std::string value;
  std::uint64_t seed = 0;
  RunResult result;
  std::string packet_log;
};

struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  /// (metric name, mean, sample standard deviation)
  std::vector<std::tuple<std::string, double, double>> metrics;
  std::vector<AccuracyPoint> accuracy;
};

struct SweepResult {
  std::string key;
  /// Ordered by value, then seed, independent of thread scheduling.
  std::vector<SweepRun> runs;
  std::vector<SweepRow> rows;
};

/// Throws ConfigError for an unknown key, an empty value list or a value
/// that does not produce a valid scenario; no run starts in that case.
SweepResult sweep(const SweepConfig& config);

}  // namespace bpnc::engine
