#pragma once

#include <filesystem>
#include <ostream>
#include <span>

#include "bpnc/engine/engine.hpp"
#include "json.hpp"

namespace bpnc::engine {

/// First line of every CSV the simulator writes.
inline constexpr const char* kMetricsHeader = "# bpnc-metrics v1";

void write_metrics_csv(std::ostream& out, const RunResult& r);
void write_accuracy_csv(std::ostream& out, std::span<const AccuracyPoint> curve);
nlohmann::json summary_json(const RunResult& r);

void write_sweep_csv(std::ostream& out, const SweepResult& s);
/// One block of accuracy points per swept value.
void write_sweep_accuracy_csv(std::ostream& out, const SweepResult& s);

/// Runs the scenario and writes metrics.csv, summary.json, packets.log,
/// accuracy.csv and scenario.json into `dir` (created if missing).
RunResult run_to_directory(const channel::Scenario& scenario, const std::filesystem::path& dir);

/// Writes sweep.csv, sweep_accuracy.csv and sweep_runs.csv into `dir`.
void write_sweep_outputs(const SweepResult& s, const std::filesystem::path& dir);

}  // namespace bpnc::engine
