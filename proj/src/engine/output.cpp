#include "bpnc/engine/output.hpp"

#include <fstream>
#include <stdexcept>

namespace bpnc::engine {

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f.precision(10);
  return f;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const RunResult& r) {
  out << kMetricsHeader << '\n' << "time_s,node,backlog,energy_mj,overhead,delivered\n";
  for (const auto& s : r.samples) {
    out << s.time_s << ',' << static_cast<int>(s.node) << ',' << s.backlog << ',' << s.energy_mj << ','
        << s.overhead << ',' << s.delivered << '\n';
  }
}

void write_accuracy_csv(std::ostream& out, std::span<const AccuracyPoint> curve) {
  out << kMetricsHeader << '\n' << "received,mean_fraction,count\n";
  for (const auto& a : curve) out << a.received << ',' << a.mean() << ',' << a.count << '\n';
}

nlohmann::json summary_json(const RunResult& r) {
  using nlohmann::json;
  json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["duration_s"] = r.duration_s;
  j["events"] = r.events;
  j["frames_sent"] = r.frames_sent;
  j["frames_received"] = r.frames_received;
  j["collisions"] = r.collisions;
  j["decode_errors"] = r.decode_errors;
  j["throughput_pps"] = r.throughput_pps();
  j["delivered"] = r.delivered();
  j["energy_mj"] = r.total_energy_mj();
  j["energy_meter_mj"] = r.energy_meter_mj;
  j["overhead"] = r.total_overhead();
  j["mean_backlog"] = r.mean_backlog();
  j["pre_full_rank_fraction"] = r.pre_full_rank_mean();
  j["pre_full_rank_generations"] = r.pre_full_rank.size();
  json flows = json::array();
  for (const auto& f : r.flows) {
    json decoded = json::object();
    for (const auto& [d, n] : f.decoded) decoded[std::to_string(d)] = n;
    flows.push_back({{"index", f.index},
                     {"source", f.source},
                     {"destinations", f.destinations},
                     {"injected", f.injected},
                     {"decoded", decoded},
                     {"delivered", f.delivered},
                     {"throughput_pps", f.throughput_pps}});
  }
  j["flows"] = flows;
  json nodes = json::array();
  for (const auto& n : r.nodes) {
    const auto& c = n.counters;
    json from = json::object();
    for (const auto& [k, v] : n.data_from) from[std::to_string(k)] = v;
    json to = json::object();
    for (const auto& [k, v] : n.data_to) to[std::to_string(k)] = v;
    nodes.push_back({{"id", n.id},
                     {"energy_mj", n.energy_mj},
                     {"overhead", c.overhead()},
                     {"final_backlog", n.final_backlog},
                     {"mean_backlog", n.mean_backlog},
                     {"data_power_dbm", n.data_power_dbm},
                     {"dis_sent", c.dis_sent},
                     {"syn_sent", c.syn_sent},
                     {"rts_sent", c.rts_sent},
                     {"cts_sent", c.cts_sent},
                     {"data_sent", c.data_sent},
                     {"data_received", c.data_received},
                     {"malformed", c.malformed},
                     {"backoffs", c.backoffs},
                     {"late_cts", c.late_cts},
                     {"data_rounds_tx", c.data_rounds_tx},
                     {"data_rounds_rx", c.data_rounds_rx},
                     {"data_from", from},
                     {"data_to", to}});
  }
  j["nodes"] = nodes;
  return j;
}

void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  out << kMetricsHeader << '\n' << "param,value,runs";
  if (!s.rows.empty()) {
    for (const auto& [name, mean, sd] : s.rows.front().metrics) out << ',' << name << "_mean," << name << "_stdev";
  }
  out << '\n';
  for (const auto& row : s.rows) {
    out << s.key << ',' << row.value << ',' << row.runs;
    for (const auto& [name, mean, sd] : row.metrics) out << ',' << mean << ',' << sd;
    out << '\n';
  }
}

void write_sweep_accuracy_csv(std::ostream& out, const SweepResult& s) {
  out << kMetricsHeader << '\n' << "param,value,received,mean_fraction,count\n";
  for (const auto& row : s.rows)
    for (const auto& a : row.accuracy)
      out << s.key << ',' << row.value << ',' << a.received << ',' << a.mean() << ',' << a.count << '\n';
}

RunResult run_to_directory(const channel::Scenario& scenario, const std::filesystem::path& dir) {
  scenario.validate();
  std::filesystem::create_directories(dir);
  auto log = open_out(dir / "packets.log");
  RunOptions opt;
  opt.packet_log = &log;
  RunResult r = run(scenario, opt);
  auto metrics = open_out(dir / "metrics.csv");
  write_metrics_csv(metrics, r);
  auto acc = open_out(dir / "accuracy.csv");
  write_accuracy_csv(acc, r.accuracy);
  open_out(dir / "summary.json") << summary_json(r).dump(2) << '\n';
  open_out(dir / "scenario.json") << channel::dump_scenario(scenario) << '\n';
  return r;
}

void write_sweep_outputs(const SweepResult& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto table = open_out(dir / "sweep.csv");
  write_sweep_csv(table, s);
  auto acc = open_out(dir / "sweep_accuracy.csv");
  write_sweep_accuracy_csv(acc, s);
  auto runs = open_out(dir / "sweep_runs.csv");
  runs << kMetricsHeader << '\n' << "param,value,seed";
  if (!s.runs.empty())
    for (const auto& [name, x] : scalar_metrics(s.runs.front().result)) runs << ',' << name;
  runs << '\n';
  for (const auto& r : s.runs) {
    runs << s.key << ',' << r.value << ',' << r.seed;
    for (const auto& [name, x] : scalar_metrics(r.result)) runs << ',' << x;
    runs << '\n';
  }
}

}  // namespace bpnc::engine
