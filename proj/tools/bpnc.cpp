#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bpnc/channel/scenario.hpp"
#include "bpnc/engine/output.hpp"
#include "bpnc/rlnc/precondition.hpp"

namespace fs = std::filesystem;
using namespace bpnc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return "--" + f;
}

fs::path default_out(const std::string& leaf) {
  if (const char* env = std::getenv("BPNC_OUT"); env && *env) return fs::path(env) / leaf;
  return fs::path("out") / leaf;
}

/// Scenario source plus per-field overrides shared by run and sweep.
struct ScenarioArgs {
  std::string scenario_path;
  std::string builtin_name;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& app) {
    auto* path = app.add_option("--scenario", scenario_path, "Scenario file (JSON)");
    auto* name = app.add_option("--builtin", builtin_name, "Builtin scenario: line7, ring7, grid6, butterfly7");
    path->excludes(name);
    for (const auto& k : channel::override_keys()) {
      app.add_option_function<std::string>(
          flag_name(k.name), [this, key = k.name](const std::string& v) { overrides[key] = v; }, k.help);
    }
  }

  channel::Scenario resolve() const {
    channel::Scenario s;
    if (!scenario_path.empty()) {
      s = channel::load_scenario(scenario_path);
    } else if (!builtin_name.empty()) {
      s = channel::builtin(builtin_name);
    } else {
      throw ConfigError("scenario", "give --scenario or --builtin");
    }
    // Apply in the documented key order so results do not depend on flag order.
    for (const auto& k : channel::override_keys()) {
      const auto it = overrides.find(k.name);
      if (it != overrides.end()) channel::apply_override(s, k.name, it->second);
    }
    s.validate();
    return s;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

engine::SweepConfig parse_param(const std::string& param) {
  const auto eq = param.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("param", "expected key=v1,v2,...");
  engine::SweepConfig c;
  c.key = param.substr(0, eq);
  c.values = split(param.substr(eq + 1), ',');
  if (c.values.empty()) throw ConfigError("param", "empty value list");
  return c;
}

void print_sweep(const engine::SweepResult& r) {
  for (const auto& row : r.rows) {
    std::cout << r.key << '=' << row.value << " runs=" << row.runs;
    for (const auto& [name, mean, sd] : row.metrics) {
      if (name == "throughput_pps" || name == "mean_backlog" || name == "pre_full_rank_fraction")
        std::cout << ' ' << name << '=' << mean << "+-" << sd;
    }
    std::cout << '\n';
  }
}

void write_precondition(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  rlnc::PreconditionConfig cfg;
  cfg.seed = seed;
  const gf::FieldContext field(4);
  const auto rep = rlnc::run_precondition_experiment(field, cfg);
  std::ofstream out(dir / "table3.csv");
  out << engine::kMetricsHeader << '\n' << "packets_received,equivalent_before,equivalent_after\n";
  for (std::size_t k = 0; k < rep.before.size(); ++k)
    out << k + 1 << ',' << rep.before[k] << ',' << rep.after[k] << '\n';
  std::cout << "table3: " << cfg.blocks << " blocks written to " << (dir / "table3.csv").string() << '\n';
}

int paper_suite(const fs::path& out, std::size_t seeds, std::optional<double> duration, unsigned threads) {
  write_precondition(out / "table3", 1);

  auto base_of = [&](const std::string& name) {
    auto s = channel::builtin(name);
    if (duration) s.duration_s = *duration;
    return s;
  };

  // Backlog, energy and overhead on the three unicast topologies.
  for (const std::string name : {"line7", "ring7", "grid6"}) {
    engine::SweepConfig c;
    c.base = base_of(name);
    c.key = "seed";
    c.values = {std::to_string(c.base.seed)};
    c.seeds = seeds;
    c.threads = threads;
    const auto r = engine::sweep(c);
    const fs::path dir = out / ("topology_" + name);
    engine::write_sweep_outputs(r, dir);
    for (const auto& run : r.runs) {
      const fs::path sub = dir / ("seed_" + std::to_string(run.seed));
      fs::create_directories(sub);
      std::ofstream m(sub / "metrics.csv");
      m.precision(10);
      engine::write_metrics_csv(m, run.result);
      std::ofstream(sub / "summary.json") << engine::summary_json(run.result).dump(2) << '\n';
    }
    std::cout << name << ": " << r.runs.size() << " runs\n";
  }

  // Block size on the butterfly.
  {
    engine::SweepConfig c;
    c.base = base_of("butterfly7");
    // Long runs: the differences between block sizes are small per seed.
    if (!duration) c.base.duration_s = 3600;
    c.key = "block_size";
    c.values = {"2", "4", "6", "8"};
    c.seeds = seeds;
    c.threads = threads;
    const auto r = engine::sweep(c);
    engine::write_sweep_outputs(r, out / "butterfly_block_size");
    print_sweep(r);
  }

  // Full-rank versus rank-deficient decoding with lossy links.
  {
    engine::SweepConfig c;
    c.base = base_of("butterfly7");
    c.base.radio.frame_loss = 0.2;
    c.key = "decoder";
    c.values = {"full", "rankdef"};
    c.seeds = seeds;
    c.threads = threads;
    const auto r = engine::sweep(c);
    engine::write_sweep_outputs(r, out / "butterfly_decoder");
    print_sweep(r);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-layer cognitive radio network simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one experiment and write metrics.csv, summary.json, packets.log");
  ScenarioArgs run_args;
  run_args.attach(*run);
  std::string run_out;
  run->add_option("--out", run_out, "Output directory (default $BPNC_OUT/run or out/run)");

  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep over several seeds and write sweep.csv");
  ScenarioArgs sweep_args;
  sweep_args.attach(*sw);
  std::string param;
  std::size_t seeds = 1;
  unsigned threads = 0;
  std::string sweep_out;
  sw->add_option("--param", param, "Swept parameter as key=v1,v2,...")->required();
  sw->add_option("--seeds", seeds, "Seeds per value, starting at the scenario seed");
  sw->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sw->add_option("--out", sweep_out, "Output directory (default $BPNC_OUT/sweep or out/sweep)");

  auto* suite = app.add_subcommand("paper-suite", "Regenerate the full experiment set");
  std::string suite_out;
  std::size_t suite_seeds = 3;
  std::optional<double> suite_duration;
  unsigned suite_threads = 0;
  suite->add_option("--out", suite_out, "Output directory (default $BPNC_OUT/paper-suite or out/paper-suite)");
  suite->add_option("--seeds", suite_seeds, "Seeds per experiment point");
  suite->add_option("--duration", suite_duration, "Override the run length of every experiment (s)");
  suite->add_option("--threads", suite_threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      const auto s = run_args.resolve();
      const fs::path out = run_out.empty() ? default_out("run") : fs::path(run_out);
      const auto r = engine::run_to_directory(s, out);
      std::cout << s.name << " seed=" << s.seed << " delivered=" << r.delivered()
                << " throughput_pps=" << r.throughput_pps() << " -> " << out.string() << '\n';
    } else if (*sw) {
      auto c = parse_param(param);
      c.base = sweep_args.resolve();
      c.seeds = seeds;
      c.threads = threads;
      const fs::path out = sweep_out.empty() ? default_out("sweep") : fs::path(sweep_out);
      const auto r = engine::sweep(c);
      engine::write_sweep_outputs(r, out);
      print_sweep(r);
    } else if (*suite) {
      const fs::path out = suite_out.empty() ? default_out("paper-suite") : fs::path(suite_out);
      return paper_suite(out, suite_seeds, suite_duration, suite_threads);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
