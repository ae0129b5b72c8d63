// Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
// the number of failures. Tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "bpnc/channel/phy.hpp"
#include "bpnc/channel/scenario.hpp"
#include "bpnc/common/rng.hpp"
#include "bpnc/engine/engine.hpp"
#include "bpnc/gf/matrix.hpp"
#include "bpnc/protocol/control.hpp"
#include "bpnc/rlnc/decoder.hpp"
#include "bpnc/rlnc/encoder.hpp"
#include "bpnc/rlnc/padding.hpp"
#include "bpnc/rlnc/precondition.hpp"
#include "bpnc/rlnc/rank_deficient.hpp"
#include "bpnc/rlnc/symbols.hpp"

using namespace bpnc;
using gf::FieldContext;
using gf::Symbol;
using gf::SymbolMatrix;

namespace {

// Criterion 1
constexpr double kBeforeLow = 0.90, kBeforeHigh = 0.97, kAfterMin = 0.99, kPreconditionSeconds = 60;
// Criterion 4
constexpr double kPreFullRankMin = 0.50, kLossyFrameLoss = 0.20;
// Criterion 6
constexpr double kStabilityLoad = 0.5;
constexpr double kT975Dof9 = 2.262;  // two-sided 95% t quantile, 9 degrees of freedom
// Criterion 8
constexpr double kPowerTolerance = 0.01;
constexpr int kPowerUpdates = 20;

constexpr std::size_t kSeeds = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int n, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %d: %s (%s)\n", n, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

engine::SweepResult seeds_of(const channel::Scenario& s, bool logs = false, unsigned threads = 0) {
  engine::SweepConfig c;
  c.base = s;
  c.key = "seed";
  c.values = {std::to_string(s.seed)};
  c.seeds = kSeeds;
  c.threads = threads;
  c.keep_packet_logs = logs;
  return engine::sweep(c);
}

void preconditioning() {
  const auto t0 = Clock::now();
  const FieldContext f(4);
  const auto rep = rlnc::run_precondition_experiment(f, rlnc::PreconditionConfig{});
  const double secs = seconds_since(t0);
  const std::size_t h = rep.before.size();
  bool ok = h == 4 && rep.before[h - 1] == 1.0 && rep.after[h - 1] == 1.0 && secs < kPreconditionSeconds;
  std::string detail;
  for (std::size_t k = 0; k < h; ++k) {
    if (k + 1 < h) ok = ok && rep.before[k] >= kBeforeLow && rep.before[k] <= kBeforeHigh && rep.after[k] >= kAfterMin;
    detail += "k=" + std::to_string(k + 1) + " before " + fmt("%.4f", rep.before[k]) + " after " +
              fmt("%.4f", rep.after[k]) + ", ";
  }
  report(1, ok, detail + fmt("%.1f s", secs));
}

void round_trip() {
  const FieldContext f(4);
  Rng rng(2024);
  constexpr std::size_t kPacketBytes = 32;
  std::size_t bad = 0, total = 0;
  for (std::size_t h : {2u, 4u, 6u, 8u}) {
    for (int g = 0; g < 1000; ++g) {
      // Random length so the padding lands anywhere in the block.
      const std::size_t len = rng.below(h * kPacketBytes);
      rlnc::Bytes data(len);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
      const auto groups = rlnc::pad_block(data, kPacketBytes, h);
      const std::size_t n = rlnc::symbol_count(kPacketBytes, f.bits());
      std::vector<rlnc::PacketGroup> out;
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        rlnc::Generation gen(static_cast<std::uint16_t>(gi), h, n);
        for (const auto& p : groups[gi]) gen.add_source(rlnc::to_symbols(p, f.bits()));
        const auto pkts = rlnc::encode_generation(f, gen, h, rng, rlnc::CoefficientMode::RankIncreasing);
        rlnc::Decoder dec(f, h, n, gen.id());
        for (const auto& p : pkts) dec.ingest(p);
        rlnc::PacketGroup got;
        for (std::size_t i = 0; i < h && dec.decoded(i); ++i)
          got.push_back(rlnc::from_symbols(*dec.delivered(i), f.bits(), kPacketBytes));
        out.push_back(std::move(got));
      }
      ++total;
      try {
        if (rlnc::unpad(out) != data) ++bad;
      } catch (const rlnc::PaddingError&) {
        ++bad;
      }
    }
  }
  report(2, bad == 0, std::to_string(total - bad) + "/" + std::to_string(total) + " generations byte-exact");
}

void earliest_decoding() {
  const FieldContext f(4);
  Rng rng(77);
  std::size_t ok = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t h = 2 + rng.below(7);
    rlnc::Generation gen(0, h, 8);
    std::vector<Symbol> row(8);
    for (std::size_t i = 0; i < h; ++i) {
      for (auto& s : row) s = static_cast<Symbol>(rng.below(f.size()));
      gen.add_source(row);
    }
    rlnc::TagSampler causal(f, h, rlnc::CoefficientMode::Causal);
    rlnc::Decoder dec(f, h, 8);
    bool good = true;
    for (std::size_t i = 1; i <= h; ++i) {
      dec.ingest(rlnc::encode_with(f, gen, causal.next(rng)));
      for (std::size_t j = 0; j < h; ++j) good = good && dec.decoded(j) == (j < i);
      for (std::size_t j = 0; j < i && good; ++j)
        good = *dec.delivered(j) == std::vector<Symbol>(gen.source(j).begin(), gen.source(j).end());
    }
    ok += good;
  }
  report(3, ok == 1000, std::to_string(ok) + "/1000 trials decode exactly the received prefix");
}

void early_recovery() {
  auto s = channel::builtin("butterfly7");
  s.radio.frame_loss = kLossyFrameLoss;
  s.coding.decoder = rlnc::DecodeMode::RankDeficient;
  const auto t0 = Clock::now();
  const auto r = seeds_of(s);
  std::vector<double> per_seed;
  for (const auto& run : r.runs) per_seed.push_back(run.result.pre_full_rank_mean());
  const double m = mean(per_seed);
  report(4, m >= kPreFullRankMin,
         "mean fraction correct before full rank " + fmt("%.3f", m) + ", " + fmt("%.0f s", seconds_since(t0)));
}

void block_sweep() {
  engine::SweepConfig c;
  c.base = channel::builtin("butterfly7");
  c.base.duration_s = 3600;
  c.key = "block_size";
  c.values = {"2", "4", "6", "8"};
  c.seeds = kSeeds;
  const auto r = engine::sweep(c);
  std::vector<double> tp;
  std::string detail;
  for (const auto& row : r.rows) {
    const auto& [name, m, sd] = row.metrics[0];
    tp.push_back(m);
    detail += "h=" + row.value + " " + fmt("%.3f", m) + "+-" + fmt("%.3f", sd) + ", ";
  }
  const std::size_t best = std::max_element(tp.begin(), tp.end()) - tp.begin();
  const bool interior = best != 0 && best != tp.size() - 1;
  report(5, interior, detail + "maximizer h=" + c.values[best]);
}

// Long-run throughput of a saturated source on line7.
double line7_bottleneck() {
  auto sat = channel::builtin("line7");
  sat.duration_s = 3600;
  sat.flows[0].saturated = true;
  engine::SweepConfig c;
  c.base = sat;
  c.key = "seed";
  c.values = {std::to_string(sat.seed)};
  c.seeds = 5;
  double sum = 0;
  for (const auto& run : engine::sweep(c).runs) sum += run.result.throughput_pps();
  return sum / 5;
}

// Per-node OLS backlog slope over the final half of each run; passes when
// the across-seed 95% interval reaches down to zero for every node.
bool backlog_trend(double rate, double duration, std::string& detail) {
  auto s = channel::builtin("line7");
  s.duration_s = duration;
  s.flows[0].arrival_rate = rate;
  std::map<NodeId, std::vector<double>> slopes;
  for (const auto& run : seeds_of(s).runs) {
    std::map<NodeId, std::pair<std::vector<double>, std::vector<double>>> series;
    for (const auto& smp : run.result.samples) {
      if (smp.time_s < duration / 2) continue;
      series[smp.node].first.push_back(smp.time_s);
      series[smp.node].second.push_back(static_cast<double>(smp.backlog));
    }
    for (const auto& [node, xy] : series) slopes[node].push_back(ols_slope(xy.first, xy.second));
  }
  bool ok = true;
  for (const auto& [node, v] : slopes) {
    const double m = mean(v);
    const double half = kT975Dof9 * sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
    ok = ok && m - half <= 0;
    detail += "; node " + std::to_string(node) + " [" + fmt("%.3f", m - half) + ", " + fmt("%.3f", m + half) + "]";
  }
  return ok;
}

void stability() {
  const double capacity = line7_bottleneck();
  const double rate = kStabilityLoad * capacity;
  std::string detail = "bottleneck " + fmt("%.2f", capacity) + " pkt/s, load " + fmt("%.2f", rate) + ", slope CIs";
  report(6, backlog_trend(rate, 600, detail), detail);
  std::string longer;
  const bool ok = backlog_trend(rate, 3600, longer);
  std::printf("info: same load over 3600 s runs: %s%s\n", ok ? "no positive trend" : "positive trend", longer.c_str());
}

void topology() {
  int line_ok = 0, ring_ok = 0;
  for (const auto& run : seeds_of(channel::builtin("line7")).runs) {
    std::map<NodeId, std::vector<double>> backlog;
    for (const auto& smp : run.result.samples)
      if (smp.node >= 2 && smp.node <= 6) backlog[smp.node].push_back(static_cast<double>(smp.backlog));
    NodeId top = 0;
    double best = -1;
    for (const auto& [node, v] : backlog) {
      const double m = median(v);
      if (m > best) best = m, top = node;
    }
    line_ok += top == 2;
  }
  for (const auto& run : seeds_of(channel::builtin("ring7")).runs) {
    const auto& sink = run.result.nodes.back().data_from;
    const auto from = [&](NodeId n) {
      const auto it = sink.find(n);
      return it == sink.end() ? 0 : it->second;
    };
    ring_ok += from(5) > 0 && from(6) > 0;
  }
  const int need = static_cast<int>(kSeeds / 2) + 1;
  report(7, line_ok >= need && ring_ok >= need,
         "line7 node 2 highest median relay backlog in " + std::to_string(line_ok) + "/10 seeds, ring7 both routes used in " +
             std::to_string(ring_ok) + "/10 seeds");
}

void power_control() {
  const auto s = channel::builtin("line7");
  const double min_mw = channel::dbm_to_mw(s.radio.power_min_dbm), max_mw = channel::dbm_to_mw(s.radio.power_max_dbm);
  const double noise = channel::dbm_to_mw(s.topology.noise_dbm);
  const double target = channel::db_to_linear(s.radio.target_snr_db);
  int ok = 0, worst = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    // Static gain such that the target is reachable inside the clamp range.
    const double needed = min_mw + (max_mw - min_mw) * rng.uniform();
    const double gain = target * noise / needed;
    double p = min_mw + (max_mw - min_mw) * rng.uniform();
    int updates = 0;
    while (std::abs(p * gain / noise - target) > kPowerTolerance * target && updates < kPowerUpdates) {
      p = protocol::update_power(p, target, p * gain / noise, min_mw, max_mw);
      ++updates;
    }
    worst = std::max(worst, updates);
    ok += std::abs(p * gain / noise - target) <= kPowerTolerance * target;
  }
  report(8, ok == 100, std::to_string(ok) + "/100 seeds within 1% of target, at most " + std::to_string(worst) +
                           " updates");
}

std::string packet_log(const channel::Scenario& s) {
  std::ostringstream out;
  engine::RunOptions opt;
  opt.packet_log = &out;
  engine::run(s, opt);
  return out.str();
}

void determinism() {
  bool ok = true;
  std::size_t bytes = 0;
  for (const char* name : {"line7", "ring7", "grid6", "butterfly7"}) {
    auto s = channel::builtin(name);
    s.duration_s = 300;
    const auto a = packet_log(s);
    bytes += a.size();
    ok = ok && !a.empty() && a == packet_log(s);
  }
  auto s = channel::builtin("butterfly7");
  s.duration_s = 300;
  engine::SweepConfig c;
  c.base = s;
  c.key = "block_size";
  c.values = {"2", "4", "8"};
  c.seeds = 2;
  c.keep_packet_logs = true;
  c.threads = 1;
  const auto serial = engine::sweep(c);
  c.threads = 4;
  const auto parallel = engine::sweep(c);
  ok = ok && serial.runs.size() == parallel.runs.size();
  for (std::size_t i = 0; ok && i < serial.runs.size(); ++i)
    ok = serial.runs[i].packet_log == parallel.runs[i].packet_log && !serial.runs[i].packet_log.empty();
  report(9, ok, "repeat runs on 4 builtins (" + std::to_string(bytes) + " log bytes) and serial vs 4-thread sweep of " +
                    std::to_string(serial.runs.size()) + " runs");
}

oracle::Rows to_rows(const SymbolMatrix& m) {
  oracle::Rows rows(m.rows(), std::vector<unsigned>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) rows[r][c] = m.at(r, c);
  return rows;
}

void properties() {
  std::size_t violations = 0, checks = 0;
  const FieldContext f(4);
  for (unsigned a = 0; a < 16; ++a) {
    const auto sa = static_cast<Symbol>(a);
    ++checks;
    if (FieldContext::add(sa, sa) != 0 || f.mul(sa, 1) != sa || f.mul(sa, 0) != 0) ++violations;
    if (a != 0 && f.mul(sa, f.inv(sa)) != 1) ++violations;
    for (unsigned b = 0; b < 16; ++b) {
      const auto sb = static_cast<Symbol>(b);
      ++checks;
      if (f.mul(sa, sb) != oracle::clmul_mod(a, b, f.polynomial(), 4)) ++violations;
      if (f.mul(sa, sb) != f.mul(sb, sa)) ++violations;
      if (FieldContext::add(sa, sb) != FieldContext::add(sb, sa)) ++violations;
      if (b != 0 && f.mul(f.div(sa, sb), sb) != sa) ++violations;
      for (unsigned c = 0; c < 16; ++c) {
        const auto sc = static_cast<Symbol>(c);
        ++checks;
        if (f.mul(sa, FieldContext::add(sb, sc)) != FieldContext::add(f.mul(sa, sb), f.mul(sa, sc))) ++violations;
        if (f.mul(f.mul(sa, sb), sc) != f.mul(sa, f.mul(sb, sc))) ++violations;
        if (FieldContext::add(FieldContext::add(sa, sb), sc) != FieldContext::add(sa, FieldContext::add(sb, sc)))
          ++violations;
      }
    }
  }

  std::size_t mismatches = 0, matrices = 0;
  const FieldContext f2(1);
  for (std::size_t n : {2u, 3u}) {
    for (unsigned bits = 0; bits < (1u << (n * n)); ++bits) {
      SymbolMatrix m(n, n);
      for (std::size_t i = 0; i < n * n; ++i) m.at(i / n, i % n) = static_cast<Symbol>((bits >> i) & 1u);
      ++matrices;
      if (gf::rank(f2, m) != oracle::span_rank(to_rows(m), f2.polynomial(), 1)) ++mismatches;
    }
  }
  Rng rng(10);
  for (int t = 0; t < 1000; ++t) {
    SymbolMatrix m(4, 4);
    // Bias towards singular matrices so low ranks are exercised too.
    const unsigned zero_odds = static_cast<unsigned>(rng.below(3));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        m.at(r, c) = rng.below(4) < zero_odds ? 0 : static_cast<Symbol>(rng.below(16));
    ++matrices;
    if (gf::rank(f, m) != oracle::span_rank(to_rows(m), f.polynomial(), 4)) ++mismatches;
  }
  report(10, violations == 0 && mismatches == 0,
         std::to_string(violations) + " law violations over " + std::to_string(checks) + " GF(16) tuples, " +
             std::to_string(mismatches) + " rank mismatches over " + std::to_string(matrices) + " matrices");
}

// Decode cost on a fixed rank-deficient benchmark for each field width.
void field_cost() {
  std::string detail;
  std::uint64_t last = 0;
  bool grows = true;
  for (int m : {1, 2, 4, 8}) {
    const FieldContext f(m);
    Rng rng(5);
    rlnc::Generation gen(0, 4, 16);
    std::vector<Symbol> row(16);
    for (int i = 0; i < 4; ++i) {
      for (auto& s : row) s = static_cast<Symbol>(rng.below(f.size()));
      gen.add_source(row);
    }
    rlnc::Decoder dec(f, 4, 16, 0, rlnc::DecodeMode::RankDeficient);
    rlnc::TagSampler sampler(f, 4, rlnc::CoefficientMode::RankIncreasing);
    for (int i = 0; i < 2; ++i) dec.ingest(rlnc::encode_with(f, gen, sampler.next(rng)));
    const auto t0 = Clock::now();
    const auto res = rlnc::rank_deficient_solve(dec);
    const double us = seconds_since(t0) * 1e6;
    grows = grows && res.candidates_evaluated > last;
    last = res.candidates_evaluated;
    detail += "GF(2^" + std::to_string(m) + ") " + std::to_string(res.candidates_evaluated) + " candidates " +
              fmt("%.0f us", us) + "; ";
  }
  std::printf("info: rank-deficient decode cost %s%s\n", detail.c_str(), grows ? "grows with field size" : "NOT monotone");
}

}  // namespace

int main(int argc, char** argv) {
  // Optional list of criterion numbers to run; all by default.
  std::map<int, std::function<void()>> by_number = {
      {1, preconditioning}, {2, round_trip},    {3, earliest_decoding}, {4, early_recovery}, {5, block_sweep},
      {6, stability},       {7, topology},      {8, power_control},     {9, determinism},    {10, properties}};
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
  if (chosen.empty())
    for (const auto& [n, fn] : by_number) chosen.push_back(n);
  const auto t0 = Clock::now();
  for (int n : chosen) {
    const auto it = by_number.find(n);
    if (it == by_number.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", n);
      return 2;
    }
    it->second();
  }
  field_cost();
  std::printf("%d failed, %.0f s\n", failures, seconds_since(t0));
  return failures;
}
