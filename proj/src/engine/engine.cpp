#include "bpnc/engine/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>
#include <queue>
#include <sstream>
#include <thread>

#include "bpnc/channel/phy.hpp"
#include "bpnc/protocol/wire.hpp"
#include "bpnc/rlnc/symbols.hpp"

namespace bpnc::engine {

using protocol::FrameType;
using protocol::TimerKind;
using protocol::Bytes;

double RunResult::throughput_pps() const {
  double t = 0;
  for (const auto& f : flows) t += f.throughput_pps;
  return t;
}

std::uint64_t RunResult::delivered() const {
  std::uint64_t d = 0;
  for (const auto& f : flows) d += f.delivered;
  return d;
}

double RunResult::total_energy_mj() const {
  double e = 0;
  for (const auto& n : nodes) e += n.energy_mj;
  return e;
}

std::uint64_t RunResult::total_overhead() const {
  std::uint64_t o = 0;
  for (const auto& n : nodes) o += n.counters.overhead();
  return o;
}

double RunResult::mean_backlog() const {
  double b = 0;
  for (const auto& n : nodes) b += n.mean_backlog;
  return nodes.empty() ? 0.0 : b / static_cast<double>(nodes.size());
}

double RunResult::pre_full_rank_mean() const {
  if (pre_full_rank.empty()) return 0.0;
  return std::accumulate(pre_full_rank.begin(), pre_full_rank.end(), 0.0) / static_cast<double>(pre_full_rank.size());
}

namespace {

enum class EventKind : std::uint8_t { Timer, FrameEnd, AppArrival, Sample };

struct Event {
  SimTime at = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Timer;
  NodeId node = 0;
  TimerKind timer = TimerKind::PhaseEnd;
  std::uint64_t token = 0;
  std::size_t tx = 0;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const { return a.at != b.at ? a.at > b.at : a.seq > b.seq; }
};

struct Transmission {
  NodeId src = 0;
  ChannelIndex ch = 0;
  double power_mw = 0;
  SimTime start = 0;
  SimTime end = 0;
  FrameType type = FrameType::Dis;
  Bytes frame;
};

struct RadioState {
  ChannelIndex channel = 0;
  SimTime tuned_since = 0;
  double tx_energy_mj = 0;
  SimTime tx_time = 0;
};

class Simulation final : public protocol::NodeEnv {
 public:
  Simulation(const channel::Scenario& sc, const RunOptions& opt)
      : sc_(sc),
        opt_(opt),
        field_(sc.coding.field_bits),
        gains_(sc.topology, sc.seed),
        root_(sc.seed),
        channel_rng_(root_.fork(0xC4A)) {
    ctx_.scenario = &sc_;
    ctx_.field = &field_;
    ctx_.payload_symbols = rlnc::symbol_count(sc.coding.payload_bytes, sc.coding.field_bits);
    for (const auto& f : sc.flows) ctx_.flows.emplace_back(f.source, f.destinations);
    noise_mw_ = channel::dbm_to_mw(sc.topology.noise_dbm);
    listen_mw_ = sc.radio.listen_power_fraction * channel::dbm_to_mw(sc.radio.power_max_dbm);
    radios_.resize(sc.topology.nodes + 1);
    nodes_.resize(sc.topology.nodes + 1);
    for (std::size_t n = 1; n <= sc.topology.nodes; ++n) {
      const auto id = static_cast<NodeId>(n);
      nodes_[n] = std::make_unique<protocol::Node>(id, ctx_, root_.fork(0x100 + n), *this);
    }
    for (std::size_t f = 0; f < sc.flows.size(); ++f) app_rng_.push_back(root_.fork(0xA99 + f));
    delivered_by_node_.assign(sc.topology.nodes + 1, 0);
    decoded_.resize(sc.flows.size());
    backlog_sum_.assign(sc.topology.nodes + 1, 0.0);
  }

  RunResult run() {
    end_ = seconds(sc_.duration_s);
    for (std::size_t n = 1; n < nodes_.size(); ++n) nodes_[n]->start();
    for (std::size_t f = 0; f < sc_.flows.size(); ++f) {
      if (!sc_.flows[f].saturated && sc_.flows[f].arrival_rate > 0) schedule_arrival(f);
    }
    const SimTime step = seconds(sc_.timing.sample_interval_s);
    if (step > 0) push({step, 0, EventKind::Sample});

    while (!queue_.empty()) {
      const Event e = queue_.top();
      if (e.at > end_ || (e.at == end_ && e.kind != EventKind::Sample)) break;
      queue_.pop();
      now_ = e.at;
      ++result_.events;
      switch (e.kind) {
        case EventKind::Timer: nodes_[e.node]->on_timer(e.timer, e.token); break;
        case EventKind::FrameEnd: finish_frame(e.tx); break;
        case EventKind::AppArrival: app_arrival(e.tx); break;
        case EventKind::Sample:
          sample();
          if (now_ + step <= end_) push({now_ + step, 0, EventKind::Sample});
          break;
      }
    }
    now_ = std::max(now_, end_);
    return summarize();
  }

  // NodeEnv
  SimTime now() const override { return now_; }

  void tune(NodeId node, ChannelIndex ch) override {
    auto& r = radios_[node];
    if (r.channel != ch) {
      r.channel = ch;
      r.tuned_since = now_;
    }
  }

  SimTime transmit(NodeId node, ChannelIndex ch, double power_dbm, FrameType type, Bytes frame) override {
    Transmission t;
    t.src = node;
    t.ch = ch;
    t.power_mw = channel::dbm_to_mw(power_dbm);
    t.start = now_;
    t.end = now_ + sc_.radio.ofdm.airtime(frame.size());
    t.type = type;
    t.frame = std::move(frame);
    if (opt_.packet_log) {
      *opt_.packet_log << t.start << ',' << static_cast<int>(ch) << ',' << static_cast<int>(node) << ','
                       << protocol::to_string(type) << ',' << protocol::to_hex(t.frame) << '\n';
    }
    const double air_s = to_seconds(t.end - t.start);
    auto& r = radios_[node];
    r.tx_energy_mj += t.power_mw * air_s;
    r.tx_time += t.end - t.start;
    meter_tx_mj_ += (t.power_mw - listen_mw_) * air_s;
    ++result_.frames_sent;
    const SimTime end = t.end;
    txs_.push_back(std::move(t));
    push({end, 0, EventKind::FrameEnd, node, TimerKind::PhaseEnd, 0, txs_.size() - 1});
    return end;
  }

  void set_timer(NodeId node, SimTime at, TimerKind kind, std::uint64_t token) override {
    push({at, 0, EventKind::Timer, node, kind, token});
  }

  double sense_mw(NodeId node, ChannelIndex ch) override {
    double total = noise_mw_;
    for (std::size_t i = first_live_; i < txs_.size(); ++i) {
      const auto& t = txs_[i];
      if (t.ch != ch || t.src == node || t.start > now_ || t.end <= now_) continue;
      if (const auto g = gains_.gain_db(t.src, node, ch)) total += t.power_mw * channel::db_to_linear(*g);
    }
    return total;
  }

  const rlnc::Generation* truth(FlowIndex flow, std::uint16_t gen) const override {
    return nodes_[sc_.flows[flow].source]->source_generation(flow, gen);
  }

  void on_decoded(NodeId dst, FlowIndex flow, std::uint16_t gen, std::size_t index, bool correct) override {
    if (!correct) {
      ++result_.decode_errors;
      return;
    }
    ++delivered_by_node_[dst];
    auto& fd = decoded_[flow];
    ++fd.per_dest[dst];
    const auto& dsts = ctx_.flows[flow].destinations;
    const auto pos = std::find(dsts.begin(), dsts.end(), dst) - dsts.begin();
    auto& mask = fd.masks[{gen, index}];
    mask |= 1u << pos;
    if (mask == (1u << dsts.size()) - 1) {
      ++fd.delivered;
      fd.masks.erase({gen, index});
    }
  }

  void on_accuracy(NodeId, std::size_t received, double fraction) override {
    if (accuracy_.size() <= received) accuracy_.resize(received + 1);
    accuracy_[received].received = received;
    accuracy_[received].sum += fraction;
    ++accuracy_[received].count;
  }

  void on_pre_full_rank(NodeId, double fraction) override { result_.pre_full_rank.push_back(fraction); }

 private:
  struct FlowDecodes {
    std::map<NodeId, std::uint64_t> per_dest;
    std::map<std::pair<std::uint16_t, std::size_t>, std::uint32_t> masks;
    std::uint64_t delivered = 0;
  };

  void push(Event e) {
    e.seq = ++seq_;
    queue_.push(e);
  }

  void schedule_arrival(std::size_t flow) {
    const double dt = app_rng_[flow].exponential(sc_.flows[flow].arrival_rate);
    const SimTime at = now_ + std::max<SimTime>(1, seconds(dt));
    if (at < end_) push({at, 0, EventKind::AppArrival, sc_.flows[flow].source, TimerKind::PhaseEnd, 0, flow});
  }

  void app_arrival(std::size_t flow) {
    Bytes payload(sc_.coding.payload_bytes);
    for (auto& b : payload) b = static_cast<std::uint8_t>(32 + app_rng_[flow].below(95));
    nodes_[sc_.flows[flow].source]->on_app_packet(static_cast<FlowIndex>(flow), payload);
    schedule_arrival(flow);
  }

  bool transmitting_during(NodeId node, SimTime start, SimTime end) const {
    for (std::size_t i = first_live_; i < txs_.size(); ++i) {
      const auto& t = txs_[i];
      if (t.src == node && t.start < end && t.end > start) return true;
    }
    return false;
  }

  void finish_frame(std::size_t index) {
    const Transmission tx = txs_[index];
    const auto& radio = sc_.radio;
    const double sensitivity = channel::db_to_linear(radio.sensitivity_snr_db);

    struct Delivery {
      NodeId rx;
      double power_mw;
    };
    std::vector<Delivery> deliveries;
    for (std::size_t n = 1; n < nodes_.size(); ++n) {
      const auto rx = static_cast<NodeId>(n);
      if (rx == tx.src) continue;
      const auto g = gains_.gain_db(tx.src, rx, tx.ch);
      if (!g) continue;
      const auto& r = radios_[rx];
      if (r.channel != tx.ch || r.tuned_since > tx.start) continue;
      if (transmitting_during(rx, tx.start, tx.end)) continue;
      const double signal = tx.power_mw * channel::db_to_linear(*g);
      if (signal / noise_mw_ < sensitivity) continue;
      double interference = 0;
      for (std::size_t i = first_live_; i < txs_.size(); ++i) {
        const auto& o = txs_[i];
        if (i == index || o.ch != tx.ch || o.src == rx || o.start >= tx.end || o.end <= tx.start) continue;
        if (const auto og = gains_.gain_db(o.src, rx, tx.ch)) interference += o.power_mw * channel::db_to_linear(*og);
      }
      const double sinr = signal / (noise_mw_ + interference);
      double p = channel::frame_success(channel::ber_bpsk(sinr), tx.frame.size());
      if (tx.type == FrameType::Data) p *= 1.0 - radio.frame_loss;
      const bool ok = channel_rng_.uniform() < p;
      if (ok) {
        deliveries.push_back({rx, signal});
      } else if (tx.type == FrameType::Data && interference > 0 && nodes_[rx]->expects_data_from(tx.src)) {
        ++result_.collisions;
      }
    }
    for (const auto& d : deliveries) {
      ++result_.frames_received;
      nodes_[d.rx]->on_frame(tx.frame, tx.src, tx.ch, d.power_mw);
    }
    prune_transmissions();
  }

  // Frames that ended long ago can no longer overlap anything on the air.
  void prune_transmissions() {
    const SimTime horizon = now_ - seconds(1.0);
    while (first_live_ < txs_.size() && txs_[first_live_].end < horizon) {
      Bytes().swap(txs_[first_live_].frame);
      ++first_live_;
    }
  }

  double node_energy(NodeId n) const {
    const auto& r = radios_[n];
    return r.tx_energy_mj + listen_mw_ * to_seconds(now_ - r.tx_time);
  }

  void sample() {
    const double t = to_seconds(now_);
    ++samples_taken_;
    for (std::size_t n = 1; n < nodes_.size(); ++n) {
      const auto id = static_cast<NodeId>(n);
      const auto& node = *nodes_[n];
      Sample s;
      s.time_s = t;
      s.node = id;
      s.backlog = node.queues().total();
      s.energy_mj = node_energy(id);
      s.overhead = node.counters().overhead();
      s.delivered = delivered_by_node_[n];
      backlog_sum_[n] += static_cast<double>(s.backlog);
      result_.samples.push_back(s);
    }
  }

  RunResult summarize() {
    result_.scenario = sc_.name;
    result_.seed = sc_.seed;
    result_.duration_s = sc_.duration_s;
    const std::size_t count = nodes_.size() - 1;
    result_.energy_meter_mj = meter_tx_mj_ + listen_mw_ * sc_.duration_s * static_cast<double>(count);
    for (std::size_t f = 0; f < sc_.flows.size(); ++f) {
      FlowSummary s;
      s.index = static_cast<FlowIndex>(f);
      s.source = ctx_.flows[f].source;
      s.destinations = ctx_.flows[f].destinations;
      s.injected = nodes_[s.source]->injected(s.index);
      for (NodeId d : s.destinations) s.decoded[d] = decoded_[f].per_dest.count(d) ? decoded_[f].per_dest.at(d) : 0;
      s.delivered = decoded_[f].delivered;
      s.throughput_pps = sc_.duration_s > 0 ? static_cast<double>(s.delivered) / sc_.duration_s : 0.0;
      result_.flows.push_back(std::move(s));
    }
    for (std::size_t n = 1; n < nodes_.size(); ++n) {
      const auto& node = *nodes_[n];
      NodeSummary s;
      s.id = static_cast<NodeId>(n);
      s.counters = node.counters();
      s.energy_mj = node_energy(s.id);
      s.final_backlog = node.queues().total();
      s.mean_backlog = samples_taken_ ? backlog_sum_[n] / static_cast<double>(samples_taken_) : 0.0;
      s.data_power_dbm = node.data_power_dbm();
      s.data_from = node.data_from();
      s.data_to = node.data_to();
      result_.nodes.push_back(std::move(s));
    }
    for (const auto& a : accuracy_)
      if (a.count > 0) result_.accuracy.push_back(a);
    return std::move(result_);
  }

  const channel::Scenario& sc_;
  RunOptions opt_;
  gf::FieldContext field_;
  channel::GainTable gains_;
  Rng root_;
  Rng channel_rng_;
  std::vector<Rng> app_rng_;
  protocol::NodeContext ctx_;
  std::vector<std::unique_ptr<protocol::Node>> nodes_;
  std::vector<RadioState> radios_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  SimTime now_ = 0;
  SimTime end_ = 0;
  std::vector<Transmission> txs_;
  std::size_t first_live_ = 0;
  double noise_mw_ = 0;
  double listen_mw_ = 0;
  double meter_tx_mj_ = 0;
  std::vector<std::uint64_t> delivered_by_node_;
  std::vector<FlowDecodes> decoded_;
  std::vector<AccuracyPoint> accuracy_;
  std::vector<double> backlog_sum_;
  std::size_t samples_taken_ = 0;
  RunResult result_;
};

double stdev(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

RunResult run(const channel::Scenario& scenario, const RunOptions& options) {
  scenario.validate();
  Simulation sim(scenario, options);
  return sim.run();
}

std::vector<std::pair<std::string, double>> scalar_metrics(const RunResult& r) {
  return {
      {"throughput_pps", r.throughput_pps()},
      {"delivered", static_cast<double>(r.delivered())},
      {"mean_backlog", r.mean_backlog()},
      {"energy_mj", r.total_energy_mj()},
      {"overhead", static_cast<double>(r.total_overhead())},
      {"collisions", static_cast<double>(r.collisions)},
      {"decode_errors", static_cast<double>(r.decode_errors)},
      {"pre_full_rank_fraction", r.pre_full_rank_mean()},
  };
}

SweepResult sweep(const SweepConfig& config) {
  if (config.values.empty()) throw ConfigError("param", "empty value list");
  if (config.seeds == 0) throw ConfigError("seeds", "must be at least 1");

  struct Job {
    std::string value;
    channel::Scenario scenario;
  };
  std::vector<Job> jobs;
  for (const auto& v : config.values) {
    channel::Scenario s = config.base;
    channel::apply_override(s, config.key, v);
    s.validate();
    for (std::size_t k = 0; k < config.seeds; ++k) {
      Job j{v, s};
      j.scenario.seed = config.base.seed + k;
      jobs.push_back(std::move(j));
    }
  }

  SweepResult out;
  out.key = config.key;
  out.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      std::ostringstream log;
      RunOptions opt;
      if (config.keep_packet_logs) opt.packet_log = &log;
      auto& slot = out.runs[i];
      slot.value = jobs[i].value;
      slot.seed = jobs[i].scenario.seed;
      slot.result = run(jobs[i].scenario, opt);
      slot.packet_log = log.str();
    }
  };
  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& v : config.values) {
    SweepRow row;
    row.value = v;
    std::vector<std::vector<double>> columns;
    std::vector<std::string> names;
    for (const auto& r : out.runs) {
      if (r.value != v) continue;
      ++row.runs;
      const auto m = scalar_metrics(r.result);
      if (names.empty()) {
        for (const auto& [name, x] : m) names.push_back(name);
        columns.resize(m.size());
      }
      for (std::size_t i = 0; i < m.size(); ++i) columns[i].push_back(m[i].second);
      for (const auto& a : r.result.accuracy) {
        if (row.accuracy.size() <= a.received) row.accuracy.resize(a.received + 1);
        row.accuracy[a.received].received = a.received;
        row.accuracy[a.received].sum += a.sum;
        row.accuracy[a.received].count += a.count;
      }
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double mean =
          std::accumulate(columns[i].begin(), columns[i].end(), 0.0) / static_cast<double>(columns[i].size());
      row.metrics.emplace_back(names[i], mean, stdev(columns[i], mean));
    }
    std::erase_if(row.accuracy, [](const AccuracyPoint& a) { return a.count == 0; });
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace bpnc::engine
