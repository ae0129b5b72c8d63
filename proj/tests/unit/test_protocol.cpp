#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <vector>

#include "bpnc/channel/phy.hpp"
#include "bpnc/channel/scenario.hpp"
#include "bpnc/common/rng.hpp"
#include "bpnc/gf/field.hpp"
#include "bpnc/protocol/control.hpp"
#include "bpnc/protocol/node.hpp"
#include "bpnc/protocol/wire.hpp"
#include "bpnc/rlnc/symbols.hpp"

using namespace bpnc;
using namespace bpnc::protocol;

namespace {

template <class Decode>
void check_truncations(const Bytes& frame, Decode decode) {
  for (std::size_t n = 0; n < frame.size(); ++n) {
    const Bytes cut(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode(cut), MalformedFrame);
  }
  Bytes longer = frame;
  longer.push_back(0);
  CHECK_THROWS_AS(decode(longer), MalformedFrame);
}

/// A small world for driving real nodes: frames reach every linked node
/// tuned to the sender's channel when the frame ends, with no loss.
class World final : public NodeEnv {
 public:
  struct Sent {
    SimTime at;
    NodeId src;
    ChannelIndex ch;
    double power_dbm;
    FrameType type;
    Bytes frame;
  };

  explicit World(channel::Scenario sc) : sc_(std::move(sc)), field_(sc_.coding.field_bits), root_(sc_.seed) {
    sc_.validate();
    ctx_.scenario = &sc_;
    ctx_.field = &field_;
    ctx_.payload_symbols = rlnc::symbol_count(sc_.coding.payload_bytes, sc_.coding.field_bits);
    for (const auto& f : sc_.flows) ctx_.flows.emplace_back(f.source, f.destinations);
    for (const auto& l : sc_.topology.links) {
      gain_db_[{l.a, l.b}] = l.gain_db;
      if (sc_.topology.symmetric && !gain_db_.count({l.b, l.a})) gain_db_[{l.b, l.a}] = l.gain_db;
    }
    for (std::size_t n = 1; n <= sc_.topology.nodes; ++n) {
      const auto id = static_cast<NodeId>(n);
      nodes_[id] = std::make_unique<Node>(id, ctx_, root_.fork(0x100 + n), *this);
    }
  }

  Node& node(NodeId n) { return *nodes_.at(n); }
  const channel::Scenario& scenario() const { return sc_; }
  const std::vector<Sent>& sent() const { return sent_; }
  std::uint64_t decoded(NodeId n) const {
    const auto it = decoded_.find(n);
    return it == decoded_.end() ? 0 : it->second;
  }

  void start() {
    for (auto& [id, n] : nodes_) n->start();
  }

  void run_until(SimTime t) {
    while (!events_.empty() && events_.top().at <= t) {
      const Event e = events_.top();
      events_.pop();
      now_ = e.at;
      if (e.timer) {
        nodes_.at(e.node)->on_timer(e.kind, e.token);
      } else {
        deliver(e.node, e.ch, e.power_dbm, e.frame);
      }
    }
    now_ = std::max(now_, t);
  }

  /// Runs until `pred` holds or `limit` passes; returns whether it held.
  template <class Pred>
  bool run_while_not(Pred pred, SimTime limit) {
    while (!pred()) {
      if (events_.empty() || events_.top().at > limit) return false;
      run_until(events_.top().at);
    }
    return true;
  }

  /// Hands a frame straight to one node, as if heard from `src`.
  void inject(NodeId to, const Bytes& frame, NodeId src, double rx_dbm) {
    auto& n = node(to);
    n.on_frame(frame, src, n.channel(), channel::dbm_to_mw(rx_dbm));
  }

  SimTime now() const override { return now_; }
  void tune(NodeId node, ChannelIndex ch) override { tuned_[node] = ch; }
  SimTime transmit(NodeId node, ChannelIndex ch, double power_dbm, FrameType type, Bytes frame) override {
    const SimTime end = now_ + sc_.radio.ofdm.airtime(frame.size());
    sent_.push_back({now_, node, ch, power_dbm, type, frame});
    push({end, seq_++, false, node, TimerKind::PhaseEnd, 0, ch, power_dbm, std::move(frame)});
    return end;
  }
  void set_timer(NodeId node, SimTime at, TimerKind kind, std::uint64_t token) override {
    push({at, seq_++, true, node, kind, token, 0, 0, {}});
  }
  double sense_mw(NodeId, ChannelIndex) override { return channel::dbm_to_mw(sc_.topology.noise_dbm); }
  const rlnc::Generation* truth(FlowIndex flow, std::uint16_t gen) const override {
    return nodes_.at(sc_.flows.at(flow).source)->source_generation(flow, gen);
  }
  void on_decoded(NodeId dst, FlowIndex, std::uint16_t, std::size_t, bool correct) override {
    ++decoded_[dst];
    if (!correct) ++wrong_;
  }
  void on_accuracy(NodeId, std::size_t, double) override {}
  void on_pre_full_rank(NodeId, double) override {}

  std::uint64_t wrong() const { return wrong_; }

 private:
  struct Event {
    SimTime at;
    std::uint64_t seq;
    bool timer;
    NodeId node;
    TimerKind kind;
    std::uint64_t token;
    ChannelIndex ch;
    double power_dbm;
    Bytes frame;
    bool operator>(const Event& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  void push(Event e) { events_.push(std::move(e)); }

  void deliver(NodeId src, ChannelIndex ch, double power_dbm, const Bytes& frame) {
    for (auto& [id, n] : nodes_) {
      if (id == src || tuned_[id] != ch) continue;
      const auto g = gain_db_.find({src, id});
      if (g == gain_db_.end()) continue;
      n->on_frame(frame, src, ch, channel::dbm_to_mw(power_dbm + g->second));
    }
  }

  channel::Scenario sc_;
  gf::FieldContext field_;
  Rng root_;
  NodeContext ctx_;
  std::map<NodeId, std::unique_ptr<Node>> nodes_;
  std::map<std::pair<NodeId, NodeId>, double> gain_db_;
  std::map<NodeId, ChannelIndex> tuned_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::vector<Sent> sent_;
  std::map<NodeId, std::uint64_t> decoded_;
  std::uint64_t wrong_ = 0;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
};

/// Two or more nodes in a chain with strong links and one saturated flow
/// from the first to the last.
channel::Scenario chain(std::size_t nodes, bool coded = true) {
  auto s = channel::builtin("line7");
  s.topology.nodes = nodes;
  s.topology.links.clear();
  for (std::size_t i = 1; i < nodes; ++i)
    s.topology.links.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i + 1), -1, -40.0});
  s.flows = {{1, {static_cast<NodeId>(nodes)}, 0.0, true, coded}};
  return s;
}

std::size_t count_sent(const World& w, NodeId src, FrameType t) {
  return static_cast<std::size_t>(
      std::count_if(w.sent().begin(), w.sent().end(), [&](const auto& s) { return s.src == src && s.type == t; }));
}

double duration_s(const std::vector<PhaseChange>& log, std::size_t i, SimTime end) {
  const SimTime until = i + 1 < log.size() ? log[i + 1].at : end;
  return to_seconds(until - log[i].at);
}

}  // namespace

TEST_CASE("DIS round trip keeps signed link quality") {
  const DisFrame f{3, 2, {{1, 0, 12.5}, {7, 2, -3.25}, {9, 1, 0.0}}};
  const Bytes b = encode(f);
  CHECK(b.size() == 4 + 3 * 4);
  CHECK(b[0] == 0x01);
  CHECK(b[3] == 3);
  CHECK(decode_dis(b) == f);
  check_truncations(b, [](const Bytes& x) { return decode_dis(x); });
}

TEST_CASE("SYN round trip and layout") {
  const SynFrame f{4, {{1, {6}, 300}, {1, {7}, 12}, {2, {6, 7}, 0}, {5, {3}, 65535}}};
  const Bytes b = encode(f);
  CHECK(b[0] == 0x02);
  CHECK(b[1] == 4);
  CHECK(b[2] == 4);
  // First entry: src 1, one destination 6, backlog 300 little-endian.
  CHECK(b[3] == 1);
  CHECK(b[4] == 1);
  CHECK(b[5] == 6);
  CHECK(b[6] == (300 & 0xFF));
  CHECK(b[7] == (300 >> 8));
  CHECK(decode_syn(b) == f);
  check_truncations(b, [](const Bytes& x) { return decode_syn(x); });

  const SynFrame empty{9, {}};
  CHECK(encode(empty) == Bytes{0x02, 9, 0});
  CHECK(decode_syn(encode(empty)) == empty);
}

TEST_CASE("RTS and CTS round trips") {
  const RtsFrame r{3, 5, 1, 2, quantize_utility(6.5)};
  const Bytes rb = encode(r);
  CHECK(rb == Bytes{0x03, 3, 5, 1, 2, 0x00, 0x80, 0x06, 0x00});
  CHECK(decode_rts(rb) == r);
  CHECK(decode_rts(rb).utility() == 6.5);
  check_truncations(rb, [](const Bytes& x) { return decode_rts(x); });

  const CtsFrame c{5, 3, 1};
  CHECK(encode(c) == Bytes{0x04, 5, 3, 1});
  CHECK(decode_cts(encode(c)) == c);
  check_truncations(encode(c), [](const Bytes& x) { return decode_cts(x); });
}

TEST_CASE("utility quantization") {
  CHECK(quantize_utility(0) == 0);
  CHECK(quantize_utility(-3) == 0);
  CHECK(quantize_utility(1) == 65536);
  CHECK(quantize_utility(1e12) == 0xFFFFFFFFu);
  CHECK(quantize_utility(std::nan("")) == 0);
}

TEST_CASE("DATA round trip over several fields and block sizes") {
  Rng rng(11);
  for (int m : {1, 2, 4, 8}) {
    for (std::size_t h : {1u, 2u, 3u, 4u, 8u}) {
      const std::size_t n = rlnc::symbol_count(480, m);
      rlnc::CodedPacket p;
      p.flow = 2;
      p.gen_id = 0xBEEF;
      const unsigned q = 1u << m;
      for (std::size_t i = 0; i < h; ++i) p.tag.push_back(static_cast<rlnc::Symbol>(rng.below(q)));
      for (std::size_t i = 0; i < n; ++i) p.payload.push_back(static_cast<rlnc::Symbol>(rng.below(q)));
      // Reversed columns; for h = 1 that is the identity, which decodes empty.
      if (h > 1)
        for (std::size_t i = 0; i < h; ++i) p.perm.push_back(static_cast<std::uint8_t>(h - 1 - i));
      const Bytes b = encode_data(p, m);
      CHECK(b[0] == 0x05);
      CHECK(b[1] == 2);
      CHECK(b[2] == 0xEF);
      CHECK(b[3] == 0xBE);
      CHECK(b[4] == h);
      CHECK(b.size() == 5 + h + rlnc::packed_size(h, m) + rlnc::packed_size(n, m));
      CHECK(decode_data(b, m, n) == p);
    }
  }
}

TEST_CASE("malformed frames are rejected") {
  CHECK_THROWS_AS(frame_type(Bytes{}), MalformedFrame);
  CHECK_THROWS_AS(frame_type(Bytes{0x00}), MalformedFrame);
  CHECK_THROWS_AS(frame_type(Bytes{0x06}), MalformedFrame);
  CHECK_THROWS_AS(decode_rts(encode(CtsFrame{1, 2, 0})), MalformedFrame);
  // Permutation with a repeated column.
  rlnc::CodedPacket p;
  p.tag = {1, 2};
  p.payload.assign(rlnc::symbol_count(480, 4), 3);
  Bytes b = encode_data(p, 4);
  b[5] = 1;
  b[6] = 1;
  CHECK_THROWS_AS(decode_data(b, 4, p.payload.size()), MalformedFrame);
  b[4] = 0;
  CHECK_THROWS_AS(decode_data(b, 4, p.payload.size()), MalformedFrame);
}

TEST_CASE("conflict resolution rules") {
  auto input = [](NodeId self, std::vector<RtsFrame> heard) {
    ResolverInput in;
    in.self = self;
    in.channel = 1;
    in.heard = std::move(heard);
    in.hears = [](NodeId, NodeId) { return true; };
    return in;
  };
  const auto u = [](double x) { return quantize_utility(x); };

  SUBCASE("same receiver: higher utility gets the CTS") {
    const auto r = resolve_conflicts(input(5, {{1, 5, 1, 0, u(4)}, {2, 5, 1, 0, u(6)}}));
    CHECK(r.verdict == Verdict::Grant);
    CHECK(r.winner == NodeId{2});
  }
  SUBCASE("utility tie goes to the lower node id") {
    const auto r = resolve_conflicts(input(5, {{7, 5, 1, 0, u(5)}, {3, 5, 1, 0, u(5)}}));
    CHECK(r.winner == NodeId{3});
  }
  SUBCASE("half duplex: the larger utility transmits") {
    auto at_j = input(2, {{1, 2, 1, 0, u(5)}});
    at_j.own_utility = u(3);
    const auto rj = resolve_conflicts(at_j);
    CHECK(rj.verdict == Verdict::Grant);
    CHECK(rj.winner == NodeId{1});

    auto at_i = input(1, {{2, 1, 1, 0, u(3)}});
    at_i.own_utility = u(5);
    CHECK(resolve_conflicts(at_i).verdict == Verdict::Transmit);
  }
  SUBCASE("hidden node yields to a stronger transmission") {
    auto in = input(5, {{1, 5, 1, 0, u(4)}, {2, 6, 1, 0, u(6)}});
    in.hears = [](NodeId a, NodeId b) { return !((a == 1 && b == 2) || (a == 2 && b == 1)); };
    CHECK(resolve_conflicts(in).verdict == Verdict::YieldHidden);

    in.heard[1].utility_q16 = u(2);
    CHECK(resolve_conflicts(in).winner == NodeId{1});

    in.heard[1].utility_q16 = u(6);
    in.hears = [](NodeId, NodeId) { return true; };
    CHECK(resolve_conflicts(in).winner == NodeId{1});
  }
  SUBCASE("other channels and own frames are ignored") {
    CHECK(resolve_conflicts(input(5, {{1, 5, 0, 0, u(4)}})).verdict == Verdict::NoRequest);
    CHECK(resolve_conflicts(input(5, {{5, 1, 1, 0, u(4)}})).verdict == Verdict::NoRequest);
    CHECK(resolve_conflicts(input(5, {})).verdict == Verdict::NoRequest);
  }
}

TEST_CASE("resolution depends only on the set of frames heard") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    ResolverInput in;
    in.self = 1;
    in.channel = 0;
    if (rng.bernoulli(0.5)) in.own_utility = static_cast<std::uint32_t>(rng.below(8));
    std::set<std::pair<NodeId, NodeId>> deaf;
    for (NodeId tx = 2; tx < 8; ++tx) {
      if (rng.bernoulli(0.3)) continue;
      const auto rx = static_cast<NodeId>(rng.bernoulli(0.6) ? 1 : 2 + rng.below(6));
      in.heard.push_back({tx, rx, 0, 0, static_cast<std::uint32_t>(rng.below(8))});
      if (rng.bernoulli(0.3)) deaf.insert({tx, static_cast<NodeId>(2 + rng.below(6))});
    }
    in.hears = [deaf](NodeId a, NodeId b) { return !deaf.count({a, b}) && !deaf.count({b, a}); };
    const auto first = resolve_conflicts(in);
    for (int k = 0; k < 5; ++k) {
      auto shuffled = in;
      for (std::size_t i = shuffled.heard.size(); i > 1; --i)
        std::swap(shuffled.heard[i - 1], shuffled.heard[rng.below(i)]);
      const auto again = resolve_conflicts(shuffled);
      CHECK(again.verdict == first.verdict);
      CHECK(again.winner == first.winner);
    }
    if (first.verdict == Verdict::Grant) {
      // The winner addressed this node and no other request to it beats it.
      const auto win = std::find_if(in.heard.begin(), in.heard.end(),
                                    [&](const RtsFrame& r) { return r.tx == *first.winner; });
      REQUIRE(win != in.heard.end());
      CHECK(win->rx == 1);
      for (const auto& r : in.heard)
        if (r.rx == 1 && r.tx != win->tx) CHECK(beats(win->utility_q16, win->tx, r.utility_q16, r.tx));
      if (in.own_utility) CHECK(beats(win->utility_q16, win->tx, *in.own_utility, 1));
    }
  }
}

TEST_CASE("power update") {
  CHECK(update_power(4, 8, 16, 0.01, 100) == doctest::Approx(2));
  CHECK(update_power(4, 8, 8, 0.01, 100) == doctest::Approx(4));
  CHECK(update_power(4, 8, 0, 0.01, 100) == 100);
  CHECK(update_power(4, 1000, 1, 0.01, 10) == 10);
  CHECK(update_power(4, 1, 1000, 0.5, 10) == 0.5);
  CHECK_THROWS(update_power(1, 1, 1, 2, 1));
}

TEST_CASE("power control converges on a static channel") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const double min_mw = channel::dbm_to_mw(-15), max_mw = channel::dbm_to_mw(-5);
    const double noise = channel::dbm_to_mw(-90);
    const double target = channel::db_to_linear(10 + 10 * rng.uniform());
    // Gain chosen so that the target is reachable inside the clamp range.
    const double needed_dbm = -15 + 10 * rng.uniform();
    const double gain = target * noise / channel::dbm_to_mw(needed_dbm);
    double p = min_mw + (max_mw - min_mw) * rng.uniform();
    int rounds = 0;
    while (std::abs(p * gain / noise - target) > 0.01 * target && rounds < 20) {
      p = update_power(p, target, p * gain / noise, min_mw, max_mw);
      CHECK(p >= min_mw);
      CHECK(p <= max_mw);
      ++rounds;
    }
    CHECK(std::abs(p * gain / noise - target) <= 0.01 * target);
  }
}

TEST_CASE("channel hopping") {
  Rng a(3), b(3);
  std::map<ChannelIndex, int> counts;
  ChannelIndex cur = 0;
  for (int i = 0; i < 30000; ++i) {
    const auto next = hop_next_channel(cur, 3, a);
    CHECK(next != cur);
    CHECK(next < 3);
    CHECK(next == hop_next_channel(cur, 3, b));
    ++counts[next];
    cur = next;
  }
  for (auto [ch, n] : counts) CHECK(n == doctest::Approx(10000).epsilon(0.05));
  Rng c(1);
  for (int i = 0; i < 10; ++i) CHECK(hop_next_channel(0, 1, c) == 0);
  CHECK_THROWS(hop_next_channel(0, 0, c));

  channel::TimingConfig t;
  CHECK(t.ttr_s(3) == 6.0);
}

TEST_CASE("busy threshold") {
  const double noise = channel::dbm_to_mw(-90);
  CHECK_FALSE(channel_busy(noise, noise, 6));
  CHECK_FALSE(channel_busy(noise * 3.9, noise, 6));
  CHECK(channel_busy(noise * 4.1, noise, 6));
}

TEST_CASE("discovery fills both neighbor tables") {
  World w(chain(2));
  w.start();
  w.run_until(seconds(w.scenario().timing.ttr_s(3)));
  CHECK(w.node(1).neighbors().size() == 1);
  CHECK(w.node(2).neighbors().size() == 1);
  const auto& rec = w.node(1).neighbors().at(2);
  bool measured = false;
  for (double g : rec.gain) {
    CHECK(g >= 0);
    if (g > 0) {
      CHECK(g == doctest::Approx(channel::db_to_linear(-40.0)));
      measured = true;
    }
  }
  CHECK(measured);
}

TEST_CASE("late DIS and malformed frames") {
  World w(chain(2));
  w.start();
  w.run_until(seconds(w.scenario().timing.ttr_s(3)) + seconds(1));
  REQUIRE(w.node(1).phase() != Phase::Discovery);
  w.inject(1, encode(DisFrame{9, 0, {}}), 9, -60);
  CHECK(w.node(1).neighbors().count(9) == 1);

  const auto before = w.node(1).counters().malformed;
  w.inject(1, Bytes{0x09, 1, 2}, 9, -60);
  w.inject(1, Bytes{0x03, 1}, 9, -60);
  w.inject(1, Bytes{}, 9, -60);
  CHECK(w.node(1).counters().malformed == before + 3);
}

TEST_CASE("SYN lists every virtual backlog") {
  auto s = chain(6);
  s.flows = {{1, {3, 4}, 0.0, true, true}, {1, {5, 6}, 0.0, true, true}};
  World w(s);
  w.start();
  w.run_while_not([&] { return count_sent(w, 1, FrameType::Syn) > 0 && count_sent(w, 6, FrameType::Syn) > 0; },
                  seconds(200));
  const auto it = std::find_if(w.sent().begin(), w.sent().end(),
                               [](const auto& x) { return x.src == 1 && x.type == FrameType::Syn; });
  REQUIRE(it != w.sent().end());
  const auto syn = decode_syn(it->frame);
  CHECK(syn.entries.size() == 4);
  for (const auto& e : syn.entries) {
    CHECK(e.source == 1);
    CHECK(e.destinations.size() == 1);
    CHECK(e.backlog == w.scenario().saturation_backlog);
  }

  // A node without traffic still announces itself with an empty SYN.
  const auto quiet = std::find_if(w.sent().begin(), w.sent().end(),
                                  [](const auto& x) { return x.src == 6 && x.type == FrameType::Syn; });
  REQUIRE(quiet != w.sent().end());
  CHECK(decode_syn(quiet->frame).entries.empty());
}

TEST_CASE("negotiation falls back at TDT and honors a late CTS") {
  // Node 1 alone; its neighbor is simulated by injected frames.
  auto s = chain(2);
  s.topology.links.clear();
  World w(s);
  w.start();
  auto& n = w.node(1);
  w.inject(1, encode(DisFrame{2, 0, {}}), 2, -60);
  w.run_until(seconds(s.timing.ttr_s(3)) + seconds(1));
  REQUIRE(n.phase() == Phase::FlowUpdate);
  w.inject(1, encode(SynFrame{2, {}}), 2, -60);
  REQUIRE(w.run_while_not([&] { return n.phase() == Phase::Negotiation; }, seconds(200)));
  const SimTime entered = w.now();
  REQUIRE(n.schedule());
  CHECK(n.schedule()->neighbor == 2);

  REQUIRE(w.run_while_not([&] { return n.phase() != Phase::Negotiation; }, seconds(400)));
  CHECK(n.phase() == Phase::FlowUpdate);
  CHECK(w.now() - entered == seconds(s.timing.tdt_s));
  const auto rts = count_sent(w, 1, FrameType::Rts);
  CHECK(rts >= 2);
  for (const auto& x : w.sent()) {
    if (x.type != FrameType::Rts) continue;
    const auto r = decode_rts(x.frame);
    CHECK(r.tx == 1);
    CHECK(r.rx == 2);
    CHECK(r.utility_q16 > 0);
  }

  w.inject(1, encode(CtsFrame{2, 1, n.channel()}), 2, -60);
  CHECK(n.phase() == Phase::DataTransfer);
  CHECK(n.counters().late_cts == 1);
  w.run_until(w.now() + seconds(1));
  CHECK(count_sent(w, 1, FrameType::Data) > 0);
}

TEST_CASE("a CTS for someone else or with no pending request changes nothing") {
  World w(chain(2));
  w.start();
  w.run_until(seconds(61));
  auto& n = w.node(1);
  const auto phase = n.phase();
  w.inject(1, encode(CtsFrame{2, 3, n.channel()}), 2, -60);
  w.inject(1, encode(CtsFrame{2, 1, n.channel()}), 2, -60);
  CHECK(n.phase() == phase);
  CHECK(n.counters().late_cts == 0);
}

TEST_CASE("full protocol on a short chain") {
  World w(chain(3));
  const auto& sc = w.scenario();
  const SimTime end = seconds(900);
  w.start();
  w.run_until(end);

  CHECK(w.decoded(3) > 0);
  CHECK(w.wrong() == 0);

  for (NodeId id = 1; id <= 3; ++id) {
    const auto& n = w.node(id);
    const auto& log = n.phase_log();
    REQUIRE(log.size() > 3);
    CHECK(log.front().phase == Phase::Discovery);
    CHECK(log.front().at == 0);
    std::size_t data_phases = 0;
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (i + 1 == log.size()) break;  // still running at the end
      const double d = duration_s(log, i, end);
      const Phase next = log[i + 1].phase;
      switch (log[i].phase) {
        case Phase::Discovery: CHECK(d == doctest::Approx(sc.timing.ttr_s(3)).epsilon(1e-9)); break;
        case Phase::FlowUpdate:
          if (next == Phase::DataTransfer) {
            CHECK(d <= sc.timing.syn_duration_s + sc.timing.rts_window_s);
          } else {
            CHECK(d >= sc.timing.syn_duration_s - 1e-9);
            CHECK(d <= sc.timing.syn_duration_s + 2 * sc.timing.rts_window_s + 1e-9);
          }
          break;
        case Phase::Negotiation:
          CHECK(d <= sc.timing.tdt_s + 2 * sc.timing.rts_window_s + 1e-9);
          if (next == Phase::FlowUpdate) CHECK(d >= sc.timing.tdt_s - 1e-9);
          break;
        case Phase::DataTransfer:
          ++data_phases;
          CHECK(d == doctest::Approx(sc.timing.data_s).epsilon(1e-9));
          CHECK(next == Phase::FlowUpdate);
          break;
      }
    }
    CHECK(data_phases > 0);

    // Overhead is exactly the control frames put on the air.
    std::size_t control = 0;
    for (auto t : {FrameType::Dis, FrameType::Syn, FrameType::Rts, FrameType::Cts}) control += count_sent(w, id, t);
    CHECK(n.counters().overhead() == control);
    CHECK(n.counters().data_sent == count_sent(w, id, FrameType::Data));
  }

  // Every CTS answers an earlier RTS from the node it names, and a receiver
  // grants at most once per round.
  std::map<NodeId, SimTime> last_cts;
  for (std::size_t i = 0; i < w.sent().size(); ++i) {
    const auto& x = w.sent()[i];
    if (x.type != FrameType::Cts) continue;
    const auto c = decode_cts(x.frame);
    CHECK(c.rx == x.src);
    bool asked = false;
    for (std::size_t k = 0; k < i; ++k) {
      const auto& y = w.sent()[k];
      if (y.type != FrameType::Rts) continue;
      const auto r = decode_rts(y.frame);
      asked = asked || (r.tx == c.tx && r.rx == c.rx && r.channel == c.channel);
    }
    CHECK(asked);
    if (last_cts.count(x.src)) CHECK(x.at - last_cts[x.src] >= seconds(sc.timing.data_s));
    last_cts[x.src] = x.at;
  }

  // Transmit power stays inside the configured range.
  for (const auto& x : w.sent()) {
    if (x.type != FrameType::Data) continue;
    CHECK(x.power_dbm >= sc.radio.power_min_dbm - 1e-9);
    CHECK(x.power_dbm <= sc.radio.power_max_dbm + 1e-9);
  }
}

TEST_CASE("a data round stays within the phase and rate budget") {
  World w(chain(2));
  const auto& sc = w.scenario();
  w.start();
  w.run_until(seconds(900));
  const auto& log = w.node(1).phase_log();
  const auto air = to_seconds(sc.radio.ofdm.airtime(sc.data_frame_bytes(sc.coding.block_size)));
  const auto budget = static_cast<std::size_t>(std::floor(sc.timing.data_s / air));
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    if (log[i].phase != Phase::DataTransfer) continue;
    std::size_t sent = 0;
    for (const auto& x : w.sent()) {
      if (x.src == 1 && x.type == FrameType::Data && x.at >= log[i].at && x.at < log[i + 1].at) {
        ++sent;
        CHECK(x.at + sc.radio.ofdm.airtime(x.frame.size()) <= log[i + 1].at);
      }
    }
    CHECK(sent <= budget);
  }
}

TEST_CASE("a destination relays for the others") {
  // 1 -> 2 -> 3 with node 2 also a destination of the multicast flow.
  auto s = chain(3);
  s.flows = {{1, {2, 3}, 0.0, true, true}};
  World w(s);
  w.start();
  w.run_until(seconds(1200));
  CHECK(w.decoded(2) > 0);
  CHECK(w.decoded(3) > 0);
  CHECK_FALSE(w.node(2).queues().has_queue(0, 2));
  CHECK(w.node(2).counters().data_sent > 0);
  CHECK(w.node(3).counters().data_sent == 0);
}
