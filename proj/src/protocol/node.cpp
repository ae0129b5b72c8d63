#include "bpnc/protocol/node.hpp"

#include <algorithm>
#include <cmath>

#include "bpnc/channel/phy.hpp"
#include "bpnc/rlnc/encoder.hpp"
#include "bpnc/rlnc/rank_deficient.hpp"
#include "bpnc/rlnc/symbols.hpp"

namespace bpnc::protocol {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Discovery: return "discovery";
    case Phase::FlowUpdate: return "flow_update";
    case Phase::Negotiation: return "negotiation";
    case Phase::DataTransfer: return "data";
  }
  return "?";
}

namespace {

constexpr std::size_t kKeptGenerations = 256;
constexpr SimTime kBeaconJitter = 500'000;

// Echelon basis over encoding vectors only; tells whether a tag is new.
class TagRank {
 public:
  bool add(const gf::FieldContext& field, std::span<const gf::Symbol> tag) {
    std::vector<gf::Symbol> row(tag.begin(), tag.end());
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      const auto c = row[pivot_[i]];
      if (c != 0) field.axpy(c, basis_[i], row);
    }
    const auto lead = std::find_if(row.begin(), row.end(), [](gf::Symbol s) { return s != 0; });
    if (lead == row.end()) return false;
    field.scale(field.inv(*lead), row);
    pivot_.push_back(static_cast<std::size_t>(lead - row.begin()));
    basis_.push_back(std::move(row));
    return true;
  }

 private:
  std::vector<std::vector<gf::Symbol>> basis_;
  std::vector<std::size_t> pivot_;
};

gf::Symbol nonzero(const gf::FieldContext& f, Rng& rng) {
  return static_cast<gf::Symbol>(1 + rng.below(f.size() - 1));
}

gf::Symbol any_symbol(const gf::FieldContext& f, Rng& rng) { return static_cast<gf::Symbol>(rng.below(f.size())); }

}  // namespace

struct Node::QueueEntry {
  std::uint16_t gen = 0;
  /// Source: slot within the generation. Relay: buffered rows usable.
  std::uint16_t rows = 0;
  /// Bit i set while the entry is still owed to destination i of the flow.
  std::uint32_t pending = 0;
};

struct Node::FlowState {
  struct RelayGen {
    std::vector<rlnc::CodedPacket> rows;
    TagRank rank;
    /// Queue entries still pointing at this generation.
    std::size_t refs = 0;
  };
  struct DestGen {
    std::unique_ptr<rlnc::Decoder> decoder;
    std::size_t received = 0;
    bool sampled = false;
    std::optional<double> pre_full;
  };

  FlowIndex index = 0;
  const bp::FlowId* id = nullptr;
  std::size_t block_size = 1;
  bool coded = false;
  bool is_source = false;
  bool is_destination = false;
  std::deque<QueueEntry> fifo;

  std::map<std::uint16_t, rlnc::Generation> source_gens;
  std::optional<std::uint16_t> filling;
  std::uint16_t next_gen = 0;
  std::uint64_t injected = 0;

  std::map<std::uint16_t, RelayGen> relay;
  std::map<std::uint16_t, DestGen> dest;
  /// Generations finished (or abandoned) at this destination.
  std::vector<bool> finished;
  std::size_t sampled_gens = 0;

  std::uint32_t mask_of(std::span<const NodeId> dsts) const {
    std::uint32_t m = 0;
    for (NodeId d : dsts) {
      const auto it = std::lower_bound(id->destinations.begin(), id->destinations.end(), d);
      if (it != id->destinations.end() && *it == d) m |= 1u << (it - id->destinations.begin());
    }
    return m;
  }
};

Node::Node(NodeId id, const NodeContext& ctx, Rng rng, NodeEnv& env)
    : id_(id), ctx_(&ctx), sc_(ctx.scenario), rng_(rng), env_(&env), queues_(id) {
  data_power_mw_ = channel::dbm_to_mw(sc_->radio.nominal_power_dbm);
  for (std::size_t f = 0; f < ctx.flows.size(); ++f) {
    if (ctx.flows[f].source == id) {
      flow_state(static_cast<FlowIndex>(f));
    }
  }
}

Node::~Node() = default;

double Node::data_power_dbm() const { return channel::mw_to_dbm(data_power_mw_); }

bool Node::expects_data_from(NodeId src) const {
  return phase_ == Phase::DataTransfer && !data_tx_ && partner_ == src;
}

const rlnc::Generation* Node::source_generation(FlowIndex flow, std::uint16_t gen) const {
  const auto f = flows_.find(flow);
  if (f == flows_.end() || !f->second->is_source) return nullptr;
  const auto g = f->second->source_gens.find(gen);
  return g == f->second->source_gens.end() ? nullptr : &g->second;
}

std::uint64_t Node::injected(FlowIndex flow) const {
  const auto f = flows_.find(flow);
  return f == flows_.end() ? 0 : f->second->injected;
}

Node::FlowState& Node::flow_state(FlowIndex f) {
  auto& slot = flows_[f];
  if (!slot) {
    slot = std::make_unique<FlowState>();
    slot->index = f;
    slot->id = &ctx_->flows.at(f);
    slot->coded = sc_->flows.at(f).coded;
    slot->block_size = sc_->block_size_of(f);
    slot->is_source = slot->id->source == id_;
    slot->is_destination = slot->id->has_destination(id_);
    queues_.add_flow(f, *slot->id);
  }
  return *slot;
}

// ------------------------------------------------------------------ timers

void Node::arm(TimerKind kind, SimTime at) {
  const auto k = static_cast<std::size_t>(kind);
  env_->set_timer(id_, std::max(at, env_->now()), kind, ++tokens_[k]);
}

void Node::disarm(TimerKind kind) { ++tokens_[static_cast<std::size_t>(kind)]; }

void Node::on_timer(TimerKind kind, std::uint64_t token) {
  if (token != tokens_[static_cast<std::size_t>(kind)]) return;
  switch (kind) {
    case TimerKind::PhaseEnd:
      if (window_open_) {
        // Finish answering the pending request first.
        arm(TimerKind::PhaseEnd, env_->now() + seconds(sc_->timing.rts_window_s));
        return;
      }
      switch (phase_) {
        case Phase::Discovery: enter_flow_update(); break;
        case Phase::FlowUpdate: {
          prune_neighbors();
          const double every = sc_->timing.rediscovery_interval_s;
          if (every > 0 && env_->now() - last_discovery_ >= seconds(every)) {
            enter_discovery();
            break;
          }
          schedule_ = compute_schedule();
          if (schedule_) {
            enter_negotiation();
          } else {
            enter_flow_update();
          }
          break;
        }
        case Phase::Negotiation:
          late_schedule_ = schedule_;
          schedule_.reset();
          enter_flow_update();
          break;
        case Phase::DataTransfer: finish_data(); break;
      }
      break;
    case TimerKind::Hop: on_hop(); break;
    case TimerKind::Beacon: on_beacon(); break;
    case TimerKind::Rts: on_rts_timer(); break;
    case TimerKind::RtsWindow: on_rts_window(); break;
    case TimerKind::DataFrame: on_data_frame_timer(); break;
    case TimerKind::DataIdle:
      if (phase_ == Phase::DataTransfer && !data_tx_) finish_data();
      break;
  }
}

// ------------------------------------------------------------------ phases

void Node::enter(Phase p) {
  phase_ = p;
  phase_started_ = env_->now();
  phase_log_.push_back({phase_started_, p});
}

void Node::start() {
  channel_ = static_cast<ChannelIndex>(rng_.below(sc_->topology.channels_ghz.size()));
  env_->tune(id_, channel_);
  top_up_saturated();
  enter_discovery();
}

void Node::enter_discovery() {
  enter(Phase::Discovery);
  const SimTime now = env_->now();
  last_discovery_ = now;
  window_open_ = false;
  disarm(TimerKind::Rts);
  disarm(TimerKind::RtsWindow);
  const double ttr = sc_->timing.ttr_s(sc_->topology.channels_ghz.size());
  arm(TimerKind::PhaseEnd, now + seconds(ttr));
  arm(TimerKind::Hop, now + static_cast<SimTime>(rng_.below(static_cast<std::uint64_t>(seconds(sc_->timing.dwell_s)))));
  arm(TimerKind::Beacon, now + static_cast<SimTime>(rng_.below(kBeaconJitter)));
}

void Node::enter_flow_update() {
  enter(Phase::FlowUpdate);
  const SimTime now = env_->now();
  window_open_ = false;
  disarm(TimerKind::Rts);
  disarm(TimerKind::RtsWindow);
  disarm(TimerKind::DataFrame);
  disarm(TimerKind::DataIdle);
  arm(TimerKind::PhaseEnd, now + seconds(sc_->timing.syn_duration_s));
  arm(TimerKind::Hop, now + seconds(sc_->timing.dwell_s));
  arm(TimerKind::Beacon, now + static_cast<SimTime>(rng_.below(kBeaconJitter)));
}

void Node::enter_negotiation() {
  enter(Phase::Negotiation);
  const SimTime now = env_->now();
  own_utility_q16_ = quantize_utility(schedule_->utility);
  late_schedule_.reset();
  disarm(TimerKind::Hop);
  disarm(TimerKind::Beacon);
  arm(TimerKind::PhaseEnd, now + seconds(sc_->timing.tdt_s));
  const ChannelIndex ch = pick_idle_channel(schedule_->channel);
  schedule_->channel = ch;
  if (ch != channel_) {
    channel_ = ch;
    env_->tune(id_, ch);
  }
  const auto interval = static_cast<std::uint64_t>(seconds(sc_->timing.rts_interval_s));
  arm(TimerKind::Rts, now + static_cast<SimTime>(rng_.below(std::max<std::uint64_t>(interval, 1))));
}

void Node::enter_data_tx() {
  enter(Phase::DataTransfer);
  const SimTime now = env_->now();
  data_tx_ = true;
  partner_ = schedule_->neighbor;
  window_open_ = false;
  late_schedule_.reset();
  for (auto k : {TimerKind::Hop, TimerKind::Beacon, TimerKind::Rts, TimerKind::RtsWindow, TimerKind::DataIdle})
    disarm(k);
  data_end_ = now + seconds(sc_->timing.data_s);
  arm(TimerKind::PhaseEnd, data_end_);
  // Sending a flow back to a node it has already been at is a revisit.
  if (penalties_.visits(schedule_->flow, partner_) > 0) penalties_.record_visit(schedule_->flow, partner_);
  ++counters_.data_rounds_tx;

  const auto& radio = sc_->radio;
  const double noise = channel::dbm_to_mw(sc_->topology.noise_dbm);
  if (radio.power_control) {
    double g = 0;
    if (const auto it = neighbors_.find(partner_); it != neighbors_.end()) {
      g = it->second.gain[channel_];
      if (g <= 0) {
        for (double x : it->second.gain) g = std::max(g, x);
      }
    }
    const double achieved = data_power_mw_ * g / noise;
    data_power_mw_ = update_power(data_power_mw_, channel::db_to_linear(radio.target_snr_db), achieved,
                                  channel::dbm_to_mw(radio.power_min_dbm), channel::dbm_to_mw(radio.power_max_dbm));
  }

  sent_in_round_ = 0;
  partner_backlog_.clear();
  const auto nb = neighbors_.find(partner_);
  const NodeId source = flow_state(schedule_->flow).id->source;
  for (NodeId d : schedule_->served) {
    double remote = 0;
    if (d != partner_ && nb != neighbors_.end()) {
      const auto it = nb->second.backlog.find({source, d});
      if (it != nb->second.backlog.end()) remote = it->second;
    }
    partner_backlog_.push_back({d, remote});
  }

  const double cost_us =
      sc_->coding.coding_cost_us * static_cast<double>(sc_->block_size_of(schedule_->flow) * ctx_->payload_symbols);
  arm(TimerKind::DataFrame, std::max(now, busy_until_) + static_cast<SimTime>(std::llround(cost_us)));
}

void Node::enter_data_rx(NodeId tx) {
  enter(Phase::DataTransfer);
  const SimTime now = env_->now();
  data_tx_ = false;
  partner_ = tx;
  schedule_.reset();
  late_schedule_.reset();
  for (auto k : {TimerKind::Hop, TimerKind::Beacon, TimerKind::Rts, TimerKind::DataFrame}) disarm(k);
  data_end_ = now + seconds(sc_->timing.data_s);
  arm(TimerKind::PhaseEnd, data_end_);
  if (sc_->timing.data_idle_s > 0) arm(TimerKind::DataIdle, now + 2 * seconds(sc_->timing.data_idle_s));
  ++counters_.data_rounds_rx;
}

void Node::finish_data() {
  data_tx_ = false;
  partner_ = 0;
  schedule_.reset();
  enter_flow_update();
}

// ---------------------------------------------------------------- hopping

void Node::on_hop() {
  if (window_open_) return;
  if (phase_ != Phase::Discovery && phase_ != Phase::FlowUpdate) return;
  channel_ = hop_next_channel(channel_, sc_->topology.channels_ghz.size(), rng_);
  env_->tune(id_, channel_);
  arm(TimerKind::Beacon, env_->now() + static_cast<SimTime>(rng_.below(kBeaconJitter)));
  arm(TimerKind::Hop, env_->now() + seconds(sc_->timing.dwell_s));
}

bool Node::transmitting() const { return busy_until_ > env_->now(); }

void Node::send(FrameType type, Bytes frame, double power_dbm) {
  busy_until_ = env_->transmit(id_, channel_, power_dbm, type, std::move(frame));
  switch (type) {
    case FrameType::Dis: ++counters_.dis_sent; break;
    case FrameType::Syn: ++counters_.syn_sent; break;
    case FrameType::Rts: ++counters_.rts_sent; break;
    case FrameType::Cts: ++counters_.cts_sent; break;
    case FrameType::Data: ++counters_.data_sent; break;
  }
}

void Node::on_beacon() {
  if (phase_ != Phase::Discovery && phase_ != Phase::FlowUpdate) return;
  const SimTime now = env_->now();
  if (transmitting() || window_open_) {
    arm(TimerKind::Beacon, std::max(busy_until_, now) + seconds(sc_->timing.rts_window_s));
    return;
  }
  const double nominal = sc_->radio.nominal_power_dbm;
  const double noise = sc_->topology.noise_dbm;
  if (phase_ == Phase::Discovery) {
    DisFrame f;
    f.sender = id_;
    f.next_channel = channel_;
    for (const auto& [nid, rec] : neighbors_) {
      ChannelIndex best_ch = 0;
      for (std::size_t c = 0; c < rec.gain.size(); ++c)
        if (rec.gain[c] > rec.gain[best_ch]) best_ch = static_cast<ChannelIndex>(c);
      if (rec.gain[best_ch] <= 0) continue;
      f.neighbors.push_back({nid, best_ch, nominal + channel::linear_to_db(rec.gain[best_ch]) - noise});
    }
    send(FrameType::Dis, encode(f), nominal);
  } else {
    SynFrame f;
    f.sender = id_;
    for (const auto& e : queues_.entries()) {
      f.entries.push_back({ctx_->flows[e.flow].source, {e.dst},
                           static_cast<std::uint16_t>(std::min<std::uint32_t>(e.backlog, 0xFFFF))});
    }
    send(FrameType::Syn, encode(f), nominal);
    arm(TimerKind::Beacon, now + seconds(sc_->timing.syn_interval_s));
  }
}

ChannelIndex Node::pick_idle_channel(ChannelIndex preferred) {
  if (!sc_->radio.sensing) return preferred;
  const double noise = channel::dbm_to_mw(sc_->topology.noise_dbm);
  const double thr = sc_->radio.busy_threshold_db;
  if (!channel_busy(env_->sense_mw(id_, preferred), noise, thr)) return preferred;
  ++counters_.backoffs;
  const std::size_t n = sc_->topology.channels_ghz.size();
  for (std::size_t k = 1; k < n; ++k) {
    const auto c = static_cast<ChannelIndex>((preferred + k) % n);
    if (!channel_busy(env_->sense_mw(id_, c), noise, thr)) return c;
  }
  return preferred;
}

// ------------------------------------------------------------ negotiation

void Node::on_rts_timer() {
  if (phase_ != Phase::Negotiation || !schedule_) return;
  const SimTime now = env_->now();
  const auto interval = seconds(sc_->timing.rts_interval_s);
  if (transmitting()) {
    arm(TimerKind::Rts, busy_until_ + 1000);
    return;
  }
  if (!window_open_) {
    const ChannelIndex ch = pick_idle_channel(channel_);
    if (ch != channel_) {
      channel_ = ch;
      schedule_->channel = ch;
      env_->tune(id_, ch);
      arm(TimerKind::Rts, now + interval / 2 + static_cast<SimTime>(rng_.below(static_cast<std::uint64_t>(interval / 2))));
      return;
    }
  }
  RtsFrame r{id_, schedule_->neighbor, channel_, schedule_->flow, own_utility_q16_};
  send(FrameType::Rts, encode(r), sc_->radio.nominal_power_dbm);
  arm(TimerKind::Rts, now + interval + static_cast<SimTime>(rng_.below(static_cast<std::uint64_t>(interval / 2) + 1)));
}

void Node::handle_rts(const RtsFrame& f) {
  const SimTime now = env_->now();
  if (phase_ != Phase::FlowUpdate && phase_ != Phase::Negotiation) return;
  const SimTime horizon = seconds(sc_->timing.rts_window_s + 2 * sc_->timing.rts_interval_s);
  std::erase_if(heard_rts_, [&](const auto& e) { return now - e.first > horizon; });
  heard_rts_.push_back({now, f});
  if (f.rx == id_ && f.channel == channel_ && !window_open_) {
    window_open_ = true;
    disarm(TimerKind::Hop);
    arm(TimerKind::RtsWindow, now + seconds(sc_->timing.rts_window_s));
  }
}

void Node::on_rts_window() {
  window_open_ = false;
  const SimTime now = env_->now();
  ResolverInput in;
  in.self = id_;
  in.channel = channel_;
  if (phase_ == Phase::Negotiation && schedule_ && schedule_->channel == channel_) in.own_utility = own_utility_q16_;
  for (const auto& [t, r] : heard_rts_) in.heard.push_back(r);
  in.hears = [this](NodeId a, NodeId b) {
    if (a == id_) return neighbors_.count(b) != 0;
    const auto it = neighbors_.find(a);
    if (it == neighbors_.end() || it->second.reported.empty()) return true;
    return std::find(it->second.reported.begin(), it->second.reported.end(), b) != it->second.reported.end();
  };
  const Resolution res = resolve_conflicts(in);
  if (res.verdict == Verdict::Grant && !transmitting()) {
    send(FrameType::Cts, encode(CtsFrame{id_, *res.winner, channel_}), sc_->radio.nominal_power_dbm);
    heard_rts_.clear();
    enter_data_rx(*res.winner);
    return;
  }
  if (phase_ == Phase::FlowUpdate) {
    arm(TimerKind::Hop, now + static_cast<SimTime>(rng_.below(static_cast<std::uint64_t>(seconds(sc_->timing.dwell_s)))));
  }
}

void Node::handle_cts(const CtsFrame& f) {
  if (f.tx != id_) return;
  if (phase_ == Phase::Negotiation && schedule_ && f.rx == schedule_->neighbor) {
    enter_data_tx();
    return;
  }
  if (phase_ == Phase::FlowUpdate && late_schedule_ && f.rx == late_schedule_->neighbor && !window_open_) {
    ++counters_.late_cts;
    schedule_ = late_schedule_;
    schedule_->channel = f.channel;
    enter_data_tx();
  }
}

// ------------------------------------------------------------- neighbors

NeighborRecord& Node::touch(NodeId n, ChannelIndex ch, double rx_power_mw) {
  auto& rec = neighbors_[n];
  if (rec.gain.empty()) {
    rec.id = n;
    rec.gain.assign(sc_->topology.channels_ghz.size(), 0.0);
  }
  rec.gain[ch] = rx_power_mw / channel::dbm_to_mw(sc_->radio.nominal_power_dbm);
  rec.last_heard = env_->now();
  return rec;
}

void Node::handle_dis(const DisFrame& f, ChannelIndex ch, double rx_power_mw) {
  auto& rec = touch(f.sender, ch, rx_power_mw);
  rec.next_channel = f.next_channel;
  rec.reported.clear();
  for (const auto& n : f.neighbors) rec.reported.push_back(n.id);
}

void Node::handle_syn(const SynFrame& f, ChannelIndex ch, double rx_power_mw) {
  auto& rec = touch(f.sender, ch, rx_power_mw);
  rec.syn_seen = true;
  rec.backlog.clear();
  for (const auto& e : f.entries)
    for (NodeId d : e.destinations) rec.backlog[{e.source, d}] = e.backlog;
}

void Node::prune_neighbors() {
  const double ttr = sc_->timing.ttr_s(sc_->topology.channels_ghz.size());
  const SimTime horizon = seconds(sc_->timing.staleness_factor * ttr);
  const SimTime now = env_->now();
  std::erase_if(neighbors_, [&](const auto& kv) { return now - kv.second.last_heard > horizon; });
}

double Node::link_rate(const NeighborRecord& n, ChannelIndex ch) const {
  double g = n.gain[ch];
  if (g <= 0) {
    double sum = 0;
    int count = 0;
    for (double x : n.gain) {
      if (x > 0) {
        sum += x;
        ++count;
      }
    }
    if (count == 0) return 0;
    g = sum / count;
  }
  const double snr = channel::dbm_to_mw(sc_->radio.nominal_power_dbm) * g / channel::dbm_to_mw(sc_->topology.noise_dbm);
  return channel::link_rate(sc_->radio.ofdm, snr, sc_->data_frame_bytes(sc_->coding.block_size)).packets_per_s;
}

std::optional<bp::Schedule> Node::compute_schedule() const {
  std::vector<bp::HopCandidate> candidates;
  const std::size_t channels = sc_->topology.channels_ghz.size();
  for (const auto& [nid, rec] : neighbors_) {
    if (!rec.syn_seen) continue;
    std::vector<bp::FlowView> views;
    for (const auto& [fi, fs] : flows_) {
      if (fs->id->source == nid) continue;
      // A flow already seen at the neighbor is scored with the penalty the
      // revisit would bring.
      const auto seen = penalties_.visits(fi, nid);
      const double alpha = seen == 0 ? 1.0 : 1.0 / static_cast<double>(seen + 1);
      bp::FlowView v{fi, alpha, {}};
      for (NodeId d : queues_.destinations(fi)) {
        double remote = 0;
        if (d != nid) {
          const auto it = rec.backlog.find({fs->id->source, d});
          if (it != rec.backlog.end()) remote = it->second;
        }
        v.dests.push_back({d, static_cast<double>(queues_.backlog(fi, d)), remote});
      }
      if (!v.dests.empty()) views.push_back(std::move(v));
    }
    const auto choice = bp::select_flow_multicast(views);
    if (!choice) continue;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto ch = static_cast<ChannelIndex>(c);
      candidates.push_back({nid, ch, link_rate(rec, ch), *choice});
    }
  }
  return bp::select_next_hop(candidates);
}

// ------------------------------------------------------------------ frames

void Node::on_frame(std::span<const std::uint8_t> frame, NodeId src, ChannelIndex ch, double rx_power_mw) {
  try {
    switch (frame_type(frame)) {
      case FrameType::Dis: handle_dis(decode_dis(frame), ch, rx_power_mw); break;
      case FrameType::Syn: handle_syn(decode_syn(frame), ch, rx_power_mw); break;
      case FrameType::Rts: handle_rts(decode_rts(frame)); break;
      case FrameType::Cts: handle_cts(decode_cts(frame)); break;
      case FrameType::Data: handle_data(frame, src); break;
    }
  } catch (const MalformedFrame&) {
    ++counters_.malformed;
  } catch (const rlnc::TagLengthMismatch&) {
    ++counters_.malformed;
  }
}

void Node::handle_data(std::span<const std::uint8_t> frame, NodeId src) {
  if (phase_ != Phase::DataTransfer || data_tx_ || src != partner_) return;
  const auto pkt = decode_data(frame, sc_->coding.field_bits, ctx_->payload_symbols);
  if (pkt.flow >= ctx_->flows.size()) throw MalformedFrame("unknown flow");
  ++counters_.data_received;
  ++data_from_[src];
  if (sc_->timing.data_idle_s > 0) arm(TimerKind::DataIdle, env_->now() + seconds(sc_->timing.data_idle_s));
  accept_coded(pkt.flow, pkt, src);
}

// ------------------------------------------------------- queues and coding

void Node::enqueue_entry(FlowIndex f, const QueueEntry& e) {
  auto& fs = flow_state(f);
  fs.fifo.push_back(e);
  if (!fs.is_source) ++fs.relay.at(e.gen).refs;
  for (std::size_t i = 0; i < fs.id->destinations.size(); ++i)
    if (e.pending & (1u << i)) queues_.enqueue(f, fs.id->destinations[i]);
}

void Node::on_app_packet(FlowIndex f, std::span<const std::uint8_t> payload) {
  auto& fs = flow_state(f);
  if (!fs.is_source) throw std::logic_error("application packet at a node that is not the flow source");
  const int m = sc_->coding.field_bits;
  auto symbols = rlnc::to_symbols(payload, m);
  symbols.resize(ctx_->payload_symbols, 0);
  if (!fs.filling) {
    const std::uint16_t g = fs.next_gen++;
    fs.source_gens.emplace(g, rlnc::Generation(g, fs.block_size, ctx_->payload_symbols));
    fs.filling = g;
  }
  auto& gen = fs.source_gens.at(*fs.filling);
  gen.add_source(symbols);
  ++fs.injected;
  std::uint32_t all = 0;
  for (std::size_t i = 0; i < fs.id->destinations.size(); ++i) all |= 1u << i;
  enqueue_entry(f, {gen.id(), static_cast<std::uint16_t>(gen.size() - 1), all});
  if (gen.complete()) {
    if (fs.coded) {
      for (std::size_t k = 0; k < sc_->coding.redundancy; ++k)
        enqueue_entry(f, {gen.id(), static_cast<std::uint16_t>(fs.block_size + k), all});
    }
    fs.filling.reset();
  }
}

void Node::top_up_saturated() {
  for (std::size_t f = 0; f < sc_->flows.size(); ++f) {
    if (!sc_->flows[f].saturated || ctx_->flows[f].source != id_) continue;
    const auto fi = static_cast<FlowIndex>(f);
    auto lowest = [&] {
      std::uint32_t low = UINT32_MAX;
      for (NodeId d : queues_.destinations(fi)) low = std::min(low, queues_.backlog(fi, d));
      return low;
    };
    std::vector<std::uint8_t> payload(sc_->coding.payload_bytes);
    while (lowest() < sc_->saturation_backlog) {
      for (auto& b : payload) b = static_cast<std::uint8_t>(32 + rng_.below(95));
      on_app_packet(fi, payload);
    }
  }
}

std::optional<rlnc::CodedPacket> Node::next_coded_packet(FlowIndex f, std::span<const NodeId> served) {
  auto& fs = flow_state(f);
  const auto& field = *ctx_->field;
  const std::uint32_t want = fs.mask_of(served);
  const std::size_t h = fs.block_size;

  for (auto it = fs.fifo.begin(); it != fs.fifo.end();) {
    if ((it->pending & want) == 0) {
      ++it;
      continue;
    }
    std::optional<rlnc::CodedPacket> pkt;
    if (fs.is_source) {
      const auto g = fs.source_gens.find(it->gen);
      if (g != fs.source_gens.end()) {
        std::vector<gf::Symbol> tag(h, 0);
        const std::size_t slot = it->rows;
        if (!fs.coded) {
          tag[0] = 1;
        } else if (slot < h) {
          for (std::size_t c = 0; c < slot; ++c) tag[c] = any_symbol(field, rng_);
          tag[slot] = nonzero(field, rng_);
        } else {
          do {
            for (auto& c : tag) c = any_symbol(field, rng_);
          } while (std::all_of(tag.begin(), tag.end(), [](gf::Symbol s) { return s == 0; }));
        }
        pkt = rlnc::encode_with(field, g->second, tag, f);
      }
    } else {
      const auto g = fs.relay.find(it->gen);
      if (g != fs.relay.end() && it->rows > 0) {
        const std::size_t k = std::min<std::size_t>(it->rows, g->second.rows.size());
        std::vector<gf::Symbol> coeff(k, 0);
        if (!fs.coded) {
          coeff[k - 1] = 1;
        } else {
          for (std::size_t c = 0; c + 1 < k; ++c) coeff[c] = any_symbol(field, rng_);
          coeff[k - 1] = nonzero(field, rng_);
        }
        pkt = rlnc::recode_with(field, std::span(g->second.rows).first(k), coeff);
      }
    }

    const std::uint32_t clear = pkt ? (it->pending & want) : it->pending;
    for (std::size_t i = 0; i < fs.id->destinations.size(); ++i)
      if (clear & (1u << i)) queues_.dequeue(f, fs.id->destinations[i]);
    it->pending &= ~clear;
    if (it->pending == 0) {
      if (!fs.is_source) {
        if (const auto g = fs.relay.find(it->gen); g != fs.relay.end()) --g->second.refs;
      }
      it = fs.fifo.erase(it);
    } else {
      ++it;
    }
    if (pkt) return pkt;
  }
  return std::nullopt;
}

void Node::accept_coded(FlowIndex f, const rlnc::CodedPacket& pkt, NodeId from) {
  auto& fs = flow_state(f);
  if (fs.is_source) return;
  const auto& field = *ctx_->field;
  const std::size_t h = fs.block_size;
  if (pkt.tag.size() != h) throw rlnc::TagLengthMismatch("block size differs from the flow's");

  if (fs.is_destination && fs.finished.empty()) fs.finished.assign(std::size_t{1} << 16, false);
  if (fs.is_destination && !fs.finished[pkt.gen_id]) {
    auto [it, fresh] = fs.dest.try_emplace(pkt.gen_id);
    if (fresh) {
      auto& dg = it->second;
      dg.decoder = std::make_unique<rlnc::Decoder>(field, h, ctx_->payload_symbols, pkt.gen_id, sc_->coding.decoder);
      dg.sampled = fs.sampled_gens < sc_->coding.accuracy_generations;
      if (dg.sampled) ++fs.sampled_gens;
      // Too many open generations: give up on the oldest.
      while (fs.dest.size() > kKeptGenerations) {
        auto victim = fs.dest.begin();
        if (victim->first == pkt.gen_id) ++victim;
        fs.finished[victim->first] = true;
        fs.dest.erase(victim);
      }
    }
    auto& dg = it->second;
    {
      const rlnc::Generation* truth = env_->truth(f, pkt.gen_id);
      const std::size_t before = dg.decoder->rank();
      const auto out = dg.decoder->ingest(pkt);
      ++dg.received;
      for (const auto& d : out) {
        const bool ok = truth && d.index < truth->size() &&
                        std::equal(d.payload.begin(), d.payload.end(), truth->source(d.index).begin());
        ++counters_.decoded;
        if (!ok) ++counters_.decode_errors;
        env_->on_decoded(id_, f, pkt.gen_id, d.index, ok);
      }
      const std::size_t rank = dg.decoder->rank();
      const bool rankdef = sc_->coding.decoder == rlnc::DecodeMode::RankDeficient;

      auto solved_fraction = [&]() -> double {
        if (!truth || !truth->complete()) return 0.0;
        const auto res = rlnc::rank_deficient_solve(*dg.decoder, sc_->coding.max_free);
        std::size_t correct = 0;
        for (std::size_t r = 0; r < h; ++r)
          for (std::size_t c = 0; c < ctx_->payload_symbols; ++c)
            correct += res.estimate.at(r, c) == truth->source(r)[c];
        return static_cast<double>(correct) / static_cast<double>(h * ctx_->payload_symbols);
      };

      std::optional<double> fraction;
      if (rankdef && h >= 2 && rank == h - 1 && rank > before) {
        fraction = solved_fraction();
        dg.pre_full = fraction;
      }
      if (dg.sampled) {
        double value = 0;
        if (dg.decoder->full_rank()) {
          value = 1.0;
        } else if (fraction) {
          value = *fraction;
        } else if (rankdef) {
          value = solved_fraction();
        } else {
          value = static_cast<double>(dg.decoder->decoded_count()) / static_cast<double>(h);
        }
        env_->on_accuracy(id_, dg.received, value);
      }
      if (dg.decoder->full_rank()) {
        if (dg.pre_full) env_->on_pre_full_rank(id_, *dg.pre_full);
        fs.finished[pkt.gen_id] = true;
        fs.dest.erase(it);
      }
    }
  }

  // Relay duty for the remaining destinations.
  const auto& nb = neighbors_.find(from);
  std::vector<NodeId> served;
  std::vector<NodeId> others;
  for (NodeId d : fs.id->destinations) {
    // The sender already holds the packet if it is a destination itself.
    if (d == id_ || d == from) continue;
    others.push_back(d);
    if (nb == neighbors_.end() || !nb->second.syn_seen) continue;
    const auto it = nb->second.backlog.find({fs.id->source, d});
    const double theirs = it == nb->second.backlog.end() ? 0.0 : it->second;
    if (theirs > queues_.backlog(f, d)) served.push_back(d);
  }
  if (served.empty()) served = others;
  if (served.empty()) return;

  // The flow has been at the sender: its first visit there.
  if (penalties_.visits(f, from) == 0) penalties_.record_visit(f, from);

  auto& rg = fs.relay[pkt.gen_id];
  if (rg.rank.add(field, pkt.tag)) rg.rows.push_back(pkt);
  if (!rg.rows.empty())
    enqueue_entry(f, {pkt.gen_id, static_cast<std::uint16_t>(rg.rows.size()), fs.mask_of(served)});
  // Keep recent generations for recoding, and older ones while queued.
  for (auto it = fs.relay.begin(); fs.relay.size() > kKeptGenerations && it != fs.relay.end();) {
    if (it->second.refs == 0 && it->first != pkt.gen_id) {
      it = fs.relay.erase(it);
    } else {
      ++it;
    }
  }
}

void Node::on_data_frame_timer() {
  if (phase_ != Phase::DataTransfer || !data_tx_ || !schedule_) return;
  const SimTime now = env_->now();
  const FlowIndex f = schedule_->flow;
  const std::size_t h = sc_->block_size_of(f);
  const SimTime air = sc_->radio.ofdm.airtime(sc_->data_frame_bytes(h));
  // The round lasts the whole data phase, but sending stops once no served
  // destination has a positive differential against the partner's last SYN.
  if (now + air > data_end_) return;
  top_up_saturated();
  bool positive = false;
  for (const auto& [d, remote] : partner_backlog_) {
    if (static_cast<double>(queues_.backlog(f, d)) > remote) positive = true;
  }
  if (!positive) return;
  const auto pkt = next_coded_packet(f, schedule_->served);
  if (!pkt) {
    arm(TimerKind::DataFrame, now + air);
    return;
  }
  send(FrameType::Data, encode_data(*pkt, sc_->coding.field_bits), data_power_dbm());
  ++sent_in_round_;
  ++data_to_[partner_];
  const double cost_us = sc_->coding.coding_cost_us * static_cast<double>(h * ctx_->payload_symbols);
  arm(TimerKind::DataFrame,
      busy_until_ + seconds(sc_->timing.frame_gap_s) + static_cast<SimTime>(std::llround(cost_us)));
}

}  // namespace bpnc::protocol
