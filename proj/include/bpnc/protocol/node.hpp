#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bpnc/bp/backpressure.hpp"
#include "bpnc/channel/scenario.hpp"
#include "bpnc/common/rng.hpp"
#include "bpnc/gf/field.hpp"
#include "bpnc/protocol/control.hpp"
#include "bpnc/protocol/wire.hpp"
#include "bpnc/rlnc/decoder.hpp"
#include "bpnc/rlnc/packet.hpp"

namespace bpnc::protocol {

enum class Phase : std::uint8_t { Discovery, FlowUpdate, Negotiation, DataTransfer };
std::string_view to_string(Phase p);

enum class TimerKind : std::uint8_t { PhaseEnd, Hop, Beacon, Rts, RtsWindow, DataFrame, DataIdle };
constexpr std::size_t kTimerKinds = 7;

/// What a node may ask of the world around it. The engine implements this;
/// tests can substitute a recording fake.
class NodeEnv {
 public:
  virtual ~NodeEnv() = default;
  virtual SimTime now() const = 0;
  virtual void tune(NodeId node, ChannelIndex ch) = 0;
  /// Puts a frame on the air starting now; returns the time it ends.
  virtual SimTime transmit(NodeId node, ChannelIndex ch, double power_dbm, FrameType type, Bytes frame) = 0;
  virtual void set_timer(NodeId node, SimTime at, TimerKind kind, std::uint64_t token) = 0;
  /// Total power currently received on a channel, noise included (mW).
  virtual double sense_mw(NodeId node, ChannelIndex ch) = 0;

  /// Source rows of a generation, for accuracy bookkeeping; null if unknown.
  virtual const rlnc::Generation* truth(FlowIndex flow, std::uint16_t gen) const = 0;
  virtual void on_decoded(NodeId dst, FlowIndex flow, std::uint16_t gen, std::size_t index, bool correct) = 0;
  /// Fraction of the generation's symbols estimated correctly after
  /// `received` packets of it arrived at `dst`.
  virtual void on_accuracy(NodeId dst, std::size_t received, double fraction) = 0;
  /// Fraction correct in the last rank-deficient state of a generation that
  /// has just reached full rank.
  virtual void on_pre_full_rank(NodeId dst, double fraction) = 0;
};

struct NeighborRecord {
  NodeId id = 0;
  /// Linear gain estimate per channel (rx power / nominal tx power); 0 when
  /// never measured.
  std::vector<double> gain;
  ChannelIndex next_channel = 0;
  SimTime last_heard = 0;
  bool syn_seen = false;
  /// Latest SYN report, keyed by (flow source, destination).
  std::map<std::pair<NodeId, NodeId>, std::uint16_t> backlog;
  /// Neighbors this node announced in its last DIS.
  std::vector<NodeId> reported;
};

struct PhaseChange {
  SimTime at = 0;
  Phase phase = Phase::Discovery;
};

struct NodeCounters {
  std::uint64_t dis_sent = 0;
  std::uint64_t syn_sent = 0;
  std::uint64_t rts_sent = 0;
  std::uint64_t cts_sent = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::uint64_t malformed = 0;
  std::uint64_t decoded = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t backoffs = 0;
  std::uint64_t late_cts = 0;
  std::uint64_t data_rounds_tx = 0;
  std::uint64_t data_rounds_rx = 0;

  std::uint64_t overhead() const { return dis_sent + syn_sent + rts_sent + cts_sent; }
};

/// Shared read-only context for every node of a run.
struct NodeContext {
  const channel::Scenario* scenario = nullptr;
  const gf::FieldContext* field = nullptr;
  std::vector<bp::FlowId> flows;
  /// Payload symbols per DATA frame.
  std::size_t payload_symbols = 0;
};

/// One radio running the four-phase coordination protocol.
class Node {
 public:
  Node(NodeId id, const NodeContext& ctx, Rng rng, NodeEnv& env);
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void start();
  void on_timer(TimerKind kind, std::uint64_t token);
  /// A frame decoded successfully on `ch`; `src` is the link-layer sender
  /// reported by the radio and `rx_power_mw` the measured received power.
  void on_frame(std::span<const std::uint8_t> frame, NodeId src, ChannelIndex ch, double rx_power_mw);
  /// One application packet arrives at this node for `flow`.
  void on_app_packet(FlowIndex flow, std::span<const std::uint8_t> payload);

  NodeId id() const { return id_; }
  Phase phase() const { return phase_; }
  ChannelIndex channel() const { return channel_; }
  const std::vector<PhaseChange>& phase_log() const { return phase_log_; }
  const NodeCounters& counters() const { return counters_; }
  const bp::VirtualQueueSet& queues() const { return queues_; }
  const bp::PenaltyTracker& penalties() const { return penalties_; }
  const std::map<NodeId, NeighborRecord>& neighbors() const { return neighbors_; }
  double data_power_dbm() const;
  /// Receiving DATA from `src` in the current data round.
  bool expects_data_from(NodeId src) const;
  /// DATA frames accepted, per sender.
  const std::map<NodeId, std::uint64_t>& data_from() const { return data_from_; }
  /// DATA frames sent, per next hop.
  const std::map<NodeId, std::uint64_t>& data_to() const { return data_to_; }
  /// Source rows of a generation this node originated.
  const rlnc::Generation* source_generation(FlowIndex flow, std::uint16_t gen) const;
  /// Packets this node originated for `flow`.
  std::uint64_t injected(FlowIndex flow) const;

  /// Utility of the schedule this node is negotiating, if any.
  std::optional<bp::Schedule> schedule() const { return schedule_; }
  /// Backpressure decision from the current neighbor table (no side effects).
  std::optional<bp::Schedule> compute_schedule() const;

 private:
  struct FlowState;
  struct QueueEntry;

  // phases
  void enter(Phase p);
  void enter_discovery();
  void enter_flow_update();
  void enter_negotiation();
  void enter_data_tx();
  void enter_data_rx(NodeId tx);
  void finish_data();

  // timers
  void arm(TimerKind kind, SimTime at);
  void disarm(TimerKind kind);
  void on_hop();
  void on_beacon();
  void on_rts_timer();
  void on_rts_window();
  void on_data_frame_timer();

  // frames
  void handle_dis(const DisFrame& f, ChannelIndex ch, double rx_power_mw);
  void handle_syn(const SynFrame& f, ChannelIndex ch, double rx_power_mw);
  void handle_rts(const RtsFrame& f);
  void handle_cts(const CtsFrame& f);
  void handle_data(std::span<const std::uint8_t> frame, NodeId src);
  NeighborRecord& touch(NodeId n, ChannelIndex ch, double rx_power_mw);
  void send(FrameType type, Bytes frame, double power_dbm);
  bool transmitting() const;

  // queues and coding
  FlowState& flow_state(FlowIndex f);
  void enqueue_entry(FlowIndex f, const QueueEntry& e);
  void top_up_saturated();
  std::optional<rlnc::CodedPacket> next_coded_packet(FlowIndex f, std::span<const NodeId> served);
  void accept_coded(FlowIndex f, const rlnc::CodedPacket& pkt, NodeId from);
  void prune_neighbors();
  double link_rate(const NeighborRecord& n, ChannelIndex ch) const;
  ChannelIndex pick_idle_channel(ChannelIndex preferred);

  NodeId id_;
  const NodeContext* ctx_;
  const channel::Scenario* sc_;
  Rng rng_;
  NodeEnv* env_;

  Phase phase_ = Phase::Discovery;
  SimTime phase_started_ = 0;
  std::vector<PhaseChange> phase_log_;
  ChannelIndex channel_ = 0;
  std::uint64_t tokens_[kTimerKinds] = {};
  SimTime busy_until_ = 0;
  SimTime last_discovery_ = 0;
  double data_power_mw_ = 0;

  std::map<NodeId, NeighborRecord> neighbors_;
  bp::VirtualQueueSet queues_;
  bp::PenaltyTracker penalties_;
  std::map<FlowIndex, std::unique_ptr<FlowState>> flows_;

  // negotiation
  std::optional<bp::Schedule> schedule_;
  std::uint32_t own_utility_q16_ = 0;
  /// Kept after falling back so a late CTS can still be honored.
  std::optional<bp::Schedule> late_schedule_;
  bool window_open_ = false;
  std::vector<std::pair<SimTime, RtsFrame>> heard_rts_;

  // data round
  bool data_tx_ = false;
  NodeId partner_ = 0;
  std::uint32_t sent_in_round_ = 0;
  /// Partner backlog per served destination, from its last SYN.
  std::vector<std::pair<NodeId, double>> partner_backlog_;
  SimTime data_end_ = 0;

  NodeCounters counters_;
  std::map<NodeId, std::uint64_t> data_from_;
  std::map<NodeId, std::uint64_t> data_to_;
};

}  // namespace bpnc::protocol
