#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bpnc/common/types.hpp"

namespace bpnc::bp {

/// A traffic flow: its source and the set of its destinations. A singleton
/// destination set is a unicast flow.
struct FlowId {
  NodeId source = 0;
  std::vector<NodeId> destinations;

  FlowId() = default;
  FlowId(NodeId src, std::vector<NodeId> dsts);

  bool multicast() const { return destinations.size() > 1; }
  bool has_destination(NodeId n) const;

  friend bool operator==(const FlowId&, const FlowId&) = default;
};

/// Per-flow, per-destination backlogs held at one node. The node's own
/// virtual queue is never created: a packet that reached its destination
/// leaves that destination's queue.
class VirtualQueueSet {
 public:
  explicit VirtualQueueSet(NodeId self) : self_(self) {}

  NodeId self() const { return self_; }

  /// Creates (empty) virtual queues for every destination of `flow` other
  /// than this node. Idempotent.
  void add_flow(FlowIndex index, const FlowId& flow);
  bool has_flow(FlowIndex index) const { return queues_.count(index) != 0; }

  std::uint32_t backlog(FlowIndex index, NodeId dst) const;
  bool has_queue(FlowIndex index, NodeId dst) const;
  /// Destinations that have a virtual queue here, ascending.
  std::vector<NodeId> destinations(FlowIndex index) const;

  void enqueue(FlowIndex index, NodeId dst, std::uint32_t n = 1);
  /// Removes up to n packets; returns how many were removed.
  std::uint32_t dequeue(FlowIndex index, NodeId dst, std::uint32_t n = 1);

  /// Sum over all virtual queues.
  std::uint64_t total() const;

  struct Entry {
    FlowIndex flow;
    NodeId dst;
    std::uint32_t backlog;
  };
  /// All virtual queues in (flow, destination) order.
  std::vector<Entry> entries() const;

 private:
  NodeId self_;
  std::map<FlowIndex, std::map<NodeId, std::uint32_t>> queues_;
};

/// Loop penalty: f counts how often flow s has been handed to node j, and
/// alpha = 1/f (1 before the second visit).
class PenaltyTracker {
 public:
  void record_visit(FlowIndex flow, NodeId node);
  std::uint32_t visits(FlowIndex flow, NodeId node) const;
  double alpha(FlowIndex flow, NodeId node) const;

 private:
  std::map<std::pair<FlowIndex, NodeId>, std::uint32_t> visits_;
};

/// Backlog of one destination's virtual queue at the transmitter (local) and
/// at the candidate receiver (neighbor, as last reported).
struct DestBacklog {
  NodeId dst = 0;
  double local = 0;
  double neighbor = 0;
};

/// What the flow-selection rule sees for one flow on one link.
struct FlowView {
  FlowIndex flow = 0;
  double alpha = 1.0;
  std::vector<DestBacklog> dests;
};

struct FlowChoice {
  FlowIndex flow = 0;
  /// Penalized positive differential summed over destinations.
  double score = 0;
  /// Destinations with a positive differential: the ones this link serves.
  std::vector<NodeId> served;
};

/// alpha * sum_d max(local - neighbor, 0).
double differential_score(const FlowView& view);

/// Flow with the largest penalized differential summed over its
/// destinations; none when every score is zero. Ties go to the lower flow
/// index.
std::optional<FlowChoice> select_flow_multicast(std::span<const FlowView> flows);

/// The single-destination case. Every view must carry exactly one
/// destination.
std::optional<FlowChoice> select_flow_unicast(std::span<const FlowView> flows);

/// Link rate times penalized positive backlog differential.
double spectrum_utility(double rate, double score);

struct HopCandidate {
  NodeId neighbor = 0;
  ChannelIndex channel = 0;
  /// Link rate in packets per second.
  double rate = 0;
  FlowChoice choice;
};

struct Schedule {
  NodeId neighbor = 0;
  ChannelIndex channel = 0;
  FlowIndex flow = 0;
  double utility = 0;
  double rate = 0;
  std::vector<NodeId> served;
};

/// Highest-utility (neighbor, channel); ties go to the lower neighbor id,
/// then the lower channel index. None when the best utility is zero.
std::optional<Schedule> select_next_hop(std::span<const HopCandidate> candidates);

}  // namespace bpnc::bp
