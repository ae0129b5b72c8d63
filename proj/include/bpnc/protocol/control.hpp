#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bpnc/common/rng.hpp"
#include "bpnc/common/types.hpp"
#include "bpnc/protocol/wire.hpp"

namespace bpnc::protocol {

/// Everything a receiver knows when it answers RTS requests on one channel.
struct ResolverInput {
  NodeId self = 0;
  ChannelIndex channel = 0;
  /// Utility of the node's own pending RTS on this channel, if it has one.
  std::optional<std::uint32_t> own_utility;
  /// Every RTS heard on the channel during the collection window, whether
  /// addressed to this node or overheard.
  std::vector<RtsFrame> heard;
  /// hears(a, b): node a is known to hear node b (from DIS neighbor lists).
  std::function<bool(NodeId, NodeId)> hears;
};

enum class Verdict {
  /// No RTS addressed to this node.
  NoRequest,
  /// CTS goes to `winner`.
  Grant,
  /// The node's own transmission beats every request (half-duplex).
  Transmit,
  /// A higher-utility transmission the requester cannot hear would collide
  /// here (hidden node); stay silent.
  YieldHidden,
};

struct Resolution {
  Verdict verdict = Verdict::NoRequest;
  std::optional<NodeId> winner;
};

/// a beats b: higher utility, ties to the lower node id.
bool beats(std::uint32_t ua, NodeId a, std::uint32_t ub, NodeId b);

/// Local conflict resolution: depends only on the frames in `in`.
Resolution resolve_conflicts(const ResolverInput& in);

/// P(t+1) = P(t) * target / achieved, clamped to [min, max] (mW). With no
/// measurable signal the node goes to full power.
double update_power(double power_mw, double target_snr, double achieved_snr, double min_mw, double max_mw);

/// Uniformly random channel other than `current` (the only channel when
/// there is one).
ChannelIndex hop_next_channel(ChannelIndex current, std::size_t channel_count, Rng& rng);

/// Busy when the sensed power exceeds noise by `threshold_db`.
bool channel_busy(double sensed_mw, double noise_mw, double threshold_db);

}  // namespace bpnc::protocol
