#include "bpnc/protocol/control.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bpnc::protocol {

bool beats(std::uint32_t ua, NodeId a, std::uint32_t ub, NodeId b) { return ua > ub || (ua == ub && a < b); }

Resolution resolve_conflicts(const ResolverInput& in) {
  // Latest RTS per transmitter on this channel.
  std::map<NodeId, RtsFrame> latest;
  for (const auto& r : in.heard) {
    if (r.channel != in.channel || r.tx == in.self) continue;
    latest[r.tx] = r;
  }

  std::optional<RtsFrame> best;
  for (const auto& [tx, r] : latest) {
    if (r.rx != in.self) continue;
    if (!best || beats(r.utility_q16, r.tx, best->utility_q16, best->tx)) best = r;
  }
  if (!best) return {};

  if (in.own_utility && beats(*in.own_utility, in.self, best->utility_q16, best->tx))
    return {Verdict::Transmit, std::nullopt};

  for (const auto& [tx, r] : latest) {
    if (r.rx == in.self || tx == best->tx) continue;
    const bool requester_hears = in.hears ? in.hears(best->tx, tx) : false;
    if (!requester_hears && beats(r.utility_q16, tx, best->utility_q16, best->tx))
      return {Verdict::YieldHidden, std::nullopt};
  }
  return {Verdict::Grant, best->tx};
}

double update_power(double power_mw, double target_snr, double achieved_snr, double min_mw, double max_mw) {
  if (min_mw > max_mw) throw std::invalid_argument("power range is empty");
  if (!(achieved_snr > 0)) return max_mw;
  return std::clamp(power_mw * target_snr / achieved_snr, min_mw, max_mw);
}

ChannelIndex hop_next_channel(ChannelIndex current, std::size_t channel_count, Rng& rng) {
  if (channel_count == 0) throw std::invalid_argument("no channels");
  if (channel_count == 1) return 0;
  auto pick = static_cast<ChannelIndex>(rng.below(channel_count - 1));
  if (pick >= current) ++pick;
  return pick;
}

bool channel_busy(double sensed_mw, double noise_mw, double threshold_db) {
  return sensed_mw > noise_mw * std::pow(10.0, threshold_db / 10.0);
}

}  // namespace bpnc::protocol
