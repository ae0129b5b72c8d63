#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpnc/channel/phy.hpp"
#include "bpnc/common/rng.hpp"
#include "bpnc/common/types.hpp"
#include "bpnc/rlnc/decoder.hpp"
#include "bpnc/rlnc/encoder.hpp"

namespace bpnc::channel {

/// Path gain between two nodes. channel < 0 applies the gain on every
/// channel; a per-channel entry overrides it.
struct Link {
  NodeId a = 0;
  NodeId b = 0;
  int channel = -1;
  double gain_db = 0;
};

struct TopologyConfig {
  /// Nodes are numbered 1..nodes.
  std::size_t nodes = 0;
  /// Center frequencies; only the count matters to the models.
  std::vector<double> channels_ghz{2.41, 2.43, 2.46};
  std::vector<Link> links;
  /// When set, a link a-b also defines b-a unless b-a is listed itself.
  bool symmetric = true;
  double noise_dbm = -90.0;
  /// Static log-normal shadowing per link and channel; 0 disables it.
  double shadowing_sigma_db = 0.0;
};

struct RadioConfig {
  double power_min_dbm = -15.0;
  double power_max_dbm = -5.0;
  /// Power used for control frames and for the initial data power.
  double nominal_power_dbm = -10.0;
  double target_snr_db = 20.0;
  /// Listening power as a fraction of the maximum transmit power.
  double listen_power_fraction = 0.1;
  /// Frames arriving below this SNR are not detected at all.
  double sensitivity_snr_db = 3.0;
  /// A sensed channel is busy when it reads this far above the noise floor.
  double busy_threshold_db = 6.0;
  OfdmParams ofdm;
  /// Extra independent loss applied to DATA frames only.
  double frame_loss = 0.0;
  bool sensing = true;
  bool power_control = true;
};

struct TimingConfig {
  /// Time spent on one channel while hopping.
  double dwell_s = 2.0;
  /// Channels visited during discovery; 0 means one visit per channel.
  std::size_t discovery_visits = 0;
  /// Length of the flow-update phase.
  double syn_duration_s = 20.0;
  /// Spacing of SYN broadcasts while in flow update.
  double syn_interval_s = 2.0;
  /// Longest wait for a CTS.
  double tdt_s = 60.0;
  double data_s = 30.0;
  double rts_interval_s = 0.5;
  /// How long a receiver collects competing RTS before answering.
  double rts_window_s = 0.6;
  /// A receiver leaves the data phase after this long without DATA; 0 keeps
  /// it for the whole phase.
  double data_idle_s = 0.0;
  /// Neighbors not heard for staleness_factor * TTR are dropped.
  double staleness_factor = 3.0;
  /// Discovery is repeated this often; 0 disables repetition.
  double rediscovery_interval_s = 600.0;
  double sample_interval_s = 1.0;
  /// Gap between back-to-back DATA frames.
  double frame_gap_s = 0.0002;

  /// Discovery length for a given channel count.
  double ttr_s(std::size_t channel_count) const;
};

struct FlowConfig {
  NodeId source = 0;
  std::vector<NodeId> destinations;
  /// Poisson arrivals, packets per second.
  double arrival_rate = 1.0;
  /// Keep the source queue topped up instead of drawing arrivals.
  bool saturated = false;
  /// Uncoded flows use one-packet generations with unit coefficients.
  bool coded = false;
};

struct CodingConfig {
  std::size_t block_size = 4;
  int field_bits = 4;
  rlnc::DecodeMode decoder = rlnc::DecodeMode::FullRankEarliest;
  /// Dense extra packets a source adds to each completed generation.
  std::size_t redundancy = 1;
  std::size_t payload_bytes = 480;
  /// Processing delay per coded packet, per coefficient and payload symbol.
  double coding_cost_us = 0.0;
  /// Free-variable limit of the minimum-weight search.
  std::size_t max_free = 2;
  /// Generations per destination that feed the accuracy-vs-received curve.
  std::size_t accuracy_generations = 40;
};

struct Scenario {
  std::string name = "custom";
  TopologyConfig topology;
  RadioConfig radio;
  TimingConfig timing;
  std::vector<FlowConfig> flows;
  CodingConfig coding;
  std::uint64_t seed = 1;
  double duration_s = 600.0;
  /// Backlog kept at saturated sources.
  std::size_t saturation_backlog = 400;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Bytes of a DATA frame for the given generation size.
  std::size_t data_frame_bytes(std::size_t block_size) const;
  std::size_t block_size_of(std::size_t flow) const;
};

/// Frozen builtin names: line7, ring7, grid6, butterfly7.
std::vector<std::string> builtin_names();
/// Throws ConfigError for an unknown name.
Scenario builtin(std::string_view name);

Scenario parse_scenario(std::string_view json_text);
std::string dump_scenario(const Scenario& s);
Scenario load_scenario(const std::string& path);

/// Settable scalar keys, for command-line overrides and sweeps.
struct OverrideKey {
  std::string name;
  std::string help;
};
const std::vector<OverrideKey>& override_keys();
/// Sets one field from its textual value; throws ConfigError on an unknown
/// key or unparsable value.
void apply_override(Scenario& s, std::string_view key, std::string_view value);

/// Resolved per-(tx, rx, channel) gains with shadowing applied.
class GainTable {
 public:
  GainTable() = default;
  GainTable(const TopologyConfig& topo, std::uint64_t seed);

  std::optional<double> gain_db(NodeId tx, NodeId rx, ChannelIndex ch) const;
  /// Nodes with any link from `n`, ascending.
  std::vector<NodeId> neighbors(NodeId n) const;
  std::size_t nodes() const { return nodes_; }
  std::size_t channels() const { return channels_; }

 private:
  std::size_t index(NodeId tx, NodeId rx, ChannelIndex ch) const;

  std::size_t nodes_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> gain_;
  std::vector<bool> present_;
};

/// Standard normal variate from two uniforms.
double normal(Rng& rng);

}  // namespace bpnc::channel
