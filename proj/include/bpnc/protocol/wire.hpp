#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bpnc/common/types.hpp"
#include "bpnc/rlnc/packet.hpp"

namespace bpnc::protocol {

using Bytes = std::vector<std::uint8_t>;

enum class FrameType : std::uint8_t { Dis = 0x01, Syn = 0x02, Rts = 0x03, Cts = 0x04, Data = 0x05 };

std::string_view to_string(FrameType t);
bool is_control(FrameType t);

class MalformedFrame : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Type tag of a frame; throws MalformedFrame if empty or unknown.
FrameType frame_type(std::span<const std::uint8_t> frame);

struct DisNeighbor {
  NodeId id = 0;
  ChannelIndex channel = 0;
  /// Link SNR in dB at nominal power, carried as signed 8.8 fixed point.
  double snr_db = 0;
  friend bool operator==(const DisNeighbor&, const DisNeighbor&) = default;
};

struct DisFrame {
  NodeId sender = 0;
  ChannelIndex next_channel = 0;
  std::vector<DisNeighbor> neighbors;
  friend bool operator==(const DisFrame&, const DisFrame&) = default;
};

struct SynEntry {
  NodeId source = 0;
  std::vector<NodeId> destinations;
  std::uint16_t backlog = 0;
  friend bool operator==(const SynEntry&, const SynEntry&) = default;
};

struct SynFrame {
  NodeId sender = 0;
  std::vector<SynEntry> entries;
  friend bool operator==(const SynFrame&, const SynFrame&) = default;
};

struct RtsFrame {
  NodeId tx = 0;
  NodeId rx = 0;
  ChannelIndex channel = 0;
  FlowIndex flow = 0;
  /// Unsigned 16.16 fixed point on the wire.
  std::uint32_t utility_q16 = 0;
  friend bool operator==(const RtsFrame&, const RtsFrame&) = default;

  double utility() const { return static_cast<double>(utility_q16) / 65536.0; }
};

struct CtsFrame {
  NodeId rx = 0;
  NodeId tx = 0;
  ChannelIndex channel = 0;
  friend bool operator==(const CtsFrame&, const CtsFrame&) = default;
};

/// Utility quantized to 16.16, clamped to the representable range.
std::uint32_t quantize_utility(double u);

Bytes encode(const DisFrame& f);
Bytes encode(const SynFrame& f);
Bytes encode(const RtsFrame& f);
Bytes encode(const CtsFrame& f);

DisFrame decode_dis(std::span<const std::uint8_t> frame);
SynFrame decode_syn(std::span<const std::uint8_t> frame);
RtsFrame decode_rts(std::span<const std::uint8_t> frame);
CtsFrame decode_cts(std::span<const std::uint8_t> frame);

/// DATA = [05][flow][gen u16][h][perm x h][tag packed][payload packed].
/// An empty perm in the packet is written as the identity.
Bytes encode_data(const rlnc::CodedPacket& pkt, int field_bits);
/// `payload_symbols` is the configured packet length N.
rlnc::CodedPacket decode_data(std::span<const std::uint8_t> frame, int field_bits, std::size_t payload_symbols);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace bpnc::protocol
