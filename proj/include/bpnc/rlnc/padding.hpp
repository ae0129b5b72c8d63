#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace bpnc::rlnc {

using Bytes = std::vector<std::uint8_t>;
/// One block of `block_size` equal-length packets.
using PacketGroup = std::vector<Bytes>;

constexpr std::uint8_t kPadMarker = 0x80;

class PaddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits `data` into packets of `packet_len` bytes grouped `block_size` at a
/// time, terminating the data with ISO/IEC 7816-4 padding (one 0x80 marker,
/// then zeros). The marker is always written, so when the data exactly
/// fills its last packet a further packet starting with 0x80 is added. The
/// last group is completed with all-zero packets.
std::vector<PacketGroup> pad_block(std::span<const std::uint8_t> data, std::size_t packet_len,
                                   std::size_t block_size);

/// Concatenates the groups and strips the padding. Throws PaddingError if
/// no marker terminates the data.
Bytes unpad(const std::vector<PacketGroup>& groups);
Bytes unpad(std::span<const std::uint8_t> padded);

}  // namespace bpnc::rlnc
