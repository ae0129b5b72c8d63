#include "bpnc/rlnc/padding.hpp"

namespace bpnc::rlnc {

std::vector<PacketGroup> pad_block(std::span<const std::uint8_t> data, std::size_t packet_len,
                                   std::size_t block_size) {
  if (packet_len == 0) throw std::invalid_argument("packet_len must be positive");
  if (block_size == 0) throw std::invalid_argument("block_size must be positive");

  Bytes stream(data.begin(), data.end());
  stream.push_back(kPadMarker);
  const std::size_t packets = (stream.size() + packet_len - 1) / packet_len;
  const std::size_t groups = (packets + block_size - 1) / block_size;
  stream.resize(groups * block_size * packet_len, 0);

  std::vector<PacketGroup> out(groups);
  auto it = stream.begin();
  for (auto& group : out) {
    group.reserve(block_size);
    for (std::size_t p = 0; p < block_size; ++p) {
      group.emplace_back(it, it + static_cast<std::ptrdiff_t>(packet_len));
      it += static_cast<std::ptrdiff_t>(packet_len);
    }
  }
  return out;
}

Bytes unpad(std::span<const std::uint8_t> padded) {
  std::size_t end = padded.size();
  while (end > 0 && padded[end - 1] == 0) --end;
  if (end == 0 || padded[end - 1] != kPadMarker) throw PaddingError("missing 0x80 padding marker");
  return Bytes(padded.begin(), padded.begin() + static_cast<std::ptrdiff_t>(end - 1));
}

Bytes unpad(const std::vector<PacketGroup>& groups) {
  Bytes stream;
  for (const auto& g : groups) {
    for (const auto& p : g) stream.insert(stream.end(), p.begin(), p.end());
  }
  return unpad(std::span<const std::uint8_t>(stream));
}

}  // namespace bpnc::rlnc
