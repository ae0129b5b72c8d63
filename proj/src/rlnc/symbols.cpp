#include "bpnc/rlnc/symbols.hpp"

#include <stdexcept>

namespace bpnc::rlnc {

std::size_t symbol_count(std::size_t bytes, int bits) {
  return (8 * bytes + static_cast<std::size_t>(bits) - 1) / static_cast<std::size_t>(bits);
}

std::size_t packed_size(std::size_t symbols, int bits) {
  return (symbols * static_cast<std::size_t>(bits) + 7) / 8;
}

std::vector<Symbol> unpack(std::span<const std::uint8_t> bytes, int bits, std::size_t count) {
  if (symbol_count(bytes.size(), bits) < count) throw std::invalid_argument("not enough bytes to unpack");
  std::vector<Symbol> out;
  out.reserve(count);
  const unsigned mask = (1u << bits) - 1;
  std::uint32_t acc = 0;
  int have = 0;
  std::size_t pos = 0;
  while (out.size() < count) {
    while (have < bits) {
      acc = (acc << 8) | (pos < bytes.size() ? bytes[pos] : 0u);
      ++pos;
      have += 8;
    }
    out.push_back(static_cast<Symbol>((acc >> (have - bits)) & mask));
    have -= bits;
    acc &= (1u << have) - 1;
  }
  return out;
}

std::vector<std::uint8_t> pack(std::span<const Symbol> symbols, int bits) {
  std::vector<std::uint8_t> out;
  out.reserve(packed_size(symbols.size(), bits));
  const unsigned mask = (1u << bits) - 1;
  std::uint32_t acc = 0;
  int have = 0;
  for (Symbol s : symbols) {
    acc = (acc << bits) | (s & mask);
    have += bits;
    while (have >= 8) {
      out.push_back(static_cast<std::uint8_t>(acc >> (have - 8)));
      have -= 8;
      acc &= (1u << have) - 1;
    }
  }
  if (have > 0) out.push_back(static_cast<std::uint8_t>(acc << (8 - have)));
  return out;
}

std::vector<Symbol> to_symbols(std::span<const std::uint8_t> bytes, int bits) {
  return unpack(bytes, bits, symbol_count(bytes.size(), bits));
}

std::vector<std::uint8_t> from_symbols(std::span<const Symbol> symbols, int bits, std::size_t bytes) {
  auto out = pack(symbols, bits);
  out.resize(bytes, 0);
  return out;
}

}  // namespace bpnc::rlnc
