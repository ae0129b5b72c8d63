#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bpnc/gf/field.hpp"

namespace bpnc::rlnc {

using gf::Symbol;

/// Number of m-bit symbols needed to carry `bytes` bytes.
std::size_t symbol_count(std::size_t bytes, int bits);

/// Number of bytes needed to carry `symbols` m-bit symbols.
std::size_t packed_size(std::size_t symbols, int bits);

/// Splits a byte string into m-bit symbols, most significant bits first.
/// For m = 4 this is nibble order, high nibble first. The final symbol is
/// zero-extended when 8 * bytes is not a multiple of m.
std::vector<Symbol> to_symbols(std::span<const std::uint8_t> bytes, int bits);

/// Inverse of to_symbols; emits exactly `bytes` bytes.
std::vector<std::uint8_t> from_symbols(std::span<const Symbol> symbols, int bits, std::size_t bytes);

/// Packs symbols densely (m bits each, MSB first) into ceil(n*m/8) bytes.
std::vector<std::uint8_t> pack(std::span<const Symbol> symbols, int bits);

/// Unpacks `count` symbols from a dense m-bit encoding.
std::vector<Symbol> unpack(std::span<const std::uint8_t> bytes, int bits, std::size_t count);

}  // namespace bpnc::rlnc
