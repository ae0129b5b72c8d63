#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bpnc/common/types.hpp"
#include "bpnc/gf/matrix.hpp"

namespace bpnc::rlnc {

using gf::Symbol;
using gf::SymbolMatrix;

/// A network-coded packet: payload = tag . (source rows of generation gen_id).
struct CodedPacket {
  FlowIndex flow = 0;
  std::uint16_t gen_id = 0;
  /// Encoding vector, one coefficient per source packet of the generation.
  std::vector<Symbol> tag;
  std::vector<Symbol> payload;
  /// Column permutation applied by the encoder; perm[c] is the source index
  /// carried by tag column c. Empty means identity.
  std::vector<std::uint8_t> perm;

  friend bool operator==(const CodedPacket&, const CodedPacket&) = default;
};

/// Source-side block of h packets of N symbols each.
class Generation {
 public:
  Generation(std::uint16_t gen_id, std::size_t block_size, std::size_t packet_len)
      : gen_id_(gen_id), block_size_(block_size), packet_len_(packet_len), sources_(0, packet_len) {}

  std::uint16_t id() const { return gen_id_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t packet_len() const { return packet_len_; }
  std::size_t size() const { return sources_.rows(); }
  bool complete() const { return sources_.rows() == block_size_; }

  void add_source(std::span<const Symbol> row) {
    if (complete()) throw std::logic_error("generation already holds block_size packets");
    if (row.size() != packet_len_) throw std::invalid_argument("source packet length mismatch");
    sources_.append_row(row);
  }

  const SymbolMatrix& sources() const { return sources_; }
  std::span<const Symbol> source(std::size_t i) const { return sources_.row(i); }

 private:
  std::uint16_t gen_id_;
  std::size_t block_size_;
  std::size_t packet_len_;
  SymbolMatrix sources_;
};

}  // namespace bpnc::rlnc
