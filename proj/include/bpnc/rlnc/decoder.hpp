#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "bpnc/gf/matrix.hpp"
#include "bpnc/rlnc/packet.hpp"

namespace bpnc::rlnc {

enum class DecodeMode { FullRankEarliest, RankDeficient };

std::string_view to_string(DecodeMode mode);
std::optional<DecodeMode> parse_decode_mode(std::string_view name);

class TagLengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DecodedPacket {
  /// Source index within the generation (after undoing any permutation).
  std::size_t index = 0;
  std::vector<Symbol> payload;
};

/// Earliest decoder for one generation.
///
/// Keeps the received [tag | payload] rows in reduced row-echelon form.
/// After each ingest, any row whose tag part has become a unit vector
/// e_c yields source packet c; each packet is emitted exactly once.
class Decoder {
 public:
  Decoder(const gf::FieldContext& field, std::size_t block_size, std::size_t packet_len,
          std::uint16_t gen_id = 0, DecodeMode mode = DecodeMode::FullRankEarliest);

  /// Appends one packet and re-reduces. Linearly dependent packets change
  /// nothing and return an empty list. Throws TagLengthMismatch when the
  /// tag or payload shape does not match the generation.
  std::vector<DecodedPacket> ingest(const CodedPacket& pkt);

  DecodeMode mode() const { return mode_; }
  std::uint16_t gen_id() const { return gen_id_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t packet_len() const { return packet_len_; }
  std::size_t rank() const { return rows_.size(); }
  bool full_rank() const { return rank() == block_size_; }
  std::size_t received() const { return received_; }
  std::size_t decoded_count() const;

  /// decoded(i) refers to source index i (original order).
  bool decoded(std::size_t source_index) const { return decoded_[source_index]; }
  const std::vector<bool>& decoded_mask() const { return decoded_; }
  std::optional<std::vector<Symbol>> delivered(std::size_t source_index) const;

  /// Accumulated rows in reduced echelon form, rank x (h + N), ordered by
  /// pivot column. Columns are in tag (encoder) order.
  gf::SymbolMatrix accumulated() const;
  const std::vector<std::size_t>& pivots() const { return pivots_; }
  /// perm[c] = source index carried by tag column c.
  const std::vector<std::uint8_t>& permutation() const { return perm_; }

  const gf::FieldContext& field() const { return *field_; }

 private:
  bool tag_is_unit(std::size_t row) const;

  const gf::FieldContext* field_;
  std::size_t block_size_;
  std::size_t packet_len_;
  std::uint16_t gen_id_;
  DecodeMode mode_;
  std::size_t received_ = 0;
  std::vector<std::vector<Symbol>> rows_;
  std::vector<std::size_t> pivots_;
  std::vector<std::uint8_t> perm_;
  bool perm_set_ = false;
  std::vector<bool> decoded_;
  std::vector<std::vector<Symbol>> delivered_;
};

}  // namespace bpnc::rlnc
