#include "bpnc/rlnc/decoder.hpp"

#include <algorithm>
#include <numeric>

namespace bpnc::rlnc {

std::string_view to_string(DecodeMode mode) {
  return mode == DecodeMode::RankDeficient ? "rankdef" : "full";
}

std::optional<DecodeMode> parse_decode_mode(std::string_view name) {
  if (name == "full") return DecodeMode::FullRankEarliest;
  if (name == "rankdef") return DecodeMode::RankDeficient;
  return std::nullopt;
}

Decoder::Decoder(const gf::FieldContext& field, std::size_t block_size, std::size_t packet_len,
                 std::uint16_t gen_id, DecodeMode mode)
    : field_(&field),
      block_size_(block_size),
      packet_len_(packet_len),
      gen_id_(gen_id),
      mode_(mode),
      perm_(block_size),
      decoded_(block_size, false),
      delivered_(block_size) {
  if (block_size == 0 || block_size > 255) throw std::invalid_argument("block_size must be in 1..255");
  std::iota(perm_.begin(), perm_.end(), std::uint8_t{0});
}

std::size_t Decoder::decoded_count() const {
  return static_cast<std::size_t>(std::count(decoded_.begin(), decoded_.end(), true));
}

std::optional<std::vector<Symbol>> Decoder::delivered(std::size_t source_index) const {
  if (!decoded_[source_index]) return std::nullopt;
  return delivered_[source_index];
}

gf::SymbolMatrix Decoder::accumulated() const {
  gf::SymbolMatrix m(0, block_size_ + packet_len_);
  for (const auto& r : rows_) m.append_row(r);
  return m;
}

bool Decoder::tag_is_unit(std::size_t row) const {
  const auto& r = rows_[row];
  for (std::size_t c = 0; c < block_size_; ++c) {
    if (c != pivots_[row] && r[c] != 0) return false;
  }
  return true;
}

std::vector<DecodedPacket> Decoder::ingest(const CodedPacket& pkt) {
  if (pkt.tag.size() != block_size_) {
    throw TagLengthMismatch("tag has " + std::to_string(pkt.tag.size()) + " symbols, generation block size is " +
                            std::to_string(block_size_));
  }
  if (pkt.payload.size() != packet_len_) {
    throw TagLengthMismatch("payload has " + std::to_string(pkt.payload.size()) + " symbols, expected " +
                            std::to_string(packet_len_));
  }
  if (pkt.gen_id != gen_id_) throw std::invalid_argument("packet belongs to another generation");
  if (!pkt.perm.empty()) {
    if (pkt.perm.size() != block_size_) throw TagLengthMismatch("permutation length differs from block size");
    if (!perm_set_) {
      perm_ = pkt.perm;
      perm_set_ = true;
    } else if (perm_ != pkt.perm) {
      throw std::invalid_argument("packet permutation differs within a generation");
    }
  }
  ++received_;

  std::vector<Symbol> row(block_size_ + packet_len_);
  std::copy(pkt.tag.begin(), pkt.tag.end(), row.begin());
  std::copy(pkt.payload.begin(), pkt.payload.end(), row.begin() + static_cast<std::ptrdiff_t>(block_size_));

  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const Symbol c = row[pivots_[i]];
    if (c != 0) field_->axpy(c, rows_[i], row);
  }
  const auto tag_end = row.begin() + static_cast<std::ptrdiff_t>(block_size_);
  const auto lead = std::find_if(row.begin(), tag_end, [](Symbol s) { return s != 0; });
  if (lead == tag_end) return {};  // no new information

  const auto pivot = static_cast<std::size_t>(lead - row.begin());
  field_->scale(field_->inv(*lead), row);
  for (auto& r : rows_) {
    if (r[pivot] != 0) field_->axpy(r[pivot], row, r);
  }
  const auto pos = static_cast<std::size_t>(std::lower_bound(pivots_.begin(), pivots_.end(), pivot) - pivots_.begin());
  rows_.insert(rows_.begin() + static_cast<std::ptrdiff_t>(pos), std::move(row));
  pivots_.insert(pivots_.begin() + static_cast<std::ptrdiff_t>(pos), pivot);

  std::vector<DecodedPacket> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const std::size_t src = perm_[pivots_[i]];
    if (decoded_[src] || !tag_is_unit(i)) continue;
    decoded_[src] = true;
    delivered_[src].assign(rows_[i].begin() + static_cast<std::ptrdiff_t>(block_size_), rows_[i].end());
    out.push_back({src, delivered_[src]});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

}  // namespace bpnc::rlnc
