#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bpnc/common/rng.hpp"
#include "bpnc/gf/matrix.hpp"
#include "bpnc/rlnc/packet.hpp"

namespace bpnc::rlnc {

/// How encoding vectors are drawn for a generation.
enum class CoefficientMode {
  /// Uniform over GF(2^m)^h, all-zero rows rejected.
  Uniform,
  /// The first h rows each raise the rank of the rows drawn so far.
  RankIncreasing,
  /// The first h rows are unit vectors (source packets sent in the clear).
  Systematic,
  /// Row t < h combines source packets 0..t only, with a nonzero coefficient
  /// on packet t: what a source can send while packets are still arriving.
  Causal,
};

std::string_view to_string(CoefficientMode mode);
std::optional<CoefficientMode> parse_coefficient_mode(std::string_view name);

/// Draws successive encoding vectors for one generation.
class TagSampler {
 public:
  TagSampler(const gf::FieldContext& field, std::size_t block_size, CoefficientMode mode);

  /// Next encoding vector; never all-zero.
  std::vector<Symbol> next(Rng& rng);
  /// Number of source packets the next vector may touch (Causal mode only
  /// restricts this before the generation is complete).
  std::size_t sources_needed() const;
  std::size_t drawn() const { return drawn_; }

 private:
  std::vector<Symbol> uniform_nonzero(Rng& rng, std::size_t width);
  bool raises_rank(std::span<const Symbol> row) const;
  void absorb(std::span<const Symbol> row);

  const gf::FieldContext* field_;
  std::size_t block_size_;
  CoefficientMode mode_;
  std::size_t drawn_ = 0;
  // Echelon basis of drawn rows, used by RankIncreasing.
  std::vector<std::vector<Symbol>> basis_;
  std::vector<std::size_t> basis_pivot_;
};

/// payload = tag . sources, with tag applied to the first tag.size() rows.
CodedPacket encode_with(const gf::FieldContext& field, const Generation& gen, std::span<const Symbol> tag,
                        FlowIndex flow = 0);

/// `count` coded packets with fresh random encoding vectors.
std::vector<CodedPacket> encode_generation(const gf::FieldContext& field, const Generation& gen, std::size_t count,
                                           Rng& rng, CoefficientMode mode = CoefficientMode::Uniform,
                                           FlowIndex flow = 0);

/// Same random combination applied to the tags and payloads of `buffered`.
CodedPacket recode_with(const gf::FieldContext& field, std::span<const CodedPacket> buffered,
                        std::span<const Symbol> coefficients);

/// Random nonzero-tag recombination of buffered packets of one generation.
CodedPacket recode(const gf::FieldContext& field, std::span<const CodedPacket> buffered, Rng& rng);

}  // namespace bpnc::rlnc
