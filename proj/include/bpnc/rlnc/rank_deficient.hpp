#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bpnc/gf/matrix.hpp"
#include "bpnc/rlnc/decoder.hpp"

namespace bpnc::rlnc {

enum class Confidence : std::uint8_t { Undecoded, Heuristic, Certain };

/// Picks one point of the affine set { base + sum_f v_f * dir_f } of
/// solutions for a single payload column.
class UnderdeterminedResolver {
 public:
  virtual ~UnderdeterminedResolver() = default;
  /// Largest number of free variables the resolver will attempt.
  virtual std::size_t max_free() const = 0;
  /// Writes the chosen solution into `out` (length h). `evaluated` counts
  /// candidate solutions examined.
  virtual void resolve(const gf::FieldContext& field, std::span<const Symbol> base,
                       const std::vector<std::vector<Symbol>>& directions, std::span<Symbol> out,
                       std::uint64_t& evaluated) const = 0;
};

/// Exhaustive search for the minimum-Hamming-weight solution. Ties keep the
/// first candidate in enumeration order (free values counted up from zero).
/// Stands in for the lowest-weight decoder; cost is q^T per column.
class MinWeightSearch final : public UnderdeterminedResolver {
 public:
  explicit MinWeightSearch(std::size_t max_free = 2) : max_free_(max_free) {}
  std::size_t max_free() const override { return max_free_; }
  void resolve(const gf::FieldContext& field, std::span<const Symbol> base,
               const std::vector<std::vector<Symbol>>& directions, std::span<Symbol> out,
               std::uint64_t& evaluated) const override;

 private:
  std::size_t max_free_;
};

struct RankDeficientResult {
  /// h x N estimate of the source rows, original source order.
  gf::SymbolMatrix estimate;
  /// Row-major h x N confidence per symbol.
  std::vector<Confidence> confidence;
  std::size_t certain = 0;
  std::size_t heuristic = 0;
  std::size_t undecoded = 0;
  std::size_t free_variables = 0;
  std::uint64_t candidates_evaluated = 0;

  Confidence at(std::size_t row, std::size_t col) const { return confidence[row * estimate.cols() + col]; }
};

/// Column-wise solve of V_l = G W_l over the decoder's reduced rows.
/// Symbols fixed by the current rank are Certain (these coincide with the
/// rows earliest decoding has emitted); the rest are resolved by `resolver`
/// when the free-variable count is within its limit, else Undecoded.
RankDeficientResult rank_deficient_solve(const Decoder& state, const UnderdeterminedResolver& resolver);
RankDeficientResult rank_deficient_solve(const Decoder& state, std::size_t max_free = 2);

}  // namespace bpnc::rlnc
