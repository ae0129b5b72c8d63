#pragma once

#include <cstdint>
#include <vector>

#include "bpnc/common/rng.hpp"
#include "bpnc/gf/matrix.hpp"
#include "bpnc/rlnc/encoder.hpp"

namespace bpnc::rlnc {

struct Reordered {
  gf::SymbolMatrix matrix;
  /// matrix column c holds original column perm[c].
  std::vector<std::uint8_t> perm;
};

/// Encoder-side column reordering. Row r is reduced against the pivots of
/// rows 0..r-1; the earliest column >= r where the reduced row is nonzero is
/// swapped into position r. Every leading prefix of k independent rows then
/// has an invertible leading k x k block, so the decoder's pivots for packets
/// 1..k land on columns 1..k. Rows are never permuted.
Reordered precondition_reorder(const gf::FieldContext& field, const gf::SymbolMatrix& g);

/// True when the reduced form of the first k received rows [G_k | Y_k]
/// equals the decoder-ready form computed at the source from the original
/// data, (L^-1 G_k | L^-1 G_k X) with L the leading k x k block of G_k.
bool prefix_equivalent(const gf::FieldContext& field, const gf::SymbolMatrix& g, const gf::SymbolMatrix& y,
                       const gf::SymbolMatrix& x, std::size_t k);

struct PreconditionConfig {
  std::size_t blocks = 10'000;
  std::size_t block_size = 4;
  std::size_t packet_len = 32;
  CoefficientMode sampling = CoefficientMode::RankIncreasing;
  std::uint64_t seed = 1;
};

struct PreconditionReport {
  PreconditionConfig config;
  /// Fraction of blocks whose k-packet prefix is equivalent, k = 1..h.
  std::vector<double> before;
  std::vector<double> after;
};

/// Equivalence of partially received coded blocks with their source-side
/// simplified versions, with and without encoder column reordering.
PreconditionReport run_precondition_experiment(const gf::FieldContext& field, const PreconditionConfig& config);

}  // namespace bpnc::rlnc
