#include "bpnc/rlnc/rank_deficient.hpp"

#include <limits>

namespace bpnc::rlnc {

void MinWeightSearch::resolve(const gf::FieldContext& field, std::span<const Symbol> base,
                              const std::vector<std::vector<Symbol>>& directions, std::span<Symbol> out,
                              std::uint64_t& evaluated) const {
  const std::size_t h = base.size();
  const std::size_t nfree = directions.size();

  // Only coordinates touched by some direction vary between candidates.
  std::vector<std::size_t> varying;
  for (std::size_t c = 0; c < h; ++c) {
    for (const auto& d : directions) {
      if (d[c] != 0) {
        varying.push_back(c);
        break;
      }
    }
  }

  std::uint64_t candidates = 1;
  for (std::size_t f = 0; f < nfree; ++f) candidates *= field.size();

  std::vector<Symbol> digits(nfree, 0);
  std::vector<Symbol> best_digits(nfree, 0);
  std::size_t best_weight = std::numeric_limits<std::size_t>::max();
  for (std::uint64_t k = 0; k < candidates; ++k) {
    std::uint64_t rem = k;
    for (std::size_t f = nfree; f-- > 0;) {
      digits[f] = static_cast<Symbol>(rem % field.size());
      rem /= field.size();
    }
    std::size_t weight = 0;
    for (std::size_t c : varying) {
      Symbol x = base[c];
      for (std::size_t f = 0; f < nfree; ++f) x ^= field.mul(digits[f], directions[f][c]);
      weight += x != 0;
    }
    ++evaluated;
    if (weight < best_weight) {
      best_weight = weight;
      best_digits = digits;
    }
  }

  for (std::size_t c = 0; c < h; ++c) out[c] = base[c];
  for (std::size_t c : varying) {
    for (std::size_t f = 0; f < nfree; ++f) out[c] ^= field.mul(best_digits[f], directions[f][c]);
  }
}

RankDeficientResult rank_deficient_solve(const Decoder& state, std::size_t max_free) {
  return rank_deficient_solve(state, MinWeightSearch(max_free));
}

RankDeficientResult rank_deficient_solve(const Decoder& state, const UnderdeterminedResolver& resolver) {
  const auto& field = state.field();
  const std::size_t h = state.block_size();
  const std::size_t n = state.packet_len();
  const gf::SymbolMatrix rows = state.accumulated();
  const auto& pivots = state.pivots();
  const auto& perm = state.permutation();

  std::vector<bool> is_pivot(h, false);
  for (std::size_t p : pivots) is_pivot[p] = true;
  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < h; ++c) {
    if (!is_pivot[c]) free_cols.push_back(c);
  }

  // Direction vectors of the solution space, in tag-column order.
  std::vector<std::vector<Symbol>> directions;
  for (std::size_t f : free_cols) {
    std::vector<Symbol> d(h, 0);
    d[f] = 1;
    for (std::size_t i = 0; i < rows.rows(); ++i) d[pivots[i]] = rows.at(i, f);
    directions.push_back(std::move(d));
  }
  std::vector<bool> fixed(h, false);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    bool clean = true;
    for (std::size_t f : free_cols) clean = clean && rows.at(i, f) == 0;
    fixed[pivots[i]] = clean;
  }

  RankDeficientResult res;
  res.estimate = gf::SymbolMatrix(h, n);
  res.confidence.assign(h * n, Confidence::Undecoded);
  res.free_variables = free_cols.size();
  const bool resolvable = free_cols.size() <= resolver.max_free();

  std::vector<Symbol> base(h), solution(h);
  for (std::size_t l = 0; l < n; ++l) {
    std::fill(base.begin(), base.end(), 0);
    for (std::size_t i = 0; i < rows.rows(); ++i) base[pivots[i]] = rows.at(i, h + l);
    if (free_cols.empty()) {
      solution = base;
    } else if (resolvable) {
      resolver.resolve(field, base, directions, solution, res.candidates_evaluated);
    } else {
      solution = base;
    }
    for (std::size_t c = 0; c < h; ++c) {
      const std::size_t src = perm[c];
      Confidence conf = Confidence::Undecoded;
      if (fixed[c]) {
        conf = Confidence::Certain;
      } else if (resolvable) {
        conf = Confidence::Heuristic;
      }
      res.estimate.at(src, l) = conf == Confidence::Undecoded ? 0 : solution[c];
      res.confidence[src * n + l] = conf;
    }
  }
  for (auto c : res.confidence) {
    if (c == Confidence::Certain) ++res.certain;
    else if (c == Confidence::Heuristic) ++res.heuristic;
    else ++res.undecoded;
  }
  return res;
}

}  // namespace bpnc::rlnc
