#include "bpnc/rlnc/precondition.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace bpnc::rlnc {

Reordered precondition_reorder(const gf::FieldContext& field, const gf::SymbolMatrix& g) {
  if (g.empty()) throw std::invalid_argument("precondition_reorder needs a non-empty matrix");
  if (g.cols() > 255) throw std::invalid_argument("at most 255 columns");

  Reordered out{g, std::vector<std::uint8_t>(g.cols())};
  std::iota(out.perm.begin(), out.perm.end(), std::uint8_t{0});

  // basis[i] is reduced and normalized with its pivot at column i.
  std::vector<std::vector<Symbol>> basis;
  for (std::size_t r = 0; r < g.rows() && basis.size() < g.cols(); ++r) {
    auto row = std::vector<Symbol>(out.matrix.row(r).begin(), out.matrix.row(r).end());
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (row[i] != 0) field.axpy(row[i], basis[i], row);
    }
    const std::size_t target = basis.size();
    std::size_t c = target;
    while (c < row.size() && row[c] == 0) ++c;
    if (c == row.size()) continue;  // dependent row, nothing to align

    out.matrix.swap_cols(target, c);
    std::swap(out.perm[target], out.perm[c]);
    std::swap(row[target], row[c]);
    for (auto& b : basis) std::swap(b[target], b[c]);

    field.scale(field.inv(row[target]), row);
    for (auto& b : basis) {
      if (b[target] != 0) field.axpy(b[target], row, b);
    }
    basis.push_back(std::move(row));
  }
  return out;
}

bool prefix_equivalent(const gf::FieldContext& field, const gf::SymbolMatrix& g, const gf::SymbolMatrix& y,
                       const gf::SymbolMatrix& x, std::size_t k) {
  const std::size_t h = g.cols();
  const std::size_t n = y.cols();

  // Decoder side: Gaussian elimination on the received augmented prefix.
  gf::SymbolMatrix received(k, h + n);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < h; ++c) received.at(r, c) = g.at(r, c);
    for (std::size_t c = 0; c < n; ++c) received.at(r, h + c) = y.at(r, c);
  }
  const gf::Elimination normal = gaussian_eliminate(field, received, h);

  // Source side: simplified rows built from the original data.
  const gf::SymbolMatrix gk = g.row_range(0, k);
  const auto lead_inv = invert(field, gk.col_range(0, k));
  if (!lead_inv) return false;
  const gf::SymbolMatrix reduced = multiply(field, *lead_inv, gk);
  const gf::SymbolMatrix simplified = multiply(field, reduced, x);

  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < h; ++c) {
      if (normal.rref.at(r, c) != reduced.at(r, c)) return false;
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (normal.rref.at(r, h + c) != simplified.at(r, c)) return false;
    }
  }
  return true;
}

PreconditionReport run_precondition_experiment(const gf::FieldContext& field, const PreconditionConfig& config) {
  const std::size_t h = config.block_size;
  if (h == 0 || config.blocks == 0) throw std::invalid_argument("empty precondition experiment");
  PreconditionReport report{config, std::vector<double>(h, 0.0), std::vector<double>(h, 0.0)};
  std::vector<std::size_t> ok_before(h, 0), ok_after(h, 0);

  Rng rng(config.seed);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    gf::SymbolMatrix x(h, config.packet_len);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < config.packet_len; ++c) x.at(r, c) = static_cast<Symbol>(rng.below(field.size()));
    }
    TagSampler sampler(field, h, config.sampling);
    gf::SymbolMatrix g(0, h);
    for (std::size_t r = 0; r < h; ++r) g.append_row(sampler.next(rng));
    const gf::SymbolMatrix y = multiply(field, g, x);

    const Reordered re = precondition_reorder(field, g);
    gf::SymbolMatrix x_perm(h, config.packet_len);
    for (std::size_t c = 0; c < h; ++c) {
      for (std::size_t l = 0; l < config.packet_len; ++l) x_perm.at(c, l) = x.at(re.perm[c], l);
    }

    for (std::size_t k = 1; k <= h; ++k) {
      ok_before[k - 1] += prefix_equivalent(field, g, y, x, k);
      ok_after[k - 1] += prefix_equivalent(field, re.matrix, y, x_perm, k);
    }
  }
  for (std::size_t k = 0; k < h; ++k) {
    report.before[k] = static_cast<double>(ok_before[k]) / static_cast<double>(config.blocks);
    report.after[k] = static_cast<double>(ok_after[k]) / static_cast<double>(config.blocks);
  }
  return report;
}

}  // namespace bpnc::rlnc
