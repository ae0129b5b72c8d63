#include "bpnc/gf/matrix.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpnc::gf {

SymbolMatrix::SymbolMatrix(std::initializer_list<std::initializer_list<unsigned>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix literal");
    for (unsigned v : r) data_.push_back(static_cast<Symbol>(v));
  }
}

SymbolMatrix SymbolMatrix::identity(std::size_t n) {
  SymbolMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

void SymbolMatrix::append_row(std::span<const Symbol> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw std::invalid_argument("row length mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void SymbolMatrix::swap_rows(std::size_t a, std::size_t b) {
  if (a == b) return;
  std::swap_ranges(data_.begin() + static_cast<std::ptrdiff_t>(a * cols_),
                   data_.begin() + static_cast<std::ptrdiff_t>((a + 1) * cols_),
                   data_.begin() + static_cast<std::ptrdiff_t>(b * cols_));
}

void SymbolMatrix::swap_cols(std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t r = 0; r < rows_; ++r) std::swap(at(r, a), at(r, b));
}

SymbolMatrix SymbolMatrix::row_range(std::size_t begin, std::size_t end) const {
  SymbolMatrix out(end - begin, cols_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), out.data_.begin());
  return out;
}

SymbolMatrix SymbolMatrix::col_range(std::size_t begin, std::size_t end) const {
  SymbolMatrix out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = begin; c < end; ++c) out.at(r, c - begin) = at(r, c);
  }
  return out;
}

bool SymbolMatrix::valid_for(const FieldContext& field) const {
  return std::all_of(data_.begin(), data_.end(), [&](Symbol s) { return field.contains(s); });
}

Elimination gaussian_eliminate(const FieldContext& field, const SymbolMatrix& m,
                               std::optional<std::size_t> max_pivot_col) {
  Elimination out{m, 0, {}};
  SymbolMatrix& a = out.rref;
  const std::size_t pivot_limit = std::min(max_pivot_col.value_or(a.cols()), a.cols());

  std::size_t r = 0;
  for (std::size_t c = 0; c < pivot_limit && r < a.rows(); ++c) {
    std::size_t p = r;
    while (p < a.rows() && a.at(p, c) == 0) ++p;
    if (p == a.rows()) continue;
    a.swap_rows(r, p);
    field.scale(field.inv(a.at(r, c)), a.row(r));
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (i != r && a.at(i, c) != 0) field.axpy(a.at(i, c), a.row(r), a.row(i));
    }
    out.pivot_cols.push_back(c);
    ++r;
  }
  out.rank = r;
  return out;
}

std::size_t rank(const FieldContext& field, const SymbolMatrix& m) {
  return gaussian_eliminate(field, m).rank;
}

std::optional<SymbolMatrix> invert(const FieldContext& field, const SymbolMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("invert requires a square matrix");
  const std::size_t n = m.rows();
  SymbolMatrix aug(n, 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) aug.at(r, c) = m.at(r, c);
    aug.at(r, n + r) = 1;
  }
  const Elimination e = gaussian_eliminate(field, aug, n);
  if (e.rank < n) return std::nullopt;
  return e.rref.col_range(n, 2 * n);
}

SymbolMatrix multiply(const FieldContext& field, const SymbolMatrix& a, const SymbolMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("dimension mismatch in multiply");
  SymbolMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) field.axpy(a.at(i, k), b.row(k), out.row(i));
  }
  return out;
}

std::vector<Symbol> multiply(const FieldContext& field, std::span<const Symbol> v, const SymbolMatrix& m) {
  if (v.size() != m.rows()) throw std::invalid_argument("dimension mismatch in multiply");
  std::vector<Symbol> out(m.cols(), 0);
  for (std::size_t k = 0; k < v.size(); ++k) field.axpy(v[k], m.row(k), out);
  return out;
}

}  // namespace bpnc::gf
