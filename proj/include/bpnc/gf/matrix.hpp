#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "bpnc/gf/field.hpp"

namespace bpnc::gf {

/// Dense row-major matrix of field symbols.
class SymbolMatrix {
 public:
  SymbolMatrix() = default;
  SymbolMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  SymbolMatrix(std::initializer_list<std::initializer_list<unsigned>> rows);

  static SymbolMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  Symbol& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Symbol at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Symbol> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Symbol> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const Symbol> values);
  void swap_rows(std::size_t a, std::size_t b);
  void swap_cols(std::size_t a, std::size_t b);

  /// Rows [begin, end) as a new matrix.
  SymbolMatrix row_range(std::size_t begin, std::size_t end) const;
  /// Columns [begin, end) as a new matrix.
  SymbolMatrix col_range(std::size_t begin, std::size_t end) const;

  /// True when every symbol is a valid element of `field`.
  bool valid_for(const FieldContext& field) const;

  const std::vector<Symbol>& data() const { return data_; }

  friend bool operator==(const SymbolMatrix&, const SymbolMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Symbol> data_;
};

struct Elimination {
  SymbolMatrix rref;
  std::size_t rank = 0;
  std::vector<std::size_t> pivot_cols;
};

/// Reduced row-echelon form. Nonzero rows come first, each with a unit
/// pivot that is the only nonzero entry in its column.
///
/// `max_pivot_col` limits pivot search to the leading columns; the
/// remaining columns are carried along as an augmented block.
Elimination gaussian_eliminate(const FieldContext& field, const SymbolMatrix& m,
                               std::optional<std::size_t> max_pivot_col = std::nullopt);

std::size_t rank(const FieldContext& field, const SymbolMatrix& m);

/// Inverse of a square matrix; std::nullopt when singular (rank < n).
std::optional<SymbolMatrix> invert(const FieldContext& field, const SymbolMatrix& m);

SymbolMatrix multiply(const FieldContext& field, const SymbolMatrix& a, const SymbolMatrix& b);

/// Row vector times matrix.
std::vector<Symbol> multiply(const FieldContext& field, std::span<const Symbol> v, const SymbolMatrix& m);

}  // namespace bpnc::gf
