#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bpnc::gf {

using Symbol = std::uint8_t;

/// Default reduction polynomials, indexed by bit-width. All are primitive.
/// m = 4 uses x^4 + x + 1.
unsigned default_polynomial(int bits);

/// Arithmetic tables for GF(2^m), 1 <= m <= 8.
///
/// Immutable after construction; safe to share across threads.
class FieldContext {
 public:
  explicit FieldContext(int bits = 4);
  FieldContext(int bits, unsigned primitive_poly);

  int bits() const { return bits_; }
  unsigned polynomial() const { return poly_; }
  /// Number of field elements, 2^m.
  unsigned size() const { return size_; }
  /// Order of the multiplicative group, 2^m - 1.
  unsigned order() const { return size_ - 1; }

  bool contains(unsigned a) const { return a < size_; }

  static Symbol add(Symbol a, Symbol b) { return a ^ b; }
  static Symbol sub(Symbol a, Symbol b) { return a ^ b; }

  Symbol mul(Symbol a, Symbol b) const { return mul_table_[(static_cast<unsigned>(a) << 8) | b]; }
  Symbol div(Symbol a, Symbol b) const;
  /// Multiplicative inverse; a must be nonzero.
  Symbol inv(Symbol a) const;

  Symbol exp(unsigned e) const { return exp_table_[e % order()]; }
  /// Discrete log of a nonzero element.
  unsigned log(Symbol a) const { return log_table_[a]; }

  /// Row of the multiplication table for a fixed left operand.
  const Symbol* mul_row(Symbol c) const { return mul_table_.data() + (static_cast<unsigned>(c) << 8); }

  /// dst[i] ^= c * src[i]
  void axpy(Symbol c, std::span<const Symbol> src, std::span<Symbol> dst) const;
  /// v[i] = c * v[i]
  void scale(Symbol c, std::span<Symbol> v) const;

 private:
  int bits_;
  unsigned poly_;
  unsigned size_;
  std::vector<Symbol> exp_table_;
  std::vector<unsigned> log_table_;
  std::vector<Symbol> mul_table_;
};

}  // namespace bpnc::gf
