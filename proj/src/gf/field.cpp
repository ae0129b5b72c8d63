#include "bpnc/gf/field.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bpnc::gf {

unsigned default_polynomial(int bits) {
  switch (bits) {
    case 1: return 0x3;    // x + 1
    case 2: return 0x7;    // x^2 + x + 1
    case 3: return 0xB;    // x^3 + x + 1
    case 4: return 0x13;   // x^4 + x + 1
    case 5: return 0x25;   // x^5 + x^2 + 1
    case 6: return 0x43;   // x^6 + x + 1
    case 7: return 0x83;   // x^7 + x + 1
    case 8: return 0x11D;  // x^8 + x^4 + x^3 + x^2 + 1
    default: throw std::invalid_argument("field bit-width must be in 1..8, got " + std::to_string(bits));
  }
}

FieldContext::FieldContext(int bits) : FieldContext(bits, default_polynomial(bits)) {}

FieldContext::FieldContext(int bits, unsigned primitive_poly)
    : bits_(bits), poly_(primitive_poly), size_(0) {
  if (bits < 1 || bits > 8) {
    throw std::invalid_argument("field bit-width must be in 1..8, got " + std::to_string(bits));
  }
  size_ = 1u << bits;
  if ((primitive_poly >> bits) != 1u) {
    throw std::invalid_argument("reduction polynomial must have degree " + std::to_string(bits));
  }

  exp_table_.assign(2 * size_, 0);
  log_table_.assign(size_, 0);
  std::vector<bool> seen(size_, false);

  // Successive powers of x; the generator must reach every nonzero element.
  unsigned x = 1;
  for (unsigned e = 0; e < order(); ++e) {
    if (seen[x]) {
      throw std::invalid_argument("reduction polynomial is not primitive");
    }
    seen[x] = true;
    exp_table_[e] = static_cast<Symbol>(x);
    log_table_[x] = e;
    x <<= 1;
    if (x & size_) x ^= primitive_poly;
  }
  for (unsigned e = order(); e < exp_table_.size(); ++e) {
    exp_table_[e] = exp_table_[e - order()];
  }

  mul_table_.assign(256 * 256, 0);
  for (unsigned a = 1; a < size_; ++a) {
    for (unsigned b = 1; b < size_; ++b) {
      mul_table_[(a << 8) | b] = exp_table_[log_table_[a] + log_table_[b]];
    }
  }
}

Symbol FieldContext::inv(Symbol a) const {
  if (a == 0) throw std::domain_error("inverse of zero");
  return exp_table_[(order() - log_table_[a]) % order()];
}

Symbol FieldContext::div(Symbol a, Symbol b) const {
  if (b == 0) throw std::domain_error("division by zero");
  if (a == 0) return 0;
  return exp_table_[log_table_[a] + order() - log_table_[b]];
}

void FieldContext::axpy(Symbol c, std::span<const Symbol> src, std::span<Symbol> dst) const {
  if (c == 0) return;
  const std::size_t n = std::min(src.size(), dst.size());
  if (c == 1) {
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  const Symbol* row = mul_row(c);
  for (std::size_t i = 0; i < n; ++i) dst[i] ^= row[src[i]];
}

void FieldContext::scale(Symbol c, std::span<Symbol> v) const {
  if (c == 1) return;
  const Symbol* row = mul_row(c);
  for (auto& s : v) s = row[s];
}

}  // namespace bpnc::gf
