#include "bpnc/rlnc/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpnc::rlnc {

std::string_view to_string(CoefficientMode mode) {
  switch (mode) {
    case CoefficientMode::Uniform: return "uniform";
    case CoefficientMode::RankIncreasing: return "rank_increasing";
    case CoefficientMode::Systematic: return "systematic";
    case CoefficientMode::Causal: return "causal";
  }
  return "uniform";
}

std::optional<CoefficientMode> parse_coefficient_mode(std::string_view name) {
  for (auto m : {CoefficientMode::Uniform, CoefficientMode::RankIncreasing, CoefficientMode::Systematic,
                 CoefficientMode::Causal}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

TagSampler::TagSampler(const gf::FieldContext& field, std::size_t block_size, CoefficientMode mode)
    : field_(&field), block_size_(block_size), mode_(mode) {
  if (block_size == 0) throw std::invalid_argument("block_size must be positive");
}

std::size_t TagSampler::sources_needed() const {
  if (mode_ == CoefficientMode::Causal && drawn_ < block_size_) return drawn_ + 1;
  return block_size_;
}

std::vector<Symbol> TagSampler::uniform_nonzero(Rng& rng, std::size_t width) {
  std::vector<Symbol> row(block_size_, 0);
  for (;;) {
    bool any = false;
    for (std::size_t c = 0; c < width; ++c) {
      row[c] = static_cast<Symbol>(rng.below(field_->size()));
      any = any || row[c] != 0;
    }
    if (any) return row;
  }
}

bool TagSampler::raises_rank(std::span<const Symbol> row) const {
  std::vector<Symbol> r(row.begin(), row.end());
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    const Symbol c = r[basis_pivot_[i]];
    if (c != 0) field_->axpy(c, basis_[i], r);
  }
  return std::any_of(r.begin(), r.end(), [](Symbol s) { return s != 0; });
}

void TagSampler::absorb(std::span<const Symbol> row) {
  std::vector<Symbol> r(row.begin(), row.end());
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    const Symbol c = r[basis_pivot_[i]];
    if (c != 0) field_->axpy(c, basis_[i], r);
  }
  auto it = std::find_if(r.begin(), r.end(), [](Symbol s) { return s != 0; });
  if (it == r.end()) return;
  const auto pivot = static_cast<std::size_t>(it - r.begin());
  field_->scale(field_->inv(*it), r);
  for (auto& b : basis_) {
    if (b[pivot] != 0) field_->axpy(b[pivot], r, b);
  }
  basis_.push_back(std::move(r));
  basis_pivot_.push_back(pivot);
}

std::vector<Symbol> TagSampler::next(Rng& rng) {
  std::vector<Symbol> row;
  const bool in_block = drawn_ < block_size_;
  switch (mode_) {
    case CoefficientMode::Uniform:
      row = uniform_nonzero(rng, block_size_);
      break;
    case CoefficientMode::RankIncreasing:
      do {
        row = uniform_nonzero(rng, block_size_);
      } while (in_block && !raises_rank(row));
      if (in_block) absorb(row);
      break;
    case CoefficientMode::Systematic:
      if (in_block) {
        row.assign(block_size_, 0);
        row[drawn_] = 1;
      } else {
        row = uniform_nonzero(rng, block_size_);
      }
      break;
    case CoefficientMode::Causal:
      if (in_block) {
        row.assign(block_size_, 0);
        for (std::size_t c = 0; c < drawn_; ++c) row[c] = static_cast<Symbol>(rng.below(field_->size()));
        row[drawn_] = static_cast<Symbol>(1 + rng.below(field_->order()));
      } else {
        row = uniform_nonzero(rng, block_size_);
      }
      break;
  }
  ++drawn_;
  return row;
}

CodedPacket encode_with(const gf::FieldContext& field, const Generation& gen, std::span<const Symbol> tag,
                        FlowIndex flow) {
  if (tag.size() != gen.block_size()) throw std::invalid_argument("tag length must equal block size");
  CodedPacket pkt;
  pkt.flow = flow;
  pkt.gen_id = gen.id();
  pkt.tag.assign(tag.begin(), tag.end());
  pkt.payload.assign(gen.packet_len(), 0);
  for (std::size_t i = 0; i < tag.size(); ++i) {
    if (tag[i] == 0) continue;
    if (i >= gen.size()) throw std::logic_error("encoding vector touches a source packet not yet available");
    field.axpy(tag[i], gen.source(i), pkt.payload);
  }
  return pkt;
}

std::vector<CodedPacket> encode_generation(const gf::FieldContext& field, const Generation& gen, std::size_t count,
                                           Rng& rng, CoefficientMode mode, FlowIndex flow) {
  if (!gen.complete()) throw std::logic_error("encode_generation needs a complete generation");
  TagSampler sampler(field, gen.block_size(), mode);
  std::vector<CodedPacket> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto tag = sampler.next(rng);
    out.push_back(encode_with(field, gen, tag, flow));
  }
  return out;
}

CodedPacket recode_with(const gf::FieldContext& field, std::span<const CodedPacket> buffered,
                        std::span<const Symbol> coefficients) {
  if (buffered.empty()) throw std::invalid_argument("recode needs at least one buffered packet");
  if (coefficients.size() != buffered.size()) throw std::invalid_argument("one coefficient per buffered packet");
  const CodedPacket& first = buffered.front();
  CodedPacket out;
  out.flow = first.flow;
  out.gen_id = first.gen_id;
  out.perm = first.perm;
  out.tag.assign(first.tag.size(), 0);
  out.payload.assign(first.payload.size(), 0);
  for (std::size_t i = 0; i < buffered.size(); ++i) {
    const CodedPacket& p = buffered[i];
    if (p.flow != first.flow || p.gen_id != first.gen_id) {
      throw std::invalid_argument("recode across flows or generations");
    }
    if (p.tag.size() != out.tag.size() || p.payload.size() != out.payload.size()) {
      throw std::invalid_argument("recode over packets of different shapes");
    }
    field.axpy(coefficients[i], p.tag, out.tag);
    field.axpy(coefficients[i], p.payload, out.payload);
  }
  return out;
}

CodedPacket recode(const gf::FieldContext& field, std::span<const CodedPacket> buffered, Rng& rng) {
  std::vector<Symbol> coeffs(buffered.size());
  for (;;) {
    for (auto& c : coeffs) c = static_cast<Symbol>(rng.below(field.size()));
    if (buffered.size() == 1 && coeffs[0] == 0) continue;
    CodedPacket out = recode_with(field, buffered, coeffs);
    if (std::any_of(out.tag.begin(), out.tag.end(), [](Symbol s) { return s != 0; })) return out;
    // All-zero result carries nothing; if the inputs are themselves zero, give up.
    const bool inputs_zero = std::all_of(buffered.begin(), buffered.end(), [](const CodedPacket& p) {
      return std::all_of(p.tag.begin(), p.tag.end(), [](Symbol s) { return s == 0; });
    });
    if (inputs_zero) return out;
  }
}

}  // namespace bpnc::rlnc
