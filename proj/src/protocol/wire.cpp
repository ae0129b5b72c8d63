#include "bpnc/protocol/wire.hpp"

#include <algorithm>
#include <cmath>

#include "bpnc/rlnc/symbols.hpp"

namespace bpnc::protocol {

std::string_view to_string(FrameType t) {
  switch (t) {
    case FrameType::Dis: return "DIS";
    case FrameType::Syn: return "SYN";
    case FrameType::Rts: return "RTS";
    case FrameType::Cts: return "CTS";
    case FrameType::Data: return "DATA";
  }
  return "?";
}

bool is_control(FrameType t) { return t != FrameType::Data; }

FrameType frame_type(std::span<const std::uint8_t> frame) {
  if (frame.empty()) throw MalformedFrame("empty frame");
  if (frame[0] < 0x01 || frame[0] > 0x05) throw MalformedFrame("unknown frame type");
  return static_cast<FrameType>(frame[0]);
}

std::uint32_t quantize_utility(double u) {
  if (!(u > 0)) return 0;
  const double scaled = std::round(u * 65536.0);
  if (scaled >= 4294967295.0) return 0xFFFFFFFFu;
  return static_cast<std::uint32_t>(scaled);
}

namespace {

class Writer {
 public:
  explicit Writer(FrameType t) { out_.push_back(static_cast<std::uint8_t>(t)); }
  void u8(std::uint32_t v) { out_.push_back(static_cast<std::uint8_t>(v)); }
  void u16(std::uint32_t v) {
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  }
  void u32(std::uint32_t v) {
    u16(v & 0xFFFF);
    u16(v >> 16);
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, FrameType expect) : in_(in) {
    if (frame_type(in) != expect) throw MalformedFrame("unexpected frame type");
    pos_ = 1;
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    const std::uint32_t lo = u16();
    const std::uint32_t hi = u16();
    return lo | (hi << 16);
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void end() const {
    if (pos_ != in_.size()) throw MalformedFrame("trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw MalformedFrame("truncated frame");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint16_t snr_to_q88(double db) {
  const double clamped = std::clamp(db, -128.0, 127.99609375);
  const auto v = static_cast<std::int16_t>(std::lround(clamped * 256.0));
  return static_cast<std::uint16_t>(v);
}

double q88_to_snr(std::uint16_t raw) { return static_cast<std::int16_t>(raw) / 256.0; }

void check_count(std::size_t n) {
  if (n > 255) throw std::invalid_argument("too many entries for a one-byte count");
}

}  // namespace

Bytes encode(const DisFrame& f) {
  check_count(f.neighbors.size());
  Writer w(FrameType::Dis);
  w.u8(f.sender);
  w.u8(f.next_channel);
  w.u8(static_cast<std::uint32_t>(f.neighbors.size()));
  for (const auto& n : f.neighbors) {
    w.u8(n.id);
    w.u8(n.channel);
    w.u16(snr_to_q88(n.snr_db));
  }
  return w.take();
}

DisFrame decode_dis(std::span<const std::uint8_t> frame) {
  Reader r(frame, FrameType::Dis);
  DisFrame f;
  f.sender = r.u8();
  f.next_channel = r.u8();
  const std::size_t n = r.u8();
  for (std::size_t i = 0; i < n; ++i) {
    DisNeighbor nb;
    nb.id = r.u8();
    nb.channel = r.u8();
    nb.snr_db = q88_to_snr(r.u16());
    f.neighbors.push_back(nb);
  }
  r.end();
  return f;
}

Bytes encode(const SynFrame& f) {
  check_count(f.entries.size());
  Writer w(FrameType::Syn);
  w.u8(f.sender);
  w.u8(static_cast<std::uint32_t>(f.entries.size()));
  for (const auto& e : f.entries) {
    check_count(e.destinations.size());
    w.u8(e.source);
    w.u8(static_cast<std::uint32_t>(e.destinations.size()));
    for (NodeId d : e.destinations) w.u8(d);
    w.u16(e.backlog);
  }
  return w.take();
}

SynFrame decode_syn(std::span<const std::uint8_t> frame) {
  Reader r(frame, FrameType::Syn);
  SynFrame f;
  f.sender = r.u8();
  const std::size_t n = r.u8();
  for (std::size_t i = 0; i < n; ++i) {
    SynEntry e;
    e.source = r.u8();
    const std::size_t nd = r.u8();
    for (std::size_t d = 0; d < nd; ++d) e.destinations.push_back(r.u8());
    e.backlog = r.u16();
    f.entries.push_back(std::move(e));
  }
  r.end();
  return f;
}

Bytes encode(const RtsFrame& f) {
  Writer w(FrameType::Rts);
  w.u8(f.tx);
  w.u8(f.rx);
  w.u8(f.channel);
  w.u8(f.flow);
  w.u32(f.utility_q16);
  return w.take();
}

RtsFrame decode_rts(std::span<const std::uint8_t> frame) {
  Reader r(frame, FrameType::Rts);
  RtsFrame f;
  f.tx = r.u8();
  f.rx = r.u8();
  f.channel = r.u8();
  f.flow = r.u8();
  f.utility_q16 = r.u32();
  r.end();
  return f;
}

Bytes encode(const CtsFrame& f) {
  Writer w(FrameType::Cts);
  w.u8(f.rx);
  w.u8(f.tx);
  w.u8(f.channel);
  return w.take();
}

CtsFrame decode_cts(std::span<const std::uint8_t> frame) {
  Reader r(frame, FrameType::Cts);
  CtsFrame f;
  f.rx = r.u8();
  f.tx = r.u8();
  f.channel = r.u8();
  r.end();
  return f;
}

Bytes encode_data(const rlnc::CodedPacket& pkt, int field_bits) {
  const std::size_t h = pkt.tag.size();
  if (h == 0 || h > 255) throw std::invalid_argument("block size must be 1..255");
  if (!pkt.perm.empty() && pkt.perm.size() != h) throw std::invalid_argument("permutation length mismatch");
  Writer w(FrameType::Data);
  w.u8(pkt.flow);
  w.u16(pkt.gen_id);
  w.u8(static_cast<std::uint32_t>(h));
  for (std::size_t c = 0; c < h; ++c) w.u8(pkt.perm.empty() ? static_cast<std::uint32_t>(c) : pkt.perm[c]);
  w.bytes(rlnc::pack(pkt.tag, field_bits));
  w.bytes(rlnc::pack(pkt.payload, field_bits));
  return w.take();
}

rlnc::CodedPacket decode_data(std::span<const std::uint8_t> frame, int field_bits, std::size_t payload_symbols) {
  Reader r(frame, FrameType::Data);
  rlnc::CodedPacket p;
  p.flow = r.u8();
  p.gen_id = r.u16();
  const std::size_t h = r.u8();
  if (h == 0) throw MalformedFrame("zero block size");
  const auto perm = r.bytes(h);
  p.perm.assign(perm.begin(), perm.end());
  std::vector<bool> seen(h, false);
  bool identity = true;
  for (std::size_t c = 0; c < h; ++c) {
    if (p.perm[c] >= h || seen[p.perm[c]]) throw MalformedFrame("invalid permutation");
    seen[p.perm[c]] = true;
    identity = identity && p.perm[c] == c;
  }
  if (identity) p.perm.clear();
  p.tag = rlnc::unpack(r.bytes(rlnc::packed_size(h, field_bits)), field_bits, h);
  p.payload = rlnc::unpack(r.bytes(rlnc::packed_size(payload_symbols, field_bits)), field_bits, payload_symbols);
  r.end();
  return p;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

}  // namespace bpnc::protocol
