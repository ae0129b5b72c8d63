#include "bpnc/channel/phy.hpp"

#include <cmath>
#include <stdexcept>

namespace bpnc::channel {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double dbm_to_mw(double dbm) { return db_to_linear(dbm); }

double mw_to_dbm(double mw) { return linear_to_db(mw); }

double sinr(double signal_mw, std::span<const double> interference_mw, double noise_mw) {
  double denom = noise_mw;
  for (double i : interference_mw) denom += i;
  return signal_mw / denom;
}

double received_mw(double tx_power_dbm, double gain_db) { return dbm_to_mw(tx_power_dbm + gain_db); }

double ber_bpsk(double sinr_linear) {
  if (sinr_linear <= 0) return 0.5;
  // Q(sqrt(2 s)) = erfc(sqrt(s)) / 2
  return 0.5 * std::erfc(std::sqrt(sinr_linear));
}

double OfdmParams::goodput_bps() const {
  if (fft_len <= 0 || occupied <= 0 || occupied > fft_len || cp_len < 0 || bandwidth_hz <= 0 || bits_per_symbol <= 0)
    throw std::invalid_argument("invalid OFDM parameters");
  const double occupied_fraction = static_cast<double>(occupied) / fft_len;
  const double cp_efficiency = static_cast<double>(fft_len) / (fft_len + cp_len);
  return bandwidth_hz * bits_per_symbol * occupied_fraction * cp_efficiency;
}

SimTime OfdmParams::airtime(std::size_t bytes) const {
  const double s = 8.0 * static_cast<double>(bytes) / goodput_bps();
  return static_cast<SimTime>(std::ceil(s * kMicrosPerSecond));
}

double frame_success(double ber, std::size_t frame_bytes) {
  if (ber >= 0.5) return 0.0;
  return std::exp(8.0 * static_cast<double>(frame_bytes) * std::log1p(-ber));
}

LinkRate link_rate(const OfdmParams& ofdm, double sinr_linear, std::size_t frame_bytes) {
  if (frame_bytes == 0) throw std::invalid_argument("frame length must be positive");
  LinkRate r;
  r.success = frame_success(ber_bpsk(sinr_linear), frame_bytes);
  r.packets_per_s = ofdm.goodput_bps() / (8.0 * static_cast<double>(frame_bytes)) * r.success;
  return r;
}

}  // namespace bpnc::channel
