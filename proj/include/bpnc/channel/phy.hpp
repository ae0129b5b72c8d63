#pragma once

#include <cstddef>
#include <span>

#include "bpnc/common/types.hpp"

namespace bpnc::channel {

double db_to_linear(double db);
double linear_to_db(double linear);
double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

/// signal / (noise + sum of interference), all in linear power units.
double sinr(double signal_mw, std::span<const double> interference_mw, double noise_mw);

/// Received power of a transmission: tx power (dBm) plus link gain (dB).
double received_mw(double tx_power_dbm, double gain_db);

/// BPSK bit-error probability Q(sqrt(2 * sinr)).
double ber_bpsk(double sinr_linear);

struct OfdmParams {
  double bandwidth_hz = 500e3;
  int fft_len = 512;
  int cp_len = 128;
  int occupied = 200;
  int bits_per_symbol = 1;

  /// Bits per second after the occupied-carrier and cyclic-prefix losses.
  double goodput_bps() const;
  /// Time on air for a frame of `bytes` bytes.
  SimTime airtime(std::size_t bytes) const;
};

struct LinkRate {
  /// Expected delivered frames per second.
  double packets_per_s = 0;
  /// Probability that a single frame survives, (1 - BER)^(8 L).
  double success = 0;
};

LinkRate link_rate(const OfdmParams& ofdm, double sinr_linear, std::size_t frame_bytes);

/// Frame survival probability for a given bit-error rate.
double frame_success(double ber, std::size_t frame_bytes);

}  // namespace bpnc::channel
