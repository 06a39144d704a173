#pragma once

#include <cmath>
#include <stdexcept>

namespace dbsim {

// Uplink channel constants. Power figures are kept in dBm and converted to
// watts only where the SNR is formed; only the P/sigma^2 ratio matters.
struct ChannelParams {
  double tx_power_dbm = 20.0;
  double noise_dbm = -104.0;
  double path_loss_exp = 2.0;   // alpha
  double nakagami_m = 3.0;      // Gamma shape of the fading power gain
  double rb_bandwidth_hz = 20e6;
  int num_rbs = 1024;

  void validate() const {
    if (!(nakagami_m >= 0.5)) throw std::invalid_argument("channel: nakagami_m must be >= 0.5");
    if (!(rb_bandwidth_hz > 0.0)) throw std::invalid_argument("channel: rb_bandwidth_hz must be positive");
    if (num_rbs < 1) throw std::invalid_argument("channel: num_rbs must be >= 1");
  }
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double link_snr(const ChannelParams& c, double link_distance_m, double fading_gain) {
  const double p = dbm_to_watts(c.tx_power_dbm);
  const double noise = dbm_to_watts(c.noise_dbm);
  return p * fading_gain * std::pow(link_distance_m, -c.path_loss_exp) / noise;
}

// Shannon rate of one resource block, log taken base 2 so the unit is bits/s.
inline double link_rate_bps(const ChannelParams& c, double link_distance_m, double fading_gain) {
  return c.rb_bandwidth_hz * std::log2(1.0 + link_snr(c, link_distance_m, fading_gain));
}

}  // namespace dbsim
