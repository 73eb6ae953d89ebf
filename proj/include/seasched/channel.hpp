#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "seasched/core.hpp"
#include "seasched/ratelink.hpp"
#include "seasched/scenario.hpp"

// Large-scale channel prediction. Three loss models cover every link kind:
//  - links with exactly one UAV endpoint use a logistic blend of LoS/NLoS
//    excess loss over the free-space term,
//  - UAV-to-UAV links use plain free-space loss,
//  - everything else (shore/vessel to vessel) uses a Hata-style macro
//    model with an environment offset.
// All dB <-> linear conversions live in this header.

namespace seasched {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double pathloss_uav_db(double d_m, double h_u_m, double f_c_mhz,
                              const AirToGroundParams& air) {
  if (!(h_u_m > 0.0)) throw std::domain_error("pathloss_uav_db: UAV height must be positive");
  if (!(d_m >= h_u_m))
    throw std::domain_error("pathloss_uav_db: slant distance " + std::to_string(d_m) +
                            " m is below the UAV height " + std::to_string(h_u_m) + " m");
  if (!(f_c_mhz > 0.0)) throw std::domain_error("pathloss_uav_db: carrier must be positive");
  const double rho_deg = 180.0 / std::numbers::pi * std::asin(h_u_m / d_m);
  const double a_diff = air.eta_los_db - air.eta_nlos_db;
  const double b_term = 20.0 * std::log10(d_m) +
                        20.0 * std::log10(4.0 * std::numbers::pi * f_c_mhz / 300.0) +
                        air.eta_nlos_db;
  return a_diff / (1.0 + air.a * std::exp(-air.b * (rho_deg - air.a))) + b_term;
}

inline double pathloss_sea_db(double d_m, double h_tx_m, double h_rx_m, double f_c_mhz,
                              double env_c_db) {
  if (!(d_m > 0.0)) throw std::domain_error("pathloss_sea_db: distance must be positive");
  if (!(h_tx_m > 0.0) || !(h_rx_m > 0.0))
    throw std::domain_error("pathloss_sea_db: antenna heights must be positive");
  if (!(f_c_mhz > 0.0)) throw std::domain_error("pathloss_sea_db: carrier must be positive");
  return (44.9 - 6.55 * std::log10(h_tx_m)) * std::log10(d_m / 1000.0) + 45.5 +
         (35.46 - 1.1 * h_rx_m) * std::log10(f_c_mhz) - 13.82 * std::log10(h_rx_m) +
         0.7 * h_rx_m + env_c_db;
}

inline double pathloss_freespace_db(double d_m, double f_c_mhz) {
  if (!(d_m > 0.0)) throw std::domain_error("pathloss_freespace_db: distance must be positive");
  if (!(f_c_mhz > 0.0)) throw std::domain_error("pathloss_freespace_db: carrier must be positive");
  return 20.0 * std::log10(d_m) + 20.0 * std::log10(4.0 * std::numbers::pi * f_c_mhz / 300.0);
}

// Largest sustainable rate on a link, defined through the same effective-SNR
// approximation the energy objective uses so that the rate cap and the
// objective stay mutually consistent.
inline double peak_rate(double beta, double p_max_w, double sigma2_w, double bandwidth_hz) {
  if (!(p_max_w > 0.0)) throw std::domain_error("peak_rate: max power must be positive");
  return rate_from_power(p_max_w, LinkState{beta, sigma2_w, bandwidth_hz, 1.0});
}

// Large-scale gains and peak rates for every directed link and slot.
// Entries with tx == rx are invalid and left at zero.
struct CsiTensor {
  int num_tx = 0, num_rx = 0, num_slots = 0;
  LinkTensor<double> beta;
  LinkTensor<double> peak_rate_bps;

  bool valid_link(int tx, int rx) const { return tx != rx && rx >= 1; }
  friend bool operator==(const CsiTensor&, const CsiTensor&) = default;
};

inline CsiTensor predict_csi(const Scenario& s) {
  validate(s);
  CsiTensor csi;
  csi.num_tx = s.num_tx();
  csi.num_rx = s.num_rx();
  csi.num_slots = s.num_slots;
  csi.beta = LinkTensor<double>(csi.num_tx, csi.num_rx, csi.num_slots, 0.0);
  csi.peak_rate_bps = LinkTensor<double>(csi.num_tx, csi.num_rx, csi.num_slots, 0.0);

  for (int i = 0; i < csi.num_tx; ++i) {
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < csi.num_slots; ++t) {
        const Waypoint& pi = s.position(i, t);
        const Waypoint& pj = s.position(j, t);
        const double d = distance_m(pi, pj);
        const bool tx_uav = s.is_uav(i), rx_uav = s.is_uav(j);
        double loss_db = 0.0;
        try {
          if (tx_uav && rx_uav) {
            loss_db = pathloss_freespace_db(d, s.carrier_mhz);
          } else if (tx_uav || rx_uav) {
            const double h_u = tx_uav ? pi.z : pj.z;
            loss_db = pathloss_uav_db(d, h_u, s.carrier_mhz, s.air);
          } else {
            loss_db = pathloss_sea_db(d, pi.z, pj.z, s.carrier_mhz, s.env_constant_c_db);
          }
        } catch (const std::domain_error& e) {
          throw std::domain_error("predict_csi: link (" + std::to_string(i) + "," +
                                  std::to_string(j) + ",t=" + std::to_string(t + 1) +
                                  "): " + e.what());
        }
        const double b = db_to_linear(-loss_db);
        csi.beta.at(i, j, t) = b;
        csi.peak_rate_bps.at(i, j, t) =
            peak_rate(b, s.max_power_w[i], s.noise_power_w, s.subcarrier_bandwidth_hz);
      }
    }
  }
  return csi;
}

inline LinkState link_state(const Scenario& s, const CsiTensor& csi, int tx, int rx, int slot) {
  return LinkState{csi.beta.at(tx, rx, slot), s.noise_power_w, s.subcarrier_bandwidth_hz,
                   s.slot_seconds};
}

// Per-vessel demanded volume proportional to what the BS alone could ship:
// V_v = alpha * sum_t R(0, vessel, t) * slot_seconds.
inline std::vector<double> qos_targets_from_alpha(const Scenario& s, const CsiTensor& csi,
                                                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::domain_error("qos_targets_from_alpha: alpha must lie in [0, 1]");
  std::vector<double> targets(s.num_vessels, 0.0);
  for (int v = 0; v < s.num_vessels; ++v) {
    const int node = s.node_of_vessel(v);
    double sum = 0.0;
    for (int t = 0; t < s.num_slots; ++t) sum += csi.peak_rate_bps.at(0, node, t);
    targets[v] = alpha * sum * s.slot_seconds;
  }
  return targets;
}

inline void write_csi_csv(std::ostream& os, const CsiTensor& csi) {
  os << "i,j,t,beta,peak_rate_bps\n";
  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < csi.num_slots; ++t)
        os << i << ',' << j << ',' << (t + 1) << ',' << csi.beta.at(i, j, t) << ','
           << csi.peak_rate_bps.at(i, j, t) << '\n';
    }
}

}  // namespace seasched
