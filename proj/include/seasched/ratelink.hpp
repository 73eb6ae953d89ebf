#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "seasched/core.hpp"

// Per-link math shared by the whole stack: the effective-SNR fixed point,
// the rate/power bijection it induces, per-link energy, and the
// convex-concave surrogate objective with its partial derivatives.
// Everything in this header works in linear units (W, Hz, bits/s); dB
// never appears here.

namespace seasched {

struct LinkState {
  double beta = 0.0;           // large-scale power gain, dimensionless
  double sigma2_w = 0.0;       // noise power, W
  double bandwidth_hz = 0.0;   // subcarrier bandwidth, Hz
  double slot_seconds = 1.0;   // slot duration, s
};

inline void check_link_state(const LinkState& s) {
  if (!(s.beta > 0.0) || !std::isfinite(s.beta))
    throw std::domain_error("LinkState: beta must be positive and finite");
  if (!(s.sigma2_w > 0.0)) throw std::domain_error("LinkState: sigma2_w must be positive");
  if (!(s.bandwidth_hz > 0.0)) throw std::domain_error("LinkState: bandwidth_hz must be positive");
  if (!(s.slot_seconds > 0.0)) throw std::domain_error("LinkState: slot_seconds must be positive");
}

// Unique root >= 1 of w = 1 + g / (1 + g/w) with g = beta*p/sigma2,
// i.e. the positive root of w^2 - w - g = 0.
inline double effective_w(double beta, double p_watts, double sigma2_w) {
  if (p_watts < 0.0) throw std::domain_error("effective_w: negative transmit power");
  if (!(beta > 0.0) || !(sigma2_w > 0.0))
    throw std::domain_error("effective_w: beta and sigma2 must be positive");
  const double g = beta * p_watts / sigma2_w;
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * g));
}

inline double rate_from_power(double p_watts, const LinkState& link) {
  check_link_state(link);
  if (p_watts < 0.0) throw std::domain_error("rate_from_power: negative transmit power");
  if (p_watts == 0.0) return 0.0;
  const double g = link.beta * p_watts / link.sigma2_w;
  const double w = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * g));
  const double r = std::log2(1.0 + g / w) + std::log2(w) -
                   std::numbers::log2e * (1.0 - 1.0 / w);
  return link.bandwidth_hz * r;
}

// Root z >= 1 of 2*log2(z) - log2(e)*(1 - 1/z) = r/B. The left side is
// strictly increasing and concave on [1, inf), so a bracketed Newton
// iteration converges; the upper bracket follows from dropping the 1/z
// term: z <= 2^{r/(2B)} * sqrt(e).
inline double inner_max_z(double rate_bps, const LinkState& link) {
  check_link_state(link);
  if (rate_bps < 0.0) throw std::domain_error("inner_max_z: negative rate");
  if (rate_bps == 0.0) return 1.0;
  const double target = rate_bps / link.bandwidth_hz;
  double lo = 1.0;
  double hi = std::exp2(0.5 * (target + std::numbers::log2e));
  auto h = [target](double z) {
    return 2.0 * std::log2(z) - std::numbers::log2e * (1.0 - 1.0 / z) - target;
  };
  auto hprime = [](double z) { return (2.0 * z - 1.0) / (z * z * std::numbers::ln2); };
  double z = hi;
  for (int it = 0; it < 200; ++it) {
    const double hz = h(z);
    if (hz > 0.0) hi = z; else lo = z;
    double step = hz / hprime(z);
    double next = z - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
    if (std::abs(next - z) <= 1e-15 * z) { z = next; break; }
    z = next;
  }
  return std::max(z, 1.0);
}

// Inverse of rate_from_power: p = sigma2 * z*(z*-1) / beta where z* is
// the inner maximizer; the two directions agree because z*(r(p)) = w(p).
inline double power_from_rate(double rate_bps, const LinkState& link) {
  if (rate_bps == 0.0) return 0.0;
  const double z = inner_max_z(rate_bps, link);
  return link.sigma2_w * z * (z - 1.0) / link.beta;
}

inline double link_energy_joules(double rate_bps, const LinkState& link) {
  return power_from_rate(rate_bps, link) * link.slot_seconds;
}

// One additive term of the surrogate f(r, z) together with both partial
// derivatives. The term is convex in r and concave in z >= 1.
struct SaddleTerm {
  double value = 0.0;  // J
  double dr = 0.0;     // J per (bits/s)
  double dz = 0.0;     // J
};

inline SaddleTerm saddle_term(double rate_bps, double z, const LinkState& link) {
  check_link_state(link);
  if (z < 1.0) throw std::domain_error("saddle_term: z must be >= 1");
  if (rate_bps < 0.0) throw std::domain_error("saddle_term: negative rate");
  const double scale = link.sigma2_w * link.slot_seconds / link.beta;
  const double ex = std::exp2(rate_bps / link.bandwidth_hz +
                              std::numbers::log2e * (1.0 - 1.0 / z));
  SaddleTerm out;
  out.value = scale * (ex - z);
  out.dr = scale * ex * std::numbers::ln2 / link.bandwidth_hz;
  out.dz = scale * (ex / (z * z) - 1.0);
  return out;
}

}  // namespace seasched
