#pragma once

#include <stdexcept>

#include "seasched/channel.hpp"
#include "seasched/ratelink.hpp"

// Network-level objective: the convex-concave surrogate summed over all
// valid link-slots, and the total energy it envelopes.

namespace seasched {

// Continuous rate plan over every directed link-slot (bits/s). Entries on
// invalid links (tx == rx) stay zero.
struct RateAllocation {
  LinkTensor<double> bps;
  friend bool operator==(const RateAllocation&, const RateAllocation&) = default;
};

inline RateAllocation zero_rates(const CsiTensor& csi) {
  return RateAllocation{LinkTensor<double>(csi.num_tx, csi.num_rx, csi.num_slots, 0.0)};
}

struct SaddleEval {
  double value = 0.0;         // J
  LinkTensor<double> grad_r;  // J per (bits/s)
  LinkTensor<double> grad_z;  // J
};

inline SaddleEval saddle_objective(const RateAllocation& rates, const LinkTensor<double>& zs,
                                   const CsiTensor& csi, const Scenario& s) {
  if (!rates.bps.same_shape(csi.beta) || !zs.same_shape(csi.beta))
    throw std::invalid_argument("saddle_objective: tensor shapes do not match the CSI");
  SaddleEval out;
  out.grad_r = LinkTensor<double>(csi.num_tx, csi.num_rx, csi.num_slots, 0.0);
  out.grad_z = LinkTensor<double>(csi.num_tx, csi.num_rx, csi.num_slots, 0.0);
  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < csi.num_slots; ++t) {
        const SaddleTerm term =
            saddle_term(rates.bps.at(i, j, t), zs.at(i, j, t), link_state(s, csi, i, j, t));
        out.value += term.value;
        out.grad_r.at(i, j, t) = term.dr;
        out.grad_z.at(i, j, t) = term.dz;
      }
    }
  return out;
}

// Energy of a rate plan: per-link inversion to power, times slot length.
// Equals the inner maximum of the surrogate over z >= 1.
inline double total_energy(const RateAllocation& rates, const CsiTensor& csi, const Scenario& s) {
  if (!rates.bps.same_shape(csi.beta))
    throw std::invalid_argument("total_energy: rate tensor shape does not match the CSI");
  double joules = 0.0;
  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < csi.num_slots; ++t) {
        const double r = rates.bps.at(i, j, t);
        if (r < 0.0) throw std::domain_error("total_energy: negative rate");
        if (r == 0.0) continue;
        joules += link_energy_joules(r, link_state(s, csi, i, j, t));
      }
    }
  return joules;
}

}  // namespace seasched
