#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seasched/scheduler.hpp"

// Reference schemes and bounds: direct full-power transmission on the best
// slots, rate adaptation restricted to BS links, the relaxed lower bound,
// exhaustive search over schedules for tiny instances, and a bisection for
// the largest uniformly-feasible demand.

namespace seasched {

struct BaselineResult {
  std::string scheme;
  double energy_joules = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::optional<Schedule> schedule;      // present when the scheme is integral
  std::optional<RateAllocation> rates;
  std::optional<SchedulerStats> stats;   // present when a scheduler ran inside
  std::string notes;
};

// The BS transmits at full power to each vessel in the fewest eligible
// slots that cover its demand, taking slots in decreasing peak-rate order.
// Slots later than a vessel's deadline are never eligible. Over-booked
// subcarriers are reported as infeasible rather than repaired.
inline BaselineResult fixed_transmission(const Scenario& s, const CsiTensor& csi) {
  BaselineResult out;
  out.scheme = "fixed";
  out.schedule = Schedule{LinkTensor<std::uint8_t>(csi.num_tx, csi.num_rx, csi.num_slots, 0)};
  out.rates = zero_rates(csi);
  double energy = 0.0;
  bool feasible = true;
  for (int v = 0; v < s.num_vessels; ++v) {
    const double volume = s.qos[v].volume_bits;
    if (!(volume > 0.0)) continue;
    const int node = s.node_of_vessel(v);
    std::vector<int> slots(s.qos[v].deadline_slot);
    for (int t = 0; t < s.qos[v].deadline_slot; ++t) slots[t] = t;
    std::stable_sort(slots.begin(), slots.end(), [&](int a, int b) {
      return csi.peak_rate_bps.at(0, node, a) > csi.peak_rate_bps.at(0, node, b);
    });
    double delivered = 0.0;
    bool covered = false;
    for (int t : slots) {
      out.schedule->on.at(0, node, t) = 1;
      out.rates->bps.at(0, node, t) = csi.peak_rate_bps.at(0, node, t);
      delivered += csi.peak_rate_bps.at(0, node, t) * s.slot_seconds;
      energy += s.max_power_w[0] * s.slot_seconds;
      if (delivered >= volume) {
        covered = true;
        break;
      }
    }
    if (!covered) {
      feasible = false;
      out.notes += "vessel " + std::to_string(node) + " demand unreachable by its deadline; ";
    }
  }
  for (int t = 0; t < s.num_slots; ++t) {
    int active = 0;
    for (int j = 1; j <= s.num_rx(); ++j)
      if (out.schedule->on.at(0, j, t)) ++active;
    if (active > s.num_subcarriers) {
      feasible = false;
      out.notes += "slot " + std::to_string(t + 1) + " needs " + std::to_string(active) +
                   " subcarriers (budget " + std::to_string(s.num_subcarriers) + "); ";
    }
  }
  out.energy_joules = energy;
  out.feasible = feasible;
  return out;
}

// Rate adaptation with every non-BS transmitter silenced. The restriction
// makes per-node conflicts impossible, so only the subcarrier budget can
// require integer repair, which the restricted scheduler performs.
inline BaselineResult rate_adaptation_only(const Scenario& s, const CsiTensor& csi,
                                           const SchedulerConfig& cfg = {}) {
  std::vector<LinkKey> zs;
  for (int i = 1; i < s.num_tx(); ++i)
    for (int j = 1; j <= s.num_rx(); ++j) {
      if (i == j) continue;
      for (int t = 0; t < s.num_slots; ++t) zs.push_back({i, j, t});
    }
  BaselineResult out;
  out.scheme = "rateonly";
  try {
    SchedulerResult run = run_scheduler_restricted(s, csi, cfg, ForcedZeroSet(std::move(zs)));
    out.energy_joules = run.stats.energy_joules;
    out.feasible = true;
    out.schedule = std::move(run.schedule);
    out.rates = std::move(run.rates);
    out.stats = std::move(run.stats);
  } catch (const InfeasibleError& e) {
    out.feasible = false;
    out.notes = e.what();
  }
  return out;
}

// Optimum of the relaxation: a lower bound on the energy of any integral
// schedule meeting the same demands.
inline BaselineResult relaxed_lower_bound(const Scenario& s, const CsiTensor& csi,
                                          const SolverOptions& opt = {}) {
  BaselineResult out;
  out.scheme = "bound";
  SolveResult sol = solve_relaxed(s, csi, ForcedZeroSet{}, opt);
  if (sol.report.status == SolveStatus::Infeasible) {
    out.feasible = false;
    out.notes = "relaxation infeasible (vessel node " +
                std::to_string(sol.report.infeasible_vessel_node) + ")";
    return out;
  }
  if (sol.report.status != SolveStatus::Converged) {
    out.feasible = false;
    out.notes = "relaxed solve hit its iteration limit";
    return out;
  }
  out.energy_joules = sol.report.objective_joules;
  out.feasible = true;
  out.rates = std::move(sol.rates);
  return out;
}

struct ExhaustiveLimits {
  long max_schedules = 1L << 20;
};

namespace detail {

// All per-slot link sets compatible with one-incidence-per-node (the BS may
// fan out freely) and the subcarrier budget, including the empty set.
inline std::vector<std::vector<LinkKey>> slot_subsets(const Scenario& s, const CsiTensor& csi,
                                                      int t, bool bs_only) {
  std::vector<LinkKey> links;
  for (int i = 0; i < s.num_tx(); ++i) {
    if (bs_only && i != 0) continue;
    for (int j = 1; j <= s.num_rx(); ++j)
      if (i != j && csi.peak_rate_bps.at(i, j, t) > 0.0) links.push_back({i, j, t});
  }
  std::vector<std::vector<LinkKey>> out;
  std::vector<LinkKey> current;
  std::vector<int> used(s.num_nodes(), 0);
  auto rec = [&](auto&& self, std::size_t from) -> void {
    out.push_back(current);
    if (static_cast<int>(current.size()) >= s.num_subcarriers) return;
    for (std::size_t k = from; k < links.size(); ++k) {
      const LinkKey& l = links[k];
      if (used[l.rx]) continue;
      if (l.tx != 0 && used[l.tx]) continue;
      used[l.rx] = 1;
      if (l.tx != 0) used[l.tx] = 1;
      current.push_back(l);
      self(self, k + 1);
      current.pop_back();
      used[l.rx] = 0;
      if (l.tx != 0) used[l.tx] = 0;
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace detail

// Enumerate every feasible binary schedule, optimize rates for each with
// the scheduling shares already fixed, and keep the cheapest. Only viable
// for tiny instances; the enumeration budget is checked up front.
inline BaselineResult exhaustive_optimal(const Scenario& s, const CsiTensor& csi,
                                         const ExhaustiveLimits& limits = {},
                                         const SolverOptions& solver_opt_in = {}) {
  BaselineResult out;
  out.scheme = "exhaustive";

  std::vector<std::vector<std::vector<LinkKey>>> per_slot;
  double count = 1.0;
  for (int t = 0; t < s.num_slots; ++t) {
    // Non-BS transmitters hold no data in the first slot; any schedule that
    // activates them there has the same optimal energy as the one without,
    // so the first slot enumerates BS links only.
    per_slot.push_back(detail::slot_subsets(s, csi, t, t == 0));
    count *= static_cast<double>(per_slot.back().size());
    if (count > static_cast<double>(limits.max_schedules))
      throw EnumerationLimitError("exhaustive_optimal: " + std::to_string(count) +
                                  " schedules exceed the budget of " +
                                  std::to_string(limits.max_schedules));
  }

  SolverOptions sopt = solver_opt_in;
  sopt.time_share_rows = false;  // shares are integral here

  std::vector<double> budget_allowed;
  if (s.uav_energy_budget_j)
    for (int u = 1; u <= s.num_uavs; ++u)
      budget_allowed.push_back(
          std::floor((*s.uav_energy_budget_j)[u - 1] / (s.max_power_w[u] * s.slot_seconds) +
                     1e-9));

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(s.num_slots, 0), best_pick;
  auto rec = [&](auto&& self, int t) -> void {
    if (t == s.num_slots) {
      if (!budget_allowed.empty()) {
        std::vector<int> uav_count(s.num_uavs + 1, 0);
        for (int tt = 0; tt < s.num_slots; ++tt)
          for (const LinkKey& l : per_slot[tt][pick[tt]])
            if (s.is_uav(l.tx)) ++uav_count[l.tx];
        for (int u = 1; u <= s.num_uavs; ++u)
          if (uav_count[u] > budget_allowed[u - 1]) return;
      }
      std::vector<LinkKey> zs;
      LinkTensor<std::uint8_t> on(csi.num_tx, csi.num_rx, csi.num_slots, 0);
      for (int tt = 0; tt < s.num_slots; ++tt)
        for (const LinkKey& l : per_slot[tt][pick[tt]]) on.at(l) = 1;
      for (int i = 0; i < s.num_tx(); ++i)
        for (int j = 1; j <= s.num_rx(); ++j) {
          if (i == j) continue;
          for (int tt = 0; tt < s.num_slots; ++tt)
            if (!on.at(i, j, tt)) zs.push_back({i, j, tt});
        }
      SolveResult sol = solve_relaxed(s, csi, ForcedZeroSet(std::move(zs)), sopt);
      if (sol.report.status == SolveStatus::Converged &&
          sol.report.objective_joules < best) {
        best = sol.report.objective_joules;
        best_pick = pick;
        out.schedule = Schedule{std::move(on)};
        out.rates = std::move(sol.rates);
      }
      return;
    }
    for (std::size_t k = 0; k < per_slot[t].size(); ++k) {
      pick[t] = static_cast<int>(k);
      self(self, t + 1);
    }
  };
  rec(rec, 0);

  out.energy_joules = best;
  out.feasible = std::isfinite(best);
  if (!out.feasible) out.notes = "no enumerated schedule can satisfy the demands";
  return out;
}

// Bisection for the largest uniform per-vessel demand (deadline T) that the
// scheduler can serve. The bracket defaults to [V_b, alpha_b * V_b] with
// V_b the weakest vessel's full-horizon BS volume.
enum class QosSearchStatus { BelowBracket, Converged, Saturated };

struct QosSearchResult {
  QosSearchStatus status = QosSearchStatus::Converged;
  double v_bits = 0.0;
  std::vector<std::pair<double, bool>> probes;  // (volume, feasible) in probe order
};

inline double qos_bracket_base(const Scenario& s, const CsiTensor& csi) {
  double vb = std::numeric_limits<double>::infinity();
  for (int v = 0; v < s.num_vessels; ++v) {
    const int node = s.node_of_vessel(v);
    double sum = 0.0;
    for (int t = 0; t < s.num_slots; ++t) sum += csi.peak_rate_bps.at(0, node, t);
    vb = std::min(vb, sum * s.slot_seconds);
  }
  return vb;
}

inline QosSearchResult max_feasible_qos(const Scenario& s, const CsiTensor& csi, double v_lo,
                                        double v_hi, double tol = 0.01,
                                        const SchedulerConfig& cfg = {}) {
  if (!(v_hi > v_lo)) throw std::invalid_argument("max_feasible_qos: bracket must be increasing");
  QosSearchResult out;
  auto feasible = [&](double volume) {
    Scenario probe = s;
    for (QosTarget& q : probe.qos) q = {volume, s.num_slots};
    bool ok = true;
    try {
      run_scheduler(probe, csi, cfg);
    } catch (const InfeasibleError&) {
      ok = false;
    }
    out.probes.emplace_back(volume, ok);
    return ok;
  };
  if (feasible(v_hi)) {
    out.status = QosSearchStatus::Saturated;
    out.v_bits = v_hi;
    return out;
  }
  if (!feasible(v_lo)) {
    out.status = QosSearchStatus::BelowBracket;
    out.v_bits = v_lo;
    return out;
  }
  double lo = v_lo, hi = v_hi;
  const double width = v_hi - v_lo;
  while (hi - lo > tol * width) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) lo = mid; else hi = mid;
  }
  out.status = QosSearchStatus::Converged;
  out.v_bits = lo;
  return out;
}

}  // namespace seasched
