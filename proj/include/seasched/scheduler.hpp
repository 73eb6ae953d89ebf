#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seasched/solver.hpp"

// Integer schedule recovery. Starting from the relaxed optimum, the loop
// detaches a binary schedule, finds the constraints it violates (first the
// per-node half-duplex family, then the per-slot subcarrier budget), builds
// candidate forced-zero sets that span all violated slots jointly (anchored
// at the latest violated slot and extended backwards in time), picks the
// candidate whose relaxed energy rises the least, and repeats until the
// detached schedule is feasible.

namespace seasched {

struct Schedule {
  LinkTensor<std::uint8_t> on;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct DetachResult {
  Schedule schedule;
  RateAllocation rates;  // rates below the threshold are zeroed
};

// delta = 1 iff r > eps_rel * R; sub-threshold rates are zeroed so the
// returned pair stays consistent.
inline DetachResult detach_schedule(const RateAllocation& rates, const CsiTensor& csi,
                                    double eps_rel) {
  if (!(eps_rel > 0.0) || !(eps_rel < 1.0))
    throw std::domain_error("detach_schedule: eps_rel must lie in (0, 1)");
  DetachResult out;
  out.schedule.on = LinkTensor<std::uint8_t>(csi.num_tx, csi.num_rx, csi.num_slots, 0);
  out.rates = zero_rates(csi);
  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < csi.num_slots; ++t) {
        const double r = rates.bps.at(i, j, t);
        if (r > eps_rel * csi.peak_rate_bps.at(i, j, t)) {
          out.schedule.on.at(i, j, t) = 1;
          out.rates.bps.at(i, j, t) = r;
        }
      }
    }
  return out;
}

// Active links listed per slot, for one constraint family:
//   x = 1: links incident to a node that receives and/or transmits more
//          than once in a slot (every active link involved in a violated
//          per-node constraint);
//   x = 2: every active link of a slot whose active count exceeds N.
struct ViolationSets {
  std::vector<std::vector<LinkKey>> per_slot;  // index = 0-based slot
  bool any() const {
    for (const auto& v : per_slot)
      if (!v.empty()) return true;
    return false;
  }
  int last_nonempty_slot() const {
    for (int t = static_cast<int>(per_slot.size()) - 1; t >= 0; --t)
      if (!per_slot[t].empty()) return t;
    return -1;
  }
};

inline int node_degree(const Schedule& sched, const Scenario& s, int node, int t) {
  int deg = 0;
  for (int i = 0; i < s.num_tx(); ++i)
    if (i != node && sched.on.at(i, node, t)) ++deg;
  if (s.is_relay_capable(node))
    for (int j2 = 1; j2 <= s.num_rx(); ++j2)
      if (j2 != node && sched.on.at(node, j2, t)) ++deg;
  return deg;
}

inline int slot_active_count(const Schedule& sched, const Scenario& s, int t) {
  int count = 0;
  for (int i = 0; i < s.num_tx(); ++i)
    for (int j = 1; j <= s.num_rx(); ++j)
      if (i != j && sched.on.at(i, j, t)) ++count;
  return count;
}

inline ViolationSets violation_sets(const Schedule& sched, const Scenario& s, int x) {
  if (x != 1 && x != 2) throw std::invalid_argument("violation_sets: x must be 1 or 2");
  ViolationSets out;
  out.per_slot.assign(s.num_slots, {});
  for (int t = 0; t < s.num_slots; ++t) {
    std::vector<LinkKey> links;
    if (x == 1) {
      for (int node = 1; node < s.num_nodes(); ++node) {
        if (node_degree(sched, s, node, t) < 2) continue;
        for (int i = 0; i < s.num_tx(); ++i)
          if (i != node && sched.on.at(i, node, t)) links.push_back({i, node, t});
        if (s.is_relay_capable(node))
          for (int j2 = 1; j2 <= s.num_rx(); ++j2)
            if (j2 != node && sched.on.at(node, j2, t)) links.push_back({node, j2, t});
      }
    } else {
      if (slot_active_count(sched, s, t) > s.num_subcarriers)
        for (int i = 0; i < s.num_tx(); ++i)
          for (int j = 1; j <= s.num_rx(); ++j)
            if (i != j && sched.on.at(i, j, t)) links.push_back({i, j, t});
    }
    std::sort(links.begin(), links.end());
    links.erase(std::unique(links.begin(), links.end()), links.end());
    out.per_slot[t] = std::move(links);
  }
  return out;
}

// Links that must fall silent so that keeping `kept` alive cannot violate a
// per-node constraint at its endpoints in that slot (x = 1); invalid triples
// (the BS as a receiver, a pure sink as a transmitter) are dropped. For the
// subcarrier family (x = 2) the removal candidate is the link itself.
inline ForcedZeroSet conflict_neighborhood(const LinkKey& kept, const Scenario& s, int x) {
  if (!s.valid_link(kept.tx, kept.rx) || kept.slot < 0 || kept.slot >= s.num_slots)
    throw std::invalid_argument("conflict_neighborhood: kept link-slot is invalid");
  if (x == 2) return ForcedZeroSet{{kept}};
  if (x != 1) throw std::invalid_argument("conflict_neighborhood: x must be 1 or 2");
  std::vector<LinkKey> zs;
  const int t = kept.slot;
  for (int j = 1; j <= s.num_rx(); ++j)  // other links out of the transmitter
    if (j != kept.rx && s.valid_link(kept.tx, j)) zs.push_back({kept.tx, j, t});
  for (int i = 0; i < s.num_tx(); ++i)  // links into the transmitter
    if (s.valid_link(i, kept.tx)) zs.push_back({i, kept.tx, t});
  for (int i = 0; i < s.num_tx(); ++i)  // other links into the receiver
    if (i != kept.tx && s.valid_link(i, kept.rx)) zs.push_back({i, kept.rx, t});
  for (int j = 1; j <= s.num_rx(); ++j)  // links out of the receiver
    if (s.valid_link(kept.rx, j)) zs.push_back({kept.rx, j, t});
  ForcedZeroSet out(std::move(zs));
  return out;
}

struct IterationBounds {
  long s_max = 0;             // [2(I+J)-N] T
  long subproblem_bound = 0;  // (I+J)^2 (T-1) T [(I+J)^2 + (I+J) - N]
};

inline IterationBounds iteration_bounds(int num_uavs, int num_vessels, int num_subcarriers,
                                        int num_slots) {
  const long ij = num_uavs + num_vessels;
  const long t = num_slots;
  IterationBounds b;
  b.s_max = (2 * ij - num_subcarriers) * t;
  b.subproblem_bound = ij * ij * (t - 1) * t * (ij * ij + ij - num_subcarriers);
  return b;
}

struct SchedulerConfig {
  double tol = 1e-6;
  double eps_rel = 1e-6;  // detachment threshold, relative to each peak rate
  long solver_max_iterations = 100000;
  bool record_per_iteration = true;
};

struct IterationRecord {
  int s = 0;
  int x = 0;
  int candidates = 0;
  int chosen = 0;  // candidate index selected (0-based)
  double energy_joules = 0.0;
  int violated_before = 0;  // violated constraints of family x at iteration start
  int resolved = 0;         // of those, how many are satisfied afterwards
};

struct SchedulerStats {
  int s1 = 0, s2 = 0;
  long subproblems = 0;     // relaxed solves actually performed
  long probe_requests = 0;  // subproblem requests incl. cache hits
  long cache_hits = 0;
  double energy_joules = 0.0;
  long s_bound = 0;
  long subproblem_bound = 0;
  double eps_rel = 0.0;
  bool broad_violation_membership = true;
  bool uav_budget_active = false;
  int polish_solves = 0;
  double wall_ms = 0.0;
  std::vector<IterationRecord> per_iteration;
};

struct SchedulerResult {
  Schedule schedule;
  RateAllocation rates;
  SchedulerStats stats;
  ForcedZeroSet zeros;  // terminal accumulated forced-zero set
  SolverReport final_report;
};

namespace detail {

// Memoized relaxed solves keyed by forced-zero set content.
class SolveCache {
 public:
  SolveCache(const Scenario& s, const CsiTensor& csi, SolverOptions opt)
      : scn_(s), csi_(csi), opt_(opt) {}

  const SolveResult& solve(const ForcedZeroSet& zeros, const DualWarmStart* warm,
                           SchedulerStats& stats) {
    ++stats.probe_requests;
    auto& bucket = cache_[zeros.hash()];
    for (auto& entry : bucket)
      if (entry.first == zeros) {
        ++stats.cache_hits;
        return *entry.second;
      }
    auto result = std::make_unique<SolveResult>(solve_relaxed(scn_, csi_, zeros, opt_, warm));
    ++stats.subproblems;
    bucket.emplace_back(zeros, std::move(result));
    return *bucket.back().second;
  }

 private:
  const Scenario& scn_;
  const CsiTensor& csi_;
  SolverOptions opt_;
  std::unordered_map<std::uint64_t,
                     std::vector<std::pair<ForcedZeroSet, std::unique_ptr<SolveResult>>>>
      cache_;
};

// Progress measure per family: violated per-node constraints for x = 1,
// total links beyond the per-slot budget for x = 2.
inline int count_violated(const Schedule& sched, const Scenario& s, int x,
                          std::vector<std::pair<int, int>>* ids = nullptr) {
  int count = 0;
  for (int t = 0; t < s.num_slots; ++t) {
    if (x == 1) {
      for (int node = 1; node < s.num_nodes(); ++node)
        if (node_degree(sched, s, node, t) >= 2) {
          ++count;
          if (ids) ids->emplace_back(node, t);
        }
    } else {
      const int excess = slot_active_count(sched, s, t) - s.num_subcarriers;
      if (excess > 0) {
        count += excess;
        if (ids) ids->emplace_back(-1, t);
      }
    }
  }
  return count;
}

inline ForcedZeroSet complement_of_support(const Schedule& sched, const Scenario& s) {
  std::vector<LinkKey> zs;
  for (int i = 0; i < s.num_tx(); ++i)
    for (int j = 1; j <= s.num_rx(); ++j) {
      if (!s.valid_link(i, j)) continue;
      for (int t = 0; t < s.num_slots; ++t)
        if (!sched.on.at(i, j, t)) zs.push_back({i, j, t});
    }
  return ForcedZeroSet(std::move(zs));
}

}  // namespace detail

// Candidate forced-zero sets for the current family-x violations: one per
// element of the latest violated slot; earlier violated slots contribute the
// element whose probing energy is smallest (ties to the lowest index), and
// each per-slot choice adds its conflict neighborhood (x = 1) or itself
// (x = 2). `accumulated` is folded into every candidate and every probe.
inline std::vector<std::pair<ForcedZeroSet, bool>> build_candidates(
    const ViolationSets& violations, const ForcedZeroSet& accumulated, const Scenario& s,
    const CsiTensor& csi, int x, detail::SolveCache& cache, const DualWarmStart* warm,
    SchedulerStats& stats) {
  const int last = violations.last_nonempty_slot();
  if (last < 0) throw std::invalid_argument("build_candidates: no violations");
  const auto& anchors = violations.per_slot[last];
  std::vector<std::pair<ForcedZeroSet, bool>> out;
  out.reserve(anchors.size());

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    ForcedZeroSet extra = conflict_neighborhood(anchors[a], s, x);
    bool feasible = true;
    for (int t = last - 1; t >= 0 && feasible; --t) {
      const auto& slot_links = violations.per_slot[t];
      if (slot_links.empty()) continue;
      int best = -1;
      double best_energy = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < slot_links.size(); ++m) {
        ForcedZeroSet probe = accumulated;
        probe.merge(extra);
        probe.merge(conflict_neighborhood(slot_links[m], s, x));
        const SolveResult& sol = cache.solve(probe, warm, stats);
        if (sol.report.status == SolveStatus::Converged &&
            sol.report.objective_joules < best_energy) {
          best_energy = sol.report.objective_joules;
          best = static_cast<int>(m);
        }
      }
      if (best < 0) {
        feasible = false;
        break;
      }
      extra.merge(conflict_neighborhood(slot_links[best], s, x));
    }
    ForcedZeroSet candidate = accumulated;
    candidate.merge(extra);
    out.emplace_back(std::move(candidate), feasible);
  }
  return out;
}

// Convenience overload matching the documented operation shape; probing
// solves run against a fresh cache.
inline std::vector<ForcedZeroSet> build_candidates(const ViolationSets& violations,
                                                   const ForcedZeroSet& accumulated,
                                                   const Scenario& s, const CsiTensor& csi,
                                                   int x) {
  detail::SolveCache cache(s, csi, SolverOptions{});
  SchedulerStats stats;
  auto pairs = build_candidates(violations, accumulated, s, csi, x, cache, nullptr, stats);
  std::vector<ForcedZeroSet> out;
  out.reserve(pairs.size());
  for (auto& pr : pairs) out.push_back(std::move(pr.first));
  return out;
}

namespace detail {

inline SchedulerResult run_scheduler_impl(const Scenario& s, const CsiTensor& csi,
                                          const SchedulerConfig& cfg,
                                          const ForcedZeroSet& base_zeros) {
  const auto t_start = std::chrono::steady_clock::now();
  SolverOptions sopt;
  sopt.tol = cfg.tol;
  sopt.max_iterations = cfg.solver_max_iterations;
  SolveCache cache(s, csi, sopt);

  SchedulerResult res;
  SchedulerStats& stats = res.stats;
  const IterationBounds bounds =
      iteration_bounds(s.num_uavs, s.num_vessels, s.num_subcarriers, s.num_slots);
  stats.s_bound = bounds.s_max;
  stats.subproblem_bound = bounds.subproblem_bound;
  stats.eps_rel = cfg.eps_rel;
  stats.uav_budget_active = s.uav_energy_budget_j.has_value();

  ForcedZeroSet accumulated = base_zeros;
  const SolveResult* cur = &cache.solve(accumulated, nullptr, stats);
  if (cur->report.status == SolveStatus::Infeasible)
    throw InfeasibleError(
        "run_scheduler: demanded volume is unreachable (vessel node " +
            std::to_string(cur->report.infeasible_vessel_node) + ", slot " +
            std::to_string(cur->report.infeasible_slot + 1) + ")",
        cur->report.infeasible_vessel_node, cur->report.infeasible_slot);
  if (cur->report.status != SolveStatus::Converged)
    throw InternalError("run_scheduler: relaxed solve hit its iteration limit");

  DetachResult cur_detached = detach_schedule(cur->rates, csi, cfg.eps_rel);

  const long s1_bound = static_cast<long>(s.num_uavs + s.num_vessels) * s.num_slots;
  const long s2_bound =
      static_cast<long>(s.num_uavs + s.num_vessels - s.num_subcarriers) * s.num_slots;

  // One pass per family normally suffices; the outer loop only repeats when
  // a later family's re-solve has re-introduced violations of an earlier
  // one. Total iteration counts stay subject to the per-family bounds.
  while (true) {
    for (int x = 1; x <= 2; ++x) {
      while (true) {
        ViolationSets viol = violation_sets(cur_detached.schedule, s, x);
        if (!viol.any()) break;
        int& sx = x == 1 ? stats.s1 : stats.s2;
        const long sx_bound = x == 1 ? s1_bound : s2_bound;
        if (sx >= sx_bound)
          throw InternalError("run_scheduler: family-" + std::to_string(x) +
                              " iteration bound exceeded");
        std::vector<std::pair<int, int>> before_ids;
        const int before_measure = count_violated(cur_detached.schedule, s, x, &before_ids);

        auto candidates =
            build_candidates(viol, accumulated, s, csi, x, cache, &cur->duals, stats);
        int chosen = -1;
        double chosen_energy = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < candidates.size(); ++a) {
          if (!candidates[a].second) continue;
          const SolveResult& sol = cache.solve(candidates[a].first, &cur->duals, stats);
          if (sol.report.status == SolveStatus::Converged &&
              sol.report.objective_joules < chosen_energy) {
            chosen_energy = sol.report.objective_joules;
            chosen = static_cast<int>(a);
          }
        }
        if (chosen < 0)
          throw InfeasibleError("run_scheduler: every candidate reduction is infeasible at s" +
                                std::to_string(x) + "=" + std::to_string(sx));

        accumulated = candidates[chosen].first;
        cur = &cache.solve(accumulated, &cur->duals, stats);
        cur_detached = detach_schedule(cur->rates, csi, cfg.eps_rel);

        int resolved = 0;
        if (x == 1) {
          for (const auto& id : before_ids)
            if (node_degree(cur_detached.schedule, s, id.first, id.second) < 2) ++resolved;
        } else {
          resolved = std::max(0, before_measure - count_violated(cur_detached.schedule, s, 2));
        }
        if (cfg.record_per_iteration)
          stats.per_iteration.push_back({sx, x, static_cast<int>(candidates.size()), chosen,
                                         chosen_energy, before_measure, resolved});
        ++sx;
      }
    }
    if (!violation_sets(cur_detached.schedule, s, 1).any()) break;
  }

  // Settle the support: delete everything outside it and re-solve until the
  // detachment is a fixed point, so the returned rates are optimal for the
  // final schedule and exactly consistent with it.
  ForcedZeroSet effective = accumulated;
  auto settle = [&]() {
    for (int round = 0; round < 64; ++round) {
      ForcedZeroSet support_zeros = complement_of_support(cur_detached.schedule, s);
      support_zeros.merge(effective);
      if (support_zeros == effective && round > 0) break;
      const SolveResult& polished = cache.solve(support_zeros, &cur->duals, stats);
      if (polished.report.status != SolveStatus::Converged) break;
      ++stats.polish_solves;
      effective = support_zeros;
      cur = &polished;
      DetachResult next = detach_schedule(cur->rates, csi, cfg.eps_rel);
      const bool stable = next.schedule == cur_detached.schedule;
      cur_detached = std::move(next);
      if (stable) break;
    }
  };
  settle();

  // Per-UAV transmit-slot budget at the integer level: trim the weakest
  // active links until the count fits, then settle the support again.
  if (s.uav_energy_budget_j) {
    bool trimmed_any = false;
    for (int u = 1; u <= s.num_uavs; ++u) {
      const double share =
          (*s.uav_energy_budget_j)[u - 1] / (s.max_power_w[u] * s.slot_seconds);
      const long allowed = std::max<long>(0, static_cast<long>(std::floor(share + 1e-9)));
      while (true) {
        std::vector<std::pair<double, LinkKey>> active;
        for (int j = 1; j <= s.num_rx(); ++j) {
          if (j == u) continue;
          for (int t = 0; t < s.num_slots; ++t)
            if (cur_detached.schedule.on.at(u, j, t))
              active.push_back({cur_detached.rates.bps.at(u, j, t), {u, j, t}});
        }
        const long excess = static_cast<long>(active.size()) - allowed;
        if (excess <= 0) break;
        std::sort(active.begin(), active.end(),
                  [](const auto& a, const auto& b) {
                    return a.first != b.first ? a.first < b.first : a.second < b.second;
                  });
        ForcedZeroSet trimmed = effective;
        for (long k = 0; k < excess; ++k) trimmed.insert(active[k].second);
        const SolveResult& sol = cache.solve(trimmed, &cur->duals, stats);
        if (sol.report.status == SolveStatus::Infeasible)
          throw InfeasibleError("run_scheduler: UAV energy budget cannot be met",
                                sol.report.infeasible_vessel_node, sol.report.infeasible_slot);
        if (sol.report.status != SolveStatus::Converged)
          throw InternalError("run_scheduler: budget repair solve hit its iteration limit");
        effective = trimmed;
        cur = &sol;
        cur_detached = detach_schedule(cur->rates, csi, cfg.eps_rel);
        trimmed_any = true;
      }
    }
    if (trimmed_any) settle();
  }

  if (stats.subproblems > stats.subproblem_bound && stats.subproblem_bound > 0)
    throw InternalError("run_scheduler: subproblem bound exceeded");

  res.schedule = cur_detached.schedule;
  res.rates = cur_detached.rates;
  res.zeros = effective;
  res.final_report = cur->report;
  stats.energy_joules = cur->report.objective_joules;
  stats.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            t_start)
                      .count();
  return res;
}

}  // namespace detail

inline SchedulerResult run_scheduler(const Scenario& s, const CsiTensor& csi,
                                     const SchedulerConfig& cfg = {}) {
  return detail::run_scheduler_impl(s, csi, cfg, ForcedZeroSet{});
}

// Scheduler restricted by a pre-seeded forced-zero set (used by reference
// schemes that only allow a subset of the links).
inline SchedulerResult run_scheduler_restricted(const Scenario& s, const CsiTensor& csi,
                                                const SchedulerConfig& cfg,
                                                const ForcedZeroSet& base_zeros) {
  return detail::run_scheduler_impl(s, csi, cfg, base_zeros);
}

// Feasibility report of an integral (schedule, rates) pair against the
// original problem: integer constraint families plus volume bookkeeping.
struct ScheduleCheck {
  int half_duplex_excess = 0;  // worst node degree minus 1
  int subcarrier_excess = 0;   // worst slot count minus N
  double qos_bits = 0.0;
  double causality_bits = 0.0;
  double box_bps = 0.0;
  bool consistent = true;  // delta = 1 exactly where r > 0
  long budget_excess = 0;  // active link-slots beyond a UAV budget
  double max_scaled = 0.0;
};

inline ScheduleCheck check_schedule(const Schedule& sched, const RateAllocation& rates,
                                    const Scenario& s, const CsiTensor& csi) {
  ScheduleCheck out;
  for (int t = 0; t < s.num_slots; ++t) {
    for (int node = 1; node < s.num_nodes(); ++node)
      out.half_duplex_excess =
          std::max(out.half_duplex_excess, node_degree(sched, s, node, t) - 1);
    out.subcarrier_excess = std::max(
        out.subcarrier_excess, slot_active_count(sched, s, t) - s.num_subcarriers);
  }
  for (int i = 0; i < s.num_tx(); ++i)
    for (int j = 1; j <= s.num_rx(); ++j) {
      if (i == j) continue;
      for (int t = 0; t < s.num_slots; ++t) {
        const double r = rates.bps.at(i, j, t);
        if ((r > 0.0) != (sched.on.at(i, j, t) != 0)) out.consistent = false;
        out.box_bps = std::max(out.box_bps, std::max(r - csi.peak_rate_bps.at(i, j, t), -r));
      }
    }
  const ResidualReport rr = constraint_residuals(rates, s, csi, ForcedZeroSet{});
  out.qos_bits = rr.qos_bits;
  out.causality_bits = rr.causality_bits;
  out.max_scaled = std::max({rr.max_scaled, static_cast<double>(out.half_duplex_excess),
                             static_cast<double>(out.subcarrier_excess)});
  if (s.uav_energy_budget_j)
    for (int u = 1; u <= s.num_uavs; ++u) {
      long count = 0;
      for (int j = 1; j <= s.num_rx(); ++j)
        if (j != u)
          for (int t = 0; t < s.num_slots; ++t)
            if (sched.on.at(u, j, t)) ++count;
      const double cap = (*s.uav_energy_budget_j)[u - 1] / s.max_power_w[u];
      const long beyond = count - static_cast<long>(std::floor(cap + 1e-9));
      out.budget_excess = std::max(out.budget_excess, beyond);
    }
  return out;
}

}  // namespace seasched
