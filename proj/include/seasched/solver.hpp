#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "seasched/objective.hpp"

// Solver for the relaxed joint scheduling problem: minimize total energy
// over continuous rates subject to per-node time-share limits, the per-slot
// subcarrier budget, QoS volume floors, relay causality, rate boxes, and an
// arbitrary set of rates pinned to zero (applied by variable deletion).
//
// The inner concave variable of the surrogate is eliminated in closed form,
// leaving a separable strictly-convex objective over a polytope. We maximize
// the Lagrangian dual of the general (non-box) constraints with a spectral
// projected-gradient ascent; the box constraints are absorbed into the
// per-link closed-form primal minimizer, which doubles as exact primal
// recovery. Weak duality gives a rigorous infeasibility certificate: any
// dual value above the energy of the all-peak-rate plan proves the
// constraint system empty.

namespace seasched {

// Link-slots whose rates are pinned to zero. Kept sorted and unique so the
// content hash and set algebra are canonical.
class ForcedZeroSet {
 public:
  ForcedZeroSet() = default;
  explicit ForcedZeroSet(std::vector<LinkKey> items) : items_(std::move(items)) { normalize(); }

  void insert(const LinkKey& k) {
    auto it = std::lower_bound(items_.begin(), items_.end(), k);
    if (it == items_.end() || *it != k) items_.insert(it, k);
  }
  void merge(const ForcedZeroSet& other) {
    std::vector<LinkKey> merged;
    merged.reserve(items_.size() + other.items_.size());
    std::set_union(items_.begin(), items_.end(), other.items_.begin(), other.items_.end(),
                   std::back_inserter(merged));
    items_ = std::move(merged);
  }
  bool contains(const LinkKey& k) const {
    return std::binary_search(items_.begin(), items_.end(), k);
  }
  bool contains_all(const ForcedZeroSet& other) const {
    return std::includes(items_.begin(), items_.end(), other.items_.begin(), other.items_.end());
  }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<LinkKey>& items() const { return items_; }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    for (const LinkKey& k : items_) {
      mix(static_cast<std::uint64_t>(k.tx));
      mix(static_cast<std::uint64_t>(k.rx));
      mix(static_cast<std::uint64_t>(k.slot));
    }
    return h;
  }

  friend bool operator==(const ForcedZeroSet&, const ForcedZeroSet&) = default;

 private:
  void normalize() {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }
  std::vector<LinkKey> items_;
};

enum class SolveStatus { Converged, IterationLimit, Infeasible };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

struct SolverReport {
  double objective_joules = 0.0;
  long iterations = 0;
  double max_primal_residual = 0.0;   // scaled, dimensionless
  double stationarity_residual = 0.0; // scaled, dimensionless
  SolveStatus status = SolveStatus::Converged;
  int infeasible_vessel_node = -1;  // certificate when status == Infeasible
  int infeasible_slot = -1;         // 0-based
  int num_variables = 0;
  int num_constraints = 0;
};

struct SolverOptions {
  double tol = 1e-6;
  long max_iterations = 100000;
  // Drop the time-share and subcarrier rows; used when rates are optimized
  // under an already-fixed integral schedule.
  bool time_share_rows = true;
  std::ostream* trace = nullptr;  // per-iteration CSV: iter,objective,max_residual
};

// Dual variables keyed by constraint identity, so a solution for one
// forced-zero set can warm-start a solve under another.
struct DualWarmStart {
  std::vector<std::pair<std::uint64_t, double>> rows;  // sorted by key
  double find(std::uint64_t key) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), key,
                               [](const auto& p, std::uint64_t k) { return p.first < k; });
    return (it != rows.end() && it->first == key) ? it->second : 0.0;
  }
};

namespace detail {

enum class RowFamily : int { HalfDuplex = 0, Subcarrier, Qos, Causality, Budget };

inline std::uint64_t row_key(RowFamily f, int node, int slot) {
  return (static_cast<std::uint64_t>(f) << 48) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(node)) << 24) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(slot + 1));
}

struct RowMeta {
  RowFamily family;
  int node;  // constraint owner (receiver node, vessel node, relay node, UAV node); -1 for subcarrier
  int slot;  // 0-based; -1 for budget rows
  double scale;
};

// The relaxed problem in normalized variables u = r / R, u in [0,1].
struct RelaxedProblem {
  const Scenario* scn = nullptr;
  const CsiTensor* csi = nullptr;

  std::vector<LinkKey> vars;
  LinkTensor<int> var_of;       // -1 where deleted / invalid
  std::vector<double> cap_bps;  // R per variable
  std::vector<double> c0;       // sigma2 * dt / beta, J
  std::vector<double> d0;       // d(energy)/du at u = 0+
  std::vector<double> z_peak;   // effective-SNR variable at peak power
  std::vector<double> e_peak;   // energy at u = 1, J

  // Row-major and column-major copies of the constraint matrix A (A u <= b).
  std::vector<int> row_ptr, row_cols;
  std::vector<double> row_vals;
  std::vector<int> col_ptr, col_rows;
  std::vector<double> col_vals;
  std::vector<double> b;
  std::vector<RowMeta> meta;

  double energy_cap = 0.0;  // energy of the all-peak plan, J
  int infeasible_vessel_node = -1, infeasible_slot = -1;
  bool provably_infeasible = false;

  int num_vars() const { return static_cast<int>(vars.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }
};

inline RelaxedProblem build_relaxed_problem(const Scenario& s, const CsiTensor& csi,
                                            const ForcedZeroSet& zeros, bool time_share_rows) {
  RelaxedProblem p;
  p.scn = &s;
  p.csi = &csi;
  const int T = s.num_slots;
  const double dt = s.slot_seconds;
  const double bw = s.subcarrier_bandwidth_hz;

  p.var_of = LinkTensor<int>(csi.num_tx, csi.num_rx, csi.num_slots, -1);
  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < T; ++t) {
        if (i >= 1 && t == 0) continue;  // relays hold no data before slot 1
        if (zeros.contains({i, j, t})) continue;
        const double cap = csi.peak_rate_bps.at(i, j, t);
        if (!(cap > 0.0)) continue;
        p.var_of.at(i, j, t) = static_cast<int>(p.vars.size());
        p.vars.push_back({i, j, t});
        const double beta = csi.beta.at(i, j, t);
        const double scale = s.noise_power_w * dt / beta;
        const double zp = effective_w(beta, s.max_power_w[i], s.noise_power_w);
        p.cap_bps.push_back(cap);
        p.c0.push_back(scale);
        p.d0.push_back(scale * std::numbers::ln2 * cap / bw);
        p.z_peak.push_back(zp);
        p.e_peak.push_back(scale * (zp * zp - zp));
        p.energy_cap += scale * (zp * zp - zp);
      }
    }

  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<RowMeta> metas;
  std::vector<double> bs;

  auto push_row = [&](RowFamily fam, int node, int slot,
                      std::vector<std::pair<int, double>> entries, double rhs) {
    if (entries.empty()) return;
    double scale = std::abs(rhs);
    for (const auto& e : entries) scale = std::max(scale, std::abs(e.second));
    if (!(scale > 0.0)) return;
    for (auto& e : entries) e.second /= scale;
    rows.push_back(std::move(entries));
    metas.push_back({fam, node, slot, scale});
    bs.push_back(rhs / scale);
  };

  if (time_share_rows) {
    // Per-node receive+forward share and per-slot subcarrier budget.
    for (int t = 0; t < T; ++t) {
      for (int j = 1; j <= csi.num_rx; ++j) {
        std::vector<std::pair<int, double>> entries;
        for (int i = 0; i < csi.num_tx; ++i) {
          const int v = (i == j) ? -1 : p.var_of.at(i, j, t);
          if (v >= 0) entries.emplace_back(v, 1.0);
        }
        if (s.is_relay_capable(j))
          for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
            const int v = (j2 == j) ? -1 : p.var_of.at(j, j2, t);
            if (v >= 0) entries.emplace_back(v, 1.0);
          }
        if (entries.size() > 1)
          push_row(RowFamily::HalfDuplex, j, t, std::move(entries), 1.0);
      }
      std::vector<std::pair<int, double>> all;
      for (int i = 0; i < csi.num_tx; ++i)
        for (int j = 1; j <= csi.num_rx; ++j) {
          const int v = (i == j) ? -1 : p.var_of.at(i, j, t);
          if (v >= 0) all.emplace_back(v, 1.0);
        }
      if (static_cast<int>(all.size()) > s.num_subcarriers)
        push_row(RowFamily::Subcarrier, -1, t, std::move(all),
                 static_cast<double>(s.num_subcarriers));
    }
  }

  // QoS floors: delivered-minus-forwarded volume at each slot from the
  // deadline on. For pure sinks the held volume is nondecreasing, so only
  // the deadline row is kept.
  for (int v = 0; v < s.num_vessels; ++v) {
    const double volume = s.qos[v].volume_bits;
    if (!(volume > 0.0)) continue;
    const int node = s.node_of_vessel(v);
    const int first = s.qos[v].deadline_slot - 1;
    const int last = s.is_relay_capable(node) ? T - 1 : first;
    // Quick certificate: even at peak rates the demanded volume cannot
    // arrive by the deadline.
    {
      double cap_bits = 0.0;
      for (int tau = 0; tau <= first; ++tau) {
        double slot_cap = 0.0;
        for (int i = 0; i < csi.num_tx; ++i) {
          const int var = (i == node) ? -1 : p.var_of.at(i, node, tau);
          if (var < 0) continue;
          const double r = p.cap_bps[var];
          slot_cap = time_share_rows ? std::max(slot_cap, r) : slot_cap + r;
        }
        cap_bits += slot_cap * dt;
      }
      if (cap_bits < volume * (1.0 - 1e-12)) {
        p.provably_infeasible = true;
        p.infeasible_vessel_node = node;
        p.infeasible_slot = first;
      }
    }
    for (int t = first; t <= last; ++t) {
      std::vector<std::pair<int, double>> entries;
      for (int tau = 0; tau <= t; ++tau) {
        for (int i = 0; i < csi.num_tx; ++i) {
          const int var = (i == node) ? -1 : p.var_of.at(i, node, tau);
          if (var >= 0) entries.emplace_back(var, -p.cap_bps[var] * dt);
        }
        if (s.is_relay_capable(node))
          for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
            const int var = (j2 == node) ? -1 : p.var_of.at(node, j2, tau);
            if (var >= 0) entries.emplace_back(var, p.cap_bps[var] * dt);
          }
      }
      if (entries.empty()) {
        p.provably_infeasible = true;
        p.infeasible_vessel_node = node;
        p.infeasible_slot = t;
        continue;
      }
      push_row(RowFamily::Qos, node, t, std::move(entries), -volume);
    }
  }

  // Causality: what a relay forwards in slot t+1 is bounded by what it
  // holds at the end of slot t.
  for (int node = 1; node < s.num_tx(); ++node) {
    for (int t = 0; t + 1 < T; ++t) {
      std::vector<std::pair<int, double>> entries;
      bool any_out = false;
      for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
        const int var = (j2 == node) ? -1 : p.var_of.at(node, j2, t + 1);
        if (var >= 0) {
          entries.emplace_back(var, p.cap_bps[var] * dt);
          any_out = true;
        }
      }
      if (!any_out) continue;
      for (int tau = 0; tau <= t; ++tau) {
        for (int i = 0; i < csi.num_tx; ++i) {
          const int var = (i == node) ? -1 : p.var_of.at(i, node, tau);
          if (var >= 0) entries.emplace_back(var, -p.cap_bps[var] * dt);
        }
        for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
          const int var = (j2 == node) ? -1 : p.var_of.at(node, j2, tau);
          if (var >= 0) entries.emplace_back(var, p.cap_bps[var] * dt);
        }
      }
      push_row(RowFamily::Causality, node, t, std::move(entries), 0.0);
    }
  }

  // Optional per-UAV transmit-time budget in the relaxed (time-share) domain.
  if (s.uav_energy_budget_j) {
    for (int u = 1; u <= s.num_uavs; ++u) {
      const double budget = (*s.uav_energy_budget_j)[u - 1] / (s.max_power_w[u] * dt);
      std::vector<std::pair<int, double>> entries;
      for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
        if (j2 == u) continue;
        for (int t = 0; t < T; ++t) {
          const int var = p.var_of.at(u, j2, t);
          if (var >= 0) entries.emplace_back(var, 1.0);
        }
      }
      if (static_cast<double>(entries.size()) > budget)
        push_row(RowFamily::Budget, u, -1, std::move(entries), budget);
    }
  }

  // Assemble CSR and its transpose.
  const int m = static_cast<int>(rows.size());
  const int n = p.num_vars();
  p.meta = std::move(metas);
  p.b = std::move(bs);
  p.row_ptr.assign(m + 1, 0);
  for (int k = 0; k < m; ++k) p.row_ptr[k + 1] = p.row_ptr[k] + static_cast<int>(rows[k].size());
  p.row_cols.resize(p.row_ptr[m]);
  p.row_vals.resize(p.row_ptr[m]);
  std::vector<int> col_count(n, 0);
  for (int k = 0; k < m; ++k) {
    int at = p.row_ptr[k];
    for (const auto& e : rows[k]) {
      p.row_cols[at] = e.first;
      p.row_vals[at] = e.second;
      ++at;
      ++col_count[e.first];
    }
  }
  p.col_ptr.assign(n + 1, 0);
  for (int l = 0; l < n; ++l) p.col_ptr[l + 1] = p.col_ptr[l] + col_count[l];
  p.col_rows.resize(p.col_ptr[n]);
  p.col_vals.resize(p.col_ptr[n]);
  std::vector<int> fill(n, 0);
  for (int k = 0; k < m; ++k)
    for (int at = p.row_ptr[k]; at < p.row_ptr[k + 1]; ++at) {
      const int l = p.row_cols[at];
      const int pos = p.col_ptr[l] + fill[l]++;
      p.col_rows[pos] = k;
      p.col_vals[pos] = p.row_vals[at];
    }
  return p;
}

// Closed-form minimizer of e_l(u) + c*u over u in [0,1] and its objective
// contribution. The stationary point solves e_l'(u) = d0 * z^2 = -c; the
// sensitivity du/dc = -1/e_l''(u) feeds the dual Newton step.
struct PrimalPoint {
  double u = 0.0;
  double energy = 0.0;
  double sensitivity = 0.0;  // -du/dc >= 0; zero at either box face
};

inline PrimalPoint primal_point(const RelaxedProblem& p, int l, double c,
                                double bandwidth_hz) {
  PrimalPoint out;
  if (c >= -p.d0[l]) return out;  // inactive at u = 0
  const double z2 = -c / p.d0[l];
  const double zp = p.z_peak[l];
  if (z2 >= zp * zp) {
    out.u = 1.0;
    out.energy = p.e_peak[l];
    return out;
  }
  const double z = std::sqrt(z2);
  const double r = bandwidth_hz * (2.0 * std::log2(z) -
                                   std::numbers::log2e * (1.0 - 1.0 / z));
  out.u = std::clamp(r / p.cap_bps[l], 0.0, 1.0);
  out.energy = p.c0[l] * (z2 - z);
  // e''(u) = 2 c0 ln2^2 z^3 R^2 / (B^2 (2z - 1)) in normalized units.
  const double r_cap = p.cap_bps[l];
  const double e2 = 2.0 * p.c0[l] * std::numbers::ln2 * std::numbers::ln2 * z2 * z * r_cap *
                    r_cap / (bandwidth_hz * bandwidth_hz * (2.0 * z - 1.0));
  out.sensitivity = 1.0 / e2;
  return out;
}

struct DualEval {
  double q = 0.0;               // dual value, J
  double primal_energy = 0.0;   // J
  std::vector<double> u;
  std::vector<double> w;        // per-variable sensitivity -du/dc
  std::vector<double> g;        // A u - b (scaled residuals)
};

inline void eval_dual(const RelaxedProblem& p, const std::vector<double>& lam, DualEval& out) {
  const int n = p.num_vars();
  const int m = p.num_rows();
  const double bw = p.scn->subcarrier_bandwidth_hz;
  out.u.assign(n, 0.0);
  out.w.assign(n, 0.0);
  out.g.assign(m, 0.0);
  out.q = 0.0;
  out.primal_energy = 0.0;
  for (int l = 0; l < n; ++l) {
    double c = 0.0;
    for (int at = p.col_ptr[l]; at < p.col_ptr[l + 1]; ++at)
      c += p.col_vals[at] * lam[p.col_rows[at]];
    const PrimalPoint pt = primal_point(p, l, c, bw);
    out.u[l] = pt.u;
    out.w[l] = pt.sensitivity;
    out.primal_energy += pt.energy;
    out.q += pt.energy + c * pt.u;
  }
  for (int k = 0; k < m; ++k) {
    double acc = -p.b[k];
    for (int at = p.row_ptr[k]; at < p.row_ptr[k + 1]; ++at)
      acc += p.row_vals[at] * out.u[p.row_cols[at]];
    out.g[k] = acc;
    out.q -= p.b[k] * lam[k];
  }
}

inline double projected_gradient_norm(const std::vector<double>& lam,
                                      const std::vector<double>& g) {
  double worst = 0.0;
  for (std::size_t k = 0; k < lam.size(); ++k) {
    const double pg = lam[k] > 0.0 ? std::abs(g[k]) : std::max(g[k], 0.0);
    worst = std::max(worst, pg);
  }
  return worst;
}

}  // namespace detail

struct SolveResult {
  RateAllocation rates;
  SolverReport report;
  DualWarmStart duals;
};

inline SolveResult solve_relaxed(const Scenario& s, const CsiTensor& csi,
                                 const ForcedZeroSet& zeros, const SolverOptions& opt = {},
                                 const DualWarmStart* warm = nullptr) {
  using namespace detail;
  for (const LinkKey& k : zeros.items())
    if (!s.valid_link(k.tx, k.rx) || k.slot < 0 || k.slot >= s.num_slots)
      throw ValidationError("solve_relaxed: forced-zero triple (" + std::to_string(k.tx) + "," +
                            std::to_string(k.rx) + "," + std::to_string(k.slot + 1) +
                            ") is not a valid link-slot");

  RelaxedProblem p = build_relaxed_problem(s, csi, zeros, opt.time_share_rows);
  SolveResult res;
  res.rates = zero_rates(csi);
  res.report.num_variables = p.num_vars();
  res.report.num_constraints = p.num_rows();

  if (p.provably_infeasible) {
    res.report.status = SolveStatus::Infeasible;
    res.report.infeasible_vessel_node = p.infeasible_vessel_node;
    res.report.infeasible_slot = p.infeasible_slot;
    res.report.objective_joules = std::numeric_limits<double>::infinity();
    return res;
  }

  const int m = p.num_rows();
  std::vector<double> lam(m, 0.0);
  if (warm)
    for (int k = 0; k < m; ++k)
      lam[k] = std::max(0.0, warm->find(row_key(p.meta[k].family, p.meta[k].node, p.meta[k].slot)));

  DualEval cur;
  eval_dual(p, lam, cur);

  const double infeasibility_bar = p.energy_cap + 1e-6 * (1.0 + std::abs(p.energy_cap));
  constexpr int kMemory = 10;
  std::vector<double> recent(kMemory, cur.q);
  double alpha = (1.0 + std::abs(cur.q)) /
                 std::max(1e-12, std::inner_product(cur.g.begin(), cur.g.end(), cur.g.begin(), 0.0));
  alpha = std::clamp(alpha, 1e-12, 1e12);

  long it = 0;
  double pg = projected_gradient_norm(lam, cur.g);
  SolveStatus status = pg <= opt.tol ? SolveStatus::Converged : SolveStatus::IterationLimit;

  std::vector<double> trial(m), step(m);
  std::vector<int> act(m), act_pos(m);
  Eigen::MatrixXd hess;
  Eigen::VectorXd rhs;
  DualEval next;
  for (it = 0; it < opt.max_iterations && m > 0; ++it) {
    pg = projected_gradient_norm(lam, cur.g);
    if (opt.trace) {
      double viol = 0.0;
      for (double gk : cur.g) viol = std::max(viol, gk);
      (*opt.trace) << it << ',' << cur.primal_energy << ',' << std::max(0.0, viol) << '\n';
    }
    if (pg <= opt.tol) {
      status = SolveStatus::Converged;
      break;
    }
    if (cur.q > infeasibility_bar) {
      status = SolveStatus::Infeasible;
      break;
    }

    // Newton step on the active rows. The dual is concave and piecewise
    // smooth with curvature A diag(w) A^T; rows with lam = 0 that do not
    // push (g <= 0) are frozen.
    bool accepted = false;
    {
      int na = 0;
      for (int k = 0; k < m; ++k) {
        act_pos[k] = -1;
        if (lam[k] > 0.0 || cur.g[k] > 0.0) {
          act[na] = k;
          act_pos[k] = na;
          ++na;
        }
      }
      if (na > 0) {
        hess.setZero(na, na);
        for (int l = 0; l < p.num_vars(); ++l) {
          const double wl = cur.w[l];
          if (wl <= 0.0) continue;
          for (int at1 = p.col_ptr[l]; at1 < p.col_ptr[l + 1]; ++at1) {
            const int k1 = act_pos[p.col_rows[at1]];
            if (k1 < 0) continue;
            const double v1 = wl * p.col_vals[at1];
            for (int at2 = p.col_ptr[l]; at2 < p.col_ptr[l + 1]; ++at2) {
              const int k2 = act_pos[p.col_rows[at2]];
              if (k2 >= 0 && k2 <= k1) hess(k1, k2) += v1 * p.col_vals[at2];
            }
          }
        }
        double trace = 0.0;
        for (int k = 0; k < na; ++k) trace += hess(k, k);
        const double ridge = 1e-12 * (1.0 + trace / na);
        for (int k = 0; k < na; ++k) hess(k, k) += ridge;
        rhs.resize(na);
        for (int k = 0; k < na; ++k) rhs(k) = cur.g[act[k]];
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess.selfadjointView<Eigen::Lower>());
        if (ldlt.info() == Eigen::Success) {
          const Eigen::VectorXd d = ldlt.solve(rhs);
          double tau = 1.0;
          for (int ls = 0; ls < 8 && !accepted; ++ls) {
            for (int k = 0; k < m; ++k) trial[k] = lam[k];
            for (int k = 0; k < na; ++k)
              trial[act[k]] = std::max(0.0, lam[act[k]] + tau * d(k));
            eval_dual(p, trial, next);
            const double pg_next = projected_gradient_norm(trial, next.g);
            if (next.q > cur.q || pg_next <= 0.9 * pg) accepted = true;
            else tau *= 0.25;
          }
        }
      }
    }

    if (!accepted) {
      // Spectral projected-gradient fallback with a nonmonotone watchdog.
      const double q_floor = *std::min_element(recent.begin(), recent.end());
      for (int bt = 0; bt < 60 && !accepted; ++bt) {
        double gd = 0.0;
        for (int k = 0; k < m; ++k) {
          trial[k] = std::max(0.0, lam[k] + alpha * cur.g[k]);
          step[k] = trial[k] - lam[k];
          gd += cur.g[k] * step[k];
        }
        if (gd <= 0.0) break;  // numerically pinned
        eval_dual(p, trial, next);
        if (next.q >= q_floor + 1e-4 * gd) accepted = true;
        else alpha *= 0.5;
      }
      if (!accepted) {
        status = pg <= 10.0 * opt.tol ? SolveStatus::Converged : SolveStatus::IterationLimit;
        break;
      }
      // Barzilai-Borwein step for the next fallback round.
      double ss = 0.0, sy = 0.0;
      for (int k = 0; k < m; ++k) {
        const double sk = step[k];
        ss += sk * sk;
        sy += sk * (cur.g[k] - next.g[k]);
      }
      alpha = sy > 1e-300 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(alpha * 10.0, 1e12);
    }

    lam.swap(trial);
    std::swap(cur, next);
    recent[it % kMemory] = cur.q;
  }
  if (m == 0) status = SolveStatus::Converged;

  res.report.iterations = it;
  res.report.status = status;
  res.report.stationarity_residual = projected_gradient_norm(lam, cur.g);
  double viol = 0.0;
  for (double gk : cur.g) viol = std::max(viol, gk);
  res.report.max_primal_residual = std::max(0.0, viol);
  res.report.objective_joules =
      status == SolveStatus::Infeasible ? std::numeric_limits<double>::infinity()
                                        : cur.primal_energy;
  if (status == SolveStatus::Infeasible) {
    // Surface the most stressed QoS row as the certificate when the quick
    // check did not already provide one.
    double worst = -1.0;
    for (int k = 0; k < m; ++k)
      if (p.meta[k].family == RowFamily::Qos && lam[k] > worst) {
        worst = lam[k];
        res.report.infeasible_vessel_node = p.meta[k].node;
        res.report.infeasible_slot = p.meta[k].slot;
      }
    return res;
  }

  for (int l = 0; l < p.num_vars(); ++l) {
    const LinkKey& k = p.vars[l];
    res.rates.bps.at(k) = cur.u[l] * p.cap_bps[l];
  }
  res.duals.rows.reserve(m);
  for (int k = 0; k < m; ++k)
    res.duals.rows.emplace_back(row_key(p.meta[k].family, p.meta[k].node, p.meta[k].slot), lam[k]);
  std::sort(res.duals.rows.begin(), res.duals.rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return res;
}

// Direct (matrix-free) violation measurements of one rate plan; the loops
// here are written independently of the CSR assembly above on purpose.
struct ResidualReport {
  double half_duplex = 0.0;     // dimensionless share excess
  double subcarrier = 0.0;      // dimensionless share excess
  double qos_bits = 0.0;        // bits short of a volume floor
  double causality_bits = 0.0;  // bits forwarded beyond held volume
  double box_bps = 0.0;         // rate outside [0, R]
  double forced_zero_bps = 0.0; // rate on a pinned link
  double max_scaled = 0.0;      // all families, solver row normalization
};

inline ResidualReport constraint_residuals(const RateAllocation& rates, const Scenario& s,
                                           const CsiTensor& csi, const ForcedZeroSet& zeros) {
  if (!rates.bps.same_shape(csi.beta))
    throw std::invalid_argument("constraint_residuals: rate tensor shape mismatch");
  ResidualReport out;
  const int T = s.num_slots;
  const double dt = s.slot_seconds;
  auto scaled = [&out](double violation, double scale) {
    if (scale > 0.0) out.max_scaled = std::max(out.max_scaled, violation / scale);
  };

  auto share_in = [&](int j, int t) {
    double acc = 0.0;
    for (int i = 0; i < csi.num_tx; ++i) {
      if (i == j) continue;
      const double cap = csi.peak_rate_bps.at(i, j, t);
      if (cap > 0.0) acc += rates.bps.at(i, j, t) / cap;
    }
    return acc;
  };
  auto share_out = [&](int j, int t) {
    double acc = 0.0;
    if (!s.is_relay_capable(j)) return acc;
    for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
      if (j2 == j) continue;
      const double cap = csi.peak_rate_bps.at(j, j2, t);
      if (cap > 0.0) acc += rates.bps.at(j, j2, t) / cap;
    }
    return acc;
  };

  for (int t = 0; t < T; ++t) {
    double slot_share = 0.0;
    for (int i = 0; i < csi.num_tx; ++i)
      for (int j = 1; j <= csi.num_rx; ++j) {
        if (i == j) continue;
        const double cap = csi.peak_rate_bps.at(i, j, t);
        if (cap > 0.0) slot_share += rates.bps.at(i, j, t) / cap;
      }
    const double sc = slot_share - s.num_subcarriers;
    out.subcarrier = std::max(out.subcarrier, sc);
    scaled(sc, static_cast<double>(s.num_subcarriers));
    for (int j = 1; j <= csi.num_rx; ++j) {
      const double hd = share_in(j, t) + share_out(j, t) - 1.0;
      out.half_duplex = std::max(out.half_duplex, hd);
      scaled(hd, 1.0);
    }
  }

  // Held volume per node and slot (received minus forwarded, cumulative).
  auto held = [&](int node, int upto) {
    double bits = 0.0;
    for (int tau = 0; tau <= upto; ++tau) {
      for (int i = 0; i < csi.num_tx; ++i)
        if (i != node) bits += rates.bps.at(i, node, tau) * dt;
      if (s.is_relay_capable(node))
        for (int j2 = 1; j2 <= csi.num_rx; ++j2)
          if (j2 != node) bits -= rates.bps.at(node, j2, tau) * dt;
    }
    return bits;
  };

  for (int v = 0; v < s.num_vessels; ++v) {
    const double volume = s.qos[v].volume_bits;
    if (!(volume > 0.0)) continue;
    const int node = s.node_of_vessel(v);
    const int first = s.qos[v].deadline_slot - 1;
    const int last = s.is_relay_capable(node) ? T - 1 : first;
    for (int t = first; t <= last; ++t) {
      const double gap = volume - held(node, t);
      out.qos_bits = std::max(out.qos_bits, gap);
      scaled(gap, volume);
    }
  }

  for (int node = 1; node < s.num_tx(); ++node) {
    for (int t = -1; t + 1 < T; ++t) {
      double fwd = 0.0;
      double cap_scale = 0.0;
      for (int j2 = 1; j2 <= csi.num_rx; ++j2) {
        if (j2 == node) continue;
        fwd += rates.bps.at(node, j2, t + 1) * dt;
        cap_scale = std::max(cap_scale, csi.peak_rate_bps.at(node, j2, t + 1) * dt);
      }
      const double have = t < 0 ? 0.0 : held(node, t);
      const double gap = fwd - have;
      out.causality_bits = std::max(out.causality_bits, gap);
      scaled(gap, std::max(cap_scale, 1.0));
    }
  }

  for (int i = 0; i < csi.num_tx; ++i)
    for (int j = 1; j <= csi.num_rx; ++j) {
      if (i == j) continue;
      for (int t = 0; t < T; ++t) {
        const double r = rates.bps.at(i, j, t);
        const double cap = csi.peak_rate_bps.at(i, j, t);
        const double over = std::max(r - cap, -std::min(r, 0.0));
        out.box_bps = std::max(out.box_bps, over);
        scaled(over, std::max(cap, 1.0));
      }
    }
  for (const LinkKey& k : zeros.items()) {
    const double r = std::abs(rates.bps.at(k));
    out.forced_zero_bps = std::max(out.forced_zero_bps, r);
    scaled(r, std::max(csi.peak_rate_bps.at(k), 1.0));
  }
  return out;
}

}  // namespace seasched
