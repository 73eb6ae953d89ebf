#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "seasched/core.hpp"

// Network instance description: node roles and per-slot geometry, radio
// parameters, and QoS demands. Node order is fixed: shore BS (node 0),
// UAVs (1..I), relay vessels (I+1..I+J'), sink vessels (I+J'+1..I+J).
// Transmitters are nodes 0..I+J', receivers are nodes 1..I+J.

namespace seasched {

enum class NodeRole { ShoreBs, Uav, RelayVessel, SinkVessel };

inline const char* to_string(NodeRole r) {
  switch (r) {
    case NodeRole::ShoreBs: return "shore_bs";
    case NodeRole::Uav: return "uav";
    case NodeRole::RelayVessel: return "relay_vessel";
    case NodeRole::SinkVessel: return "sink_vessel";
  }
  return "?";
}

struct Waypoint {
  double x = 0.0, y = 0.0, z = 0.0;  // meters; z is antenna/flight height
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct NodeSpec {
  NodeRole role = NodeRole::SinkVessel;
  std::vector<Waypoint> trajectory;  // one waypoint per slot
  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

// Data volume that must reach a vessel before deadline_slot * slot_seconds.
struct QosTarget {
  double volume_bits = 0.0;
  int deadline_slot = 1;  // 1-based, in [1, T]
  friend bool operator==(const QosTarget&, const QosTarget&) = default;
};

struct AirToGroundParams {
  double a = 5.0188;
  double b = 0.3511;
  double eta_los_db = 2.3;
  double eta_nlos_db = 34.0;
  friend bool operator==(const AirToGroundParams&, const AirToGroundParams&) = default;
};

struct Scenario {
  int num_uavs = 0;           // I
  int num_vessels = 0;        // J
  int num_relay_vessels = 0;  // J'
  int num_slots = 0;          // T
  int num_subcarriers = 0;    // N

  double slot_seconds = 0.0;
  double subcarrier_bandwidth_hz = 0.0;
  double noise_power_w = 0.0;
  double carrier_mhz = 0.0;
  double env_constant_c_db = 0.0;
  AirToGroundParams air;

  std::vector<double> max_power_w;  // per transmitter, size I+J'+1
  std::vector<NodeSpec> nodes;      // size 1+I+J
  std::vector<QosTarget> qos;       // size J, vessel order

  // Optional per-UAV on-board energy budget (J), size I when present.
  std::optional<std::vector<double>> uav_energy_budget_j;

  nlohmann::json metadata = nlohmann::json::object();

  int num_nodes() const { return 1 + num_uavs + num_vessels; }
  int num_tx() const { return 1 + num_uavs + num_relay_vessels; }
  int num_rx() const { return num_uavs + num_vessels; }

  bool is_uav(int node) const { return node >= 1 && node <= num_uavs; }
  bool is_vessel(int node) const { return node > num_uavs && node < num_nodes(); }
  // Nodes that may appear as transmitters other than the BS.
  bool is_relay_capable(int node) const { return node >= 1 && node < num_tx(); }
  bool is_sink_vessel(int node) const { return node >= num_tx() && node < num_nodes(); }

  int vessel_of_node(int node) const { return node - num_uavs - 1; }  // 0-based vessel id
  int node_of_vessel(int vessel) const { return 1 + num_uavs + vessel; }

  bool valid_link(int tx, int rx) const {
    return tx >= 0 && tx < num_tx() && rx >= 1 && rx <= num_rx() && tx != rx;
  }

  const Waypoint& position(int node, int slot) const { return nodes[node].trajectory[slot]; }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline double distance_m(const Waypoint& p, const Waypoint& q) {
  const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline void validate(const Scenario& s) {
  auto fail = [](const std::string& msg) { throw ValidationError("scenario: " + msg); };
  if (s.num_vessels < 1) fail("J must be >= 1 (at least one vessel)");
  if (s.num_uavs < 0) fail("I must be >= 0");
  if (s.num_relay_vessels < 0 || s.num_relay_vessels > s.num_vessels)
    fail("J' must satisfy 0 <= J' <= J");
  if (s.num_slots < 1) fail("T must be >= 1");
  if (s.num_subcarriers < 1) fail("N must be >= 1");
  if (s.num_subcarriers > s.num_uavs + s.num_vessels) fail("N must satisfy N <= I+J");
  if (!(s.slot_seconds > 0.0)) fail("slot_seconds must be positive");
  if (!(s.subcarrier_bandwidth_hz > 0.0)) fail("subcarrier_bandwidth_hz must be positive");
  if (!(s.noise_power_w > 0.0)) fail("noise_power_w must be positive");
  if (!(s.carrier_mhz > 0.0)) fail("carrier_mhz must be positive");
  if (static_cast<int>(s.max_power_w.size()) != s.num_tx())
    fail("max_power_w must have one entry per transmitter (" + std::to_string(s.num_tx()) + ")");
  for (std::size_t i = 0; i < s.max_power_w.size(); ++i)
    if (!(s.max_power_w[i] > 0.0))
      fail("max_power_w[" + std::to_string(i) + "] must be positive");
  if (static_cast<int>(s.nodes.size()) != s.num_nodes())
    fail("nodes must have " + std::to_string(s.num_nodes()) + " entries");
  for (int n = 0; n < s.num_nodes(); ++n) {
    NodeRole expect = n == 0                  ? NodeRole::ShoreBs
                      : n <= s.num_uavs       ? NodeRole::Uav
                      : n < s.num_tx()        ? NodeRole::RelayVessel
                                              : NodeRole::SinkVessel;
    if (s.nodes[n].role != expect)
      fail("nodes[" + std::to_string(n) + "] role must be " + to_string(expect) +
           " given the declared counts");
    if (static_cast<int>(s.nodes[n].trajectory.size()) != s.num_slots)
      fail("nodes[" + std::to_string(n) + "] trajectory must have T=" +
           std::to_string(s.num_slots) + " waypoints");
    for (const Waypoint& w : s.nodes[n].trajectory) {
      if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.z))
        fail("nodes[" + std::to_string(n) + "] has a non-finite waypoint");
      if (!(w.z > 0.0)) fail("nodes[" + std::to_string(n) + "] waypoint height must be > 0");
    }
  }
  if (static_cast<int>(s.qos.size()) != s.num_vessels)
    fail("qos must have one entry per vessel (" + std::to_string(s.num_vessels) + ")");
  for (int v = 0; v < s.num_vessels; ++v) {
    const QosTarget& q = s.qos[v];
    if (!(q.volume_bits >= 0.0) || !std::isfinite(q.volume_bits))
      fail("qos[" + std::to_string(v) + "].volume_bits must be >= 0");
    if (q.deadline_slot < 1 || q.deadline_slot > s.num_slots)
      fail("qos[" + std::to_string(v) + "].deadline_slot must lie in [1, T]");
  }
  if (s.uav_energy_budget_j) {
    if (static_cast<int>(s.uav_energy_budget_j->size()) != s.num_uavs)
      fail("uav_energy_budget_j must have one entry per UAV");
    for (double e : *s.uav_energy_budget_j)
      if (!(e > 0.0)) fail("uav_energy_budget_j entries must be positive");
  }
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key,
                                           const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("scenario document: missing field " + path + "." + key);
  return *it;
}

inline double require_number(const nlohmann::json& j, const char* key, const std::string& path) {
  const nlohmann::json& f = require_field(j, key, path);
  if (!f.is_number()) throw ParseError("scenario document: field " + path + "." + key +
                                       " must be a number");
  return f.get<double>();
}

inline int require_int(const nlohmann::json& j, const char* key, const std::string& path) {
  const nlohmann::json& f = require_field(j, key, path);
  if (!f.is_number_integer()) throw ParseError("scenario document: field " + path + "." + key +
                                               " must be an integer");
  return f.get<int>();
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& doc) {
  using detail::require_field;
  using detail::require_int;
  using detail::require_number;

  if (!doc.is_object()) throw ParseError("scenario document: top level must be an object");
  const int version = require_int(doc, "schema_version", "$");
  if (version != kSchemaVersion)
    throw ParseError("scenario document: unsupported schema_version " + std::to_string(version));
  const nlohmann::json& sc = require_field(doc, "scenario", "$");

  Scenario s;
  const nlohmann::json& counts = require_field(sc, "counts", "scenario");
  s.num_uavs = require_int(counts, "uavs", "scenario.counts");
  s.num_vessels = require_int(counts, "vessels", "scenario.counts");
  s.num_relay_vessels = require_int(counts, "relay_vessels", "scenario.counts");
  s.num_slots = require_int(counts, "slots", "scenario.counts");
  s.num_subcarriers = require_int(counts, "subcarriers", "scenario.counts");

  const nlohmann::json& radio = require_field(sc, "radio", "scenario");
  s.slot_seconds = require_number(radio, "slot_seconds", "scenario.radio");
  s.subcarrier_bandwidth_hz = require_number(radio, "subcarrier_bandwidth_hz", "scenario.radio");
  s.noise_power_w = require_number(radio, "noise_power_w", "scenario.radio");
  s.carrier_mhz = require_number(radio, "carrier_mhz", "scenario.radio");
  s.env_constant_c_db = require_number(radio, "env_constant_c_db", "scenario.radio");
  const nlohmann::json& air = require_field(radio, "air_params", "scenario.radio");
  s.air.a = require_number(air, "a", "scenario.radio.air_params");
  s.air.b = require_number(air, "b", "scenario.radio.air_params");
  s.air.eta_los_db = require_number(air, "eta_los_db", "scenario.radio.air_params");
  s.air.eta_nlos_db = require_number(air, "eta_nlos_db", "scenario.radio.air_params");
  const nlohmann::json& pw = require_field(radio, "max_power_w", "scenario.radio");
  if (!pw.is_array()) throw ParseError("scenario document: scenario.radio.max_power_w must be an array");
  s.max_power_w = pw.get<std::vector<double>>();

  const nlohmann::json& nodes = require_field(sc, "nodes", "scenario");
  if (!nodes.is_array()) throw ParseError("scenario document: scenario.nodes must be an array");
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const std::string path = "scenario.nodes[" + std::to_string(n) + "]";
    const nlohmann::json& jn = nodes[n];
    NodeSpec spec;
    const nlohmann::json& role = require_field(jn, "role", path);
    const std::string rs = role.get<std::string>();
    if (rs == "shore_bs") spec.role = NodeRole::ShoreBs;
    else if (rs == "uav") spec.role = NodeRole::Uav;
    else if (rs == "relay_vessel") spec.role = NodeRole::RelayVessel;
    else if (rs == "sink_vessel") spec.role = NodeRole::SinkVessel;
    else throw ParseError("scenario document: " + path + ".role has unknown value \"" + rs + "\"");
    const nlohmann::json& tr = require_field(jn, "trajectory", path);
    if (!tr.is_array()) throw ParseError("scenario document: " + path + ".trajectory must be an array");
    for (const nlohmann::json& wp : tr) {
      if (!wp.is_array() || wp.size() != 3 || !wp[0].is_number() || !wp[1].is_number() ||
          !wp[2].is_number())
        throw ParseError("scenario document: " + path + ".trajectory entries must be [x,y,z]");
      spec.trajectory.push_back({wp[0].get<double>(), wp[1].get<double>(), wp[2].get<double>()});
    }
    s.nodes.push_back(std::move(spec));
  }

  // QoS entries are keyed by vessel node index; omitted vessels default to
  // zero volume with deadline T.
  s.qos.assign(static_cast<std::size_t>(std::max(s.num_vessels, 0)),
               QosTarget{0.0, std::max(s.num_slots, 1)});
  const nlohmann::json& qos = require_field(sc, "qos", "scenario");
  if (!qos.is_array()) throw ParseError("scenario document: scenario.qos must be an array");
  std::vector<bool> seen(s.qos.size(), false);
  for (std::size_t k = 0; k < qos.size(); ++k) {
    const std::string path = "scenario.qos[" + std::to_string(k) + "]";
    const nlohmann::json& jq = qos[k];
    const int node = require_int(jq, "vessel", path);
    if (node <= s.num_uavs || node >= s.num_nodes())
      throw ParseError("scenario document: " + path + ".vessel=" + std::to_string(node) +
                       " is not a vessel node index");
    const int v = s.vessel_of_node(node);
    if (seen[v]) throw ParseError("scenario document: " + path + " duplicates vessel " +
                                  std::to_string(node));
    seen[v] = true;
    s.qos[v].volume_bits = require_number(jq, "volume_bits", path);
    if (jq.contains("deadline_slot")) s.qos[v].deadline_slot = require_int(jq, "deadline_slot", path);
    else s.qos[v].deadline_slot = s.num_slots;
  }

  if (sc.contains("uav_energy_budget_j")) {
    const nlohmann::json& b = sc["uav_energy_budget_j"];
    if (!b.is_null()) {
      if (!b.is_array())
        throw ParseError("scenario document: scenario.uav_energy_budget_j must be an array");
      s.uav_energy_budget_j = b.get<std::vector<double>>();
    }
  }
  if (doc.contains("metadata")) s.metadata = doc["metadata"];

  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario document: not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  nlohmann::json& sc = doc["scenario"];
  sc["counts"] = {{"uavs", s.num_uavs},
                  {"vessels", s.num_vessels},
                  {"relay_vessels", s.num_relay_vessels},
                  {"slots", s.num_slots},
                  {"subcarriers", s.num_subcarriers}};
  sc["radio"] = {{"slot_seconds", s.slot_seconds},
                 {"subcarrier_bandwidth_hz", s.subcarrier_bandwidth_hz},
                 {"noise_power_w", s.noise_power_w},
                 {"carrier_mhz", s.carrier_mhz},
                 {"env_constant_c_db", s.env_constant_c_db},
                 {"air_params",
                  {{"a", s.air.a},
                   {"b", s.air.b},
                   {"eta_los_db", s.air.eta_los_db},
                   {"eta_nlos_db", s.air.eta_nlos_db}}},
                 {"max_power_w", s.max_power_w}};
  sc["nodes"] = nlohmann::json::array();
  for (const NodeSpec& n : s.nodes) {
    nlohmann::json traj = nlohmann::json::array();
    for (const Waypoint& w : n.trajectory) traj.push_back({w.x, w.y, w.z});
    sc["nodes"].push_back({{"role", to_string(n.role)}, {"trajectory", std::move(traj)}});
  }
  sc["qos"] = nlohmann::json::array();
  for (int v = 0; v < s.num_vessels; ++v)
    sc["qos"].push_back({{"vessel", s.node_of_vessel(v)},
                         {"volume_bits", s.qos[v].volume_bits},
                         {"deadline_slot", s.qos[v].deadline_slot}});
  if (s.uav_energy_budget_j) sc["uav_energy_budget_j"] = *s.uav_energy_budget_j;
  doc["metadata"] = s.metadata;
  return doc;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Random topology generation: BS on the area edge, vessels on straight
// constant-speed lanes inside the square, UAVs on straight trajectories.

struct TopologyParams {
  double side_m = 5000.0;  // square area side
  int num_uavs = 1;
  int num_vessels = 9;
  int num_relay_vessels = 8;
  int num_slots = 10;
  int num_subcarriers = 9;
  double vessel_speed_mps = 5.0;
  double uav_speed_mps = 15.0;

  double bs_height_m = 50.0;
  double uav_height_m = 100.0;
  double vessel_antenna_m = 5.0;

  double slot_seconds = 30.0;
  double subcarrier_bandwidth_hz = 1e6;
  double noise_power_w = 3.9810717055349695e-15;  // -114 dBm
  double carrier_mhz = 2000.0;
  double env_constant_c_db = 1.0;
  AirToGroundParams air{};
  double bs_power_w = 50.0;
  double node_power_w = 10.0;

  // Coverage-hole mode: BS sits in a corner, the last few vessel lanes are
  // confined to the far subarea, and the UAV flies from near the BS into it.
  bool coverage_hole = false;
  int num_far_vessels = 4;
  double far_distance_m = 5000.0;
  double uav_start_radius_m = 3000.0;
};

namespace detail {

inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::vector<Waypoint> straight_lane(std::mt19937_64& rng, double side, double z,
                                           double speed, double dt, int T,
                                           bool far_only, double far_from_x, double far_from_y,
                                           double far_dist) {
  for (int attempt = 0; attempt < 4096; ++attempt) {
    const double x0 = u01(rng) * side;
    const double y0 = u01(rng) * side;
    const double heading = u01(rng) * 2.0 * std::numbers::pi;
    const double vx = speed * std::cos(heading);
    const double vy = speed * std::sin(heading);
    std::vector<Waypoint> traj;
    traj.reserve(T);
    bool ok = true;
    for (int t = 0; t < T && ok; ++t) {
      const double x = x0 + vx * dt * t;
      const double y = y0 + vy * dt * t;
      if (x < 0.0 || x > side || y < 0.0 || y > side) ok = false;
      if (far_only && std::hypot(x - far_from_x, y - far_from_y) <= far_dist) ok = false;
      traj.push_back({x, y, z});
    }
    if (ok) return traj;
  }
  throw ValidationError("generate_random_topology: could not fit a lane in the area "
                        "(speed too high for the given side and horizon?)");
}

}  // namespace detail

inline Scenario generate_random_topology(const TopologyParams& p, std::uint64_t seed) {
  if (p.num_vessels < 1)
    throw ValidationError("generate_random_topology: at least one vessel is required");

  std::mt19937_64 rng(seed);
  const int T = p.num_slots;

  for (int attempt = 0; attempt < 100; ++attempt) {
    Scenario s;
    s.num_uavs = p.num_uavs;
    s.num_vessels = p.num_vessels;
    s.num_relay_vessels = p.num_relay_vessels;
    s.num_slots = T;
    s.num_subcarriers = p.num_subcarriers;
    s.slot_seconds = p.slot_seconds;
    s.subcarrier_bandwidth_hz = p.subcarrier_bandwidth_hz;
    s.noise_power_w = p.noise_power_w;
    s.carrier_mhz = p.carrier_mhz;
    s.env_constant_c_db = p.env_constant_c_db;
    s.air = p.air;
    s.max_power_w.assign(s.num_tx(), p.node_power_w);
    s.max_power_w[0] = p.bs_power_w;

    // Shore BS: fixed point on the perimeter.
    Waypoint bs;
    if (p.coverage_hole) {
      bs = {0.0, 0.0, p.bs_height_m};
    } else {
      const int edge = static_cast<int>(rng() % 4);
      const double off = detail::u01(rng) * p.side_m;
      switch (edge) {
        case 0: bs = {off, 0.0, p.bs_height_m}; break;
        case 1: bs = {off, p.side_m, p.bs_height_m}; break;
        case 2: bs = {0.0, off, p.bs_height_m}; break;
        default: bs = {p.side_m, off, p.bs_height_m}; break;
      }
    }
    s.nodes.push_back({NodeRole::ShoreBs, std::vector<Waypoint>(T, bs)});

    for (int u = 0; u < p.num_uavs; ++u) {
      std::vector<Waypoint> traj;
      if (p.coverage_hole) {
        // Start near the BS, end in the far subarea, straight line between.
        Waypoint a{}, b{};
        for (int tries = 0;; ++tries) {
          a = {detail::u01(rng) * p.side_m, detail::u01(rng) * p.side_m, p.uav_height_m};
          if (std::hypot(a.x - bs.x, a.y - bs.y) < p.uav_start_radius_m) break;
          if (tries > 4096) throw ValidationError("generate_random_topology: no UAV start point");
        }
        for (int tries = 0;; ++tries) {
          b = {detail::u01(rng) * p.side_m, detail::u01(rng) * p.side_m, p.uav_height_m};
          if (std::hypot(b.x - bs.x, b.y - bs.y) > p.far_distance_m) break;
          if (tries > 4096) throw ValidationError("generate_random_topology: no UAV end point");
        }
        for (int t = 0; t < T; ++t) {
          const double frac = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
          traj.push_back({a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y), p.uav_height_m});
        }
      } else {
        traj = detail::straight_lane(rng, p.side_m, p.uav_height_m, p.uav_speed_mps,
                                     p.slot_seconds, T, false, 0, 0, 0);
      }
      s.nodes.push_back({NodeRole::Uav, std::move(traj)});
    }

    const int far_count = p.coverage_hole ? std::min(p.num_far_vessels, p.num_vessels) : 0;
    for (int v = 0; v < p.num_vessels; ++v) {
      const bool far = v >= p.num_vessels - far_count;
      std::vector<Waypoint> traj = detail::straight_lane(
          rng, p.side_m, p.vessel_antenna_m, p.vessel_speed_mps, p.slot_seconds, T, far,
          bs.x, bs.y, p.far_distance_m);
      const NodeRole role = v < p.num_relay_vessels ? NodeRole::RelayVessel : NodeRole::SinkVessel;
      s.nodes.push_back({role, std::move(traj)});
    }

    s.qos.assign(p.num_vessels, QosTarget{0.0, T});

    // Links modeled with the air-to-ground loss need the slant distance to
    // be at least the UAV height; resample the whole topology otherwise.
    bool clear = true;
    for (int a = 0; a < s.num_nodes() && clear; ++a) {
      for (int b = a + 1; b < s.num_nodes() && clear; ++b) {
        const bool a_uav = s.is_uav(a), b_uav = s.is_uav(b);
        for (int t = 0; t < T && clear; ++t) {
          const double d = distance_m(s.position(a, t), s.position(b, t));
          if (d <= 0.0) clear = false;
          if (a_uav != b_uav) {
            const double hu = a_uav ? s.position(a, t).z : s.position(b, t).z;
            if (d < hu * (1.0 + 1e-9)) clear = false;
          }
        }
      }
    }
    if (!clear) continue;

    s.metadata = {{"generator", "seasched"},
                  {"seed", seed},
                  {"side_m", p.side_m},
                  {"vessel_speed_mps", p.vessel_speed_mps},
                  {"uav_speed_mps", p.uav_speed_mps},
                  {"coverage_hole", p.coverage_hole}};
    validate(s);
    return s;
  }
  throw ValidationError("generate_random_topology: no channel-valid topology after 100 attempts");
}

}  // namespace seasched
