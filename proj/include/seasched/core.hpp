#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seasched {

inline constexpr int kSchemaVersion = 1;

// Scenario document or CLI input that does not conform to the schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structurally well-formed input that violates a model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A demanded data volume cannot be delivered. Carries the first
// unsatisfiable (vessel node, slot) pair when one is known.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, int vessel_node_in = -1, int slot_in = -1)
      : std::runtime_error(what), vessel_node(vessel_node_in), slot(slot_in) {}
  int vessel_node = -1;  // node index, -1 when unknown
  int slot = -1;         // 0-based slot index, -1 when unknown
};

// Exhaustive enumeration would exceed the configured budget.
class EnumerationLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A guaranteed bound was violated at runtime; indicates a bug.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// One directed link in one time slot. tx is a transmitter node index
// (0 = shore BS), rx a receiver node index (>= 1), slot is 0-based.
struct LinkKey {
  int tx = 0;
  int rx = 0;
  int slot = 0;
  auto operator<=>(const LinkKey&) const = default;
};

// Dense (transmitter, receiver, slot) container. Receiver indices run
// from 1 to num_rx, slots from 0 to num_slots-1.
template <typename T>
class LinkTensor {
 public:
  LinkTensor() = default;
  LinkTensor(int num_tx, int num_rx, int num_slots, T init = T{})
      : num_tx_(num_tx), num_rx_(num_rx), num_slots_(num_slots),
        data_(static_cast<std::size_t>(num_tx) * num_rx * num_slots, init) {}

  int num_tx() const { return num_tx_; }
  int num_rx() const { return num_rx_; }
  int num_slots() const { return num_slots_; }
  bool same_shape(const LinkTensor& o) const {
    return num_tx_ == o.num_tx_ && num_rx_ == o.num_rx_ && num_slots_ == o.num_slots_;
  }

  T& at(int tx, int rx, int slot) { return data_[index(tx, rx, slot)]; }
  const T& at(int tx, int rx, int slot) const { return data_[index(tx, rx, slot)]; }
  T& at(const LinkKey& k) { return at(k.tx, k.rx, k.slot); }
  const T& at(const LinkKey& k) const { return at(k.tx, k.rx, k.slot); }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  friend bool operator==(const LinkTensor&, const LinkTensor&) = default;

 private:
  std::size_t index(int tx, int rx, int slot) const {
    if (tx < 0 || tx >= num_tx_ || rx < 1 || rx > num_rx_ || slot < 0 || slot >= num_slots_)
      throw std::out_of_range("LinkTensor: index (" + std::to_string(tx) + "," +
                              std::to_string(rx) + "," + std::to_string(slot) + ") out of range");
    return (static_cast<std::size_t>(tx) * num_rx_ + (rx - 1)) * num_slots_ + slot;
  }

  int num_tx_ = 0, num_rx_ = 0, num_slots_ = 0;
  std::vector<T> data_;
};

}  // namespace seasched
