#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"

namespace rqiqn::agent {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  // Nearest-obstacle distance at next_state, for adaptive fraction distortion.
  std::optional<double> next_context;
};

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void insert(Transition t) {
    if (!std::isfinite(t.reward)) throw std::invalid_argument("ReplayBuffer: non-finite reward");
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[inserted_ % capacity_] = std::move(t);
    }
    ++inserted_;
  }

  /// Uniform sampling with replacement.
  [[nodiscard]] std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("ReplayBuffer: sampling from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] std::uint64_t inserted() const noexcept { return inserted_; }
  [[nodiscard]] const Transition& operator[](std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::uint64_t inserted_ = 0;
};

}  // namespace rqiqn::agent
