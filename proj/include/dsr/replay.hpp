#pragma once

#include <cstddef>
#include <vector>

#include "dsr/gridworld.hpp"
#include "dsr/rng.hpp"

namespace dsr {

/// Compact stored transition; observations are re-encoded from cells when a
/// batch is assembled, which keeps a million-entry buffer small enough to
/// snapshot.
struct CellTransition {
  Cell from;
  int action = 0;
  double reward = 0.0;
  Cell to;
  bool terminal = false;

  friend bool operator==(const CellTransition&, const CellTransition&) = default;
};

enum class SampleMode { Uniform, RewardPrioritized };

/// Ring buffer of transitions plus a separate store of "salient" ones:
/// transitions whose reward differs from the mundane per-step penalty (in
/// this environment every reward is nonzero, so the salient set keeps the
/// rare goal and water events).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double mundane_reward);

  void add(const CellTransition& t);

  std::size_t size() const { return main_.size(); }
  std::size_t salient_size() const { return salient_.size(); }
  bool empty() const { return main_.empty(); }
  double mundane_reward() const { return mundane_; }
  std::size_t capacity() const { return capacity_; }

  /// With-replacement sample. RewardPrioritized draws each element from the
  /// salient store with probability salient_prob (falling back to uniform
  /// while the salient store is empty).
  std::vector<CellTransition> sample(std::size_t n, SampleMode mode, double salient_prob,
                                     Rng& rng) const;

  /// Oldest-first snapshot views (FIFO order).
  std::vector<CellTransition> main_contents() const;
  std::vector<CellTransition> salient_contents() const;
  void restore(const std::vector<CellTransition>& main,
               const std::vector<CellTransition>& salient);

 private:
  const CellTransition& nth_main(std::size_t i) const;  // i = 0 is oldest

  std::size_t capacity_;
  double mundane_;
  std::vector<CellTransition> main_;
  std::size_t head_ = 0;  // insert position once full
  std::vector<CellTransition> salient_;
  std::size_t salient_head_ = 0;
};

}  // namespace dsr
