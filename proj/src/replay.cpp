#include "dsr/replay.hpp"

#include "dsr/error.hpp"

namespace dsr {

ReplayBuffer::ReplayBuffer(std::size_t capacity, double mundane_reward)
    : capacity_(capacity), mundane_(mundane_reward) {
  require(capacity >= 1, ErrCode::RangeError, "replay capacity must be >= 1");
}

void ReplayBuffer::add(const CellTransition& t) {
  if (main_.size() < capacity_) {
    main_.push_back(t);
  } else {
    main_[head_] = t;
    head_ = (head_ + 1) % capacity_;
  }
  if (t.reward != mundane_) {
    if (salient_.size() < capacity_) {
      salient_.push_back(t);
    } else {
      salient_[salient_head_] = t;
      salient_head_ = (salient_head_ + 1) % capacity_;
    }
  }
}

const CellTransition& ReplayBuffer::nth_main(std::size_t i) const {
  if (main_.size() < capacity_) return main_[i];
  return main_[(head_ + i) % capacity_];
}

std::vector<CellTransition> ReplayBuffer::sample(std::size_t n, SampleMode mode,
                                                 double salient_prob, Rng& rng) const {
  require(!main_.empty(), ErrCode::EmptyBuffer, "sampling from an empty replay buffer");
  std::vector<CellTransition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool from_salient = mode == SampleMode::RewardPrioritized && !salient_.empty() &&
                              rng.uniform() < salient_prob;
    if (from_salient)
      out.push_back(salient_[rng.uniform_int(salient_.size())]);
    else
      out.push_back(main_[rng.uniform_int(main_.size())]);
  }
  return out;
}

std::vector<CellTransition> ReplayBuffer::main_contents() const {
  std::vector<CellTransition> out;
  out.reserve(main_.size());
  for (std::size_t i = 0; i < main_.size(); ++i) out.push_back(nth_main(i));
  return out;
}

std::vector<CellTransition> ReplayBuffer::salient_contents() const {
  std::vector<CellTransition> out;
  out.reserve(salient_.size());
  if (salient_.size() < capacity_) {
    out = salient_;
  } else {
    for (std::size_t i = 0; i < salient_.size(); ++i)
      out.push_back(salient_[(salient_head_ + i) % capacity_]);
  }
  return out;
}

void ReplayBuffer::restore(const std::vector<CellTransition>& main,
                           const std::vector<CellTransition>& salient) {
  require(main.size() <= capacity_ && salient.size() <= capacity_, ErrCode::Corrupt,
          "restored replay contents exceed capacity");
  // Contents arrive oldest-first, so the next overwrite lands on index 0.
  main_ = main;
  head_ = 0;
  salient_ = salient;
  salient_head_ = 0;
}

}  // namespace dsr
