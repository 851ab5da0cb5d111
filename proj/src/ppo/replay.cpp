#include "ringdrive/ppo/replay.hpp"

#include "ringdrive/errors.hpp"

namespace ringdrive::ppo {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) return;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count,
                                                      Rng& rng) const {
  if (items_.empty()) throw InvalidArg("cannot sample from an empty replay buffer");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = rng.index(items_.size());
  return idx;
}

ReplayBuffer ReplayBuffer::restore(std::size_t capacity,
                                   std::vector<Transition> slots,
                                   std::size_t head) {
  if (slots.size() > capacity || (head != 0 && head >= slots.size()))
    throw InvalidArg("inconsistent replay buffer snapshot");
  ReplayBuffer b(capacity);
  b.items_ = std::move(slots);
  b.head_ = head;
  return b;
}

}  // namespace ringdrive::ppo
