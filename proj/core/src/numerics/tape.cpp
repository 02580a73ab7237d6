#include "dgtl/numerics/tape.hpp"

#include <atomic>

#include "dgtl/errors.hpp"

namespace dgtl::numerics {

namespace {
std::atomic<std::uint64_t> g_next_tape_id{1};
thread_local Tape* t_active_tape = nullptr;
}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1, std::memory_order_relaxed)) {}

void Tape::record(std::function<void()> backward) {
  nodes_.push_back(std::move(backward));
}

void Tape::note_leaf(const Tensor& t) {
  if (leaf_seen_.insert(t.id()).second) leaves_.push_back(t);
}

std::vector<Tensor> Tape::backward(const Tensor& loss) {
  if (consumed_) throw ValueError("backward called twice on one tape");
  if (!loss.defined() || loss.size() != 1) {
    throw ValueError("backward requires a scalar loss");
  }
  if (loss.tape_id() != id_) {
    throw ValueError("loss tensor was not produced on the active tape");
  }
  consumed_ = true;
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  return leaves_;
}

Tape* active_tape() noexcept { return t_active_tape; }

TapeScope::TapeScope(Tape& tape) noexcept : saved_(t_active_tape) {
  t_active_tape = &tape;
}

TapeScope::~TapeScope() { t_active_tape = saved_; }

TapePause::TapePause() noexcept : saved_(t_active_tape) { t_active_tape = nullptr; }

TapePause::~TapePause() { t_active_tape = saved_; }

}  // namespace dgtl::numerics
