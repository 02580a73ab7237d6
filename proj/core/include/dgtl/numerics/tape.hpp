#pragma once

#include <cstdint>
#include <functional>
#include <unordered_set>
#include <vector>

#include "dgtl/numerics/tensor.hpp"

namespace dgtl::numerics {

// Reverse-mode record of one forward pass (define-by-run; a fresh tape is
// built per pass). Operations executed while a TapeScope is active append
// backward closures in creation order; backward() replays them in reverse,
// which is a valid topological order. A tape can be consumed exactly once.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  void record(std::function<void()> backward);
  void note_leaf(const Tensor& t);

  // Seeds d(loss)/d(loss) = 1, replays all closures in reverse and returns
  // the leaf tensors (requires_grad inputs not produced on this tape) in
  // first-registration order; each holds its accumulated gradient.
  // Throws if loss is not a scalar, was not produced on this tape, or if
  // the tape was consumed already.
  std::vector<Tensor> backward(const Tensor& loss);

 private:
  std::uint64_t id_;
  std::vector<std::function<void()>> nodes_;
  std::vector<Tensor> leaves_;
  std::unordered_set<const void*> leaf_seen_;
  bool consumed_ = false;
};

// Thread-local active tape. Ops record onto it when at least one input
// requires a gradient; with no active tape they evaluate values only.
Tape* active_tape() noexcept;

class TapeScope {
 public:
  explicit TapeScope(Tape& tape) noexcept;
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* saved_;
};

// Suspends recording for the current scope.
class TapePause {
 public:
  TapePause() noexcept;
  ~TapePause();
  TapePause(const TapePause&) = delete;
  TapePause& operator=(const TapePause&) = delete;

 private:
  Tape* saved_;
};

}  // namespace dgtl::numerics
