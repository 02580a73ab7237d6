#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dgtl::numerics {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor with an optional gradient buffer. A Tensor is a
// cheap handle onto shared storage. Values are written by the operation
// that produces the tensor and are immutable afterwards, except that
// optimizers update parameter values between tapes; gradients accumulate
// additively until zero_grad().
//
// tape_id identifies the tape whose forward pass produced the tensor
// (0 for leaves such as parameters and constants).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int dim(int axis) const;
  std::size_t size() const;
  int rows() const;  // rank-2 only
  int cols() const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // initialization / optimizer use
  double at(std::size_t i) const;
  double at(int r, int c) const;

  bool requires_grad() const;
  void set_requires_grad(bool rg);

  bool has_grad() const;
  std::vector<double>& grad();  // lazily allocates zeros
  const std::vector<double>& grad_view() const;  // throws if absent
  void zero_grad();

  std::uint64_t tape_id() const;
  void set_tape_id(std::uint64_t id);

  // Applies the global precision mode to the stored values: Float32 mode
  // rounds to binary32. Returns false if any value is non-finite.
  bool apply_mode_rounding();

  bool same_storage(const Tensor& other) const;
  const void* id() const;  // stable identity for keying maps

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  Impl& ref() const;
};

}  // namespace dgtl::numerics
