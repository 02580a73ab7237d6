#include "dgtl/numerics/tensor.hpp"

#include <cmath>
#include <sstream>

#include "dgtl/errors.hpp"
#include "dgtl/numerics/precision.hpp"

namespace dgtl::numerics {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t tape_id = 0;
};

Tensor::Impl& Tensor::ref() const {
  if (!impl_) throw ValueError("use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values.assign(n, 0.0);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.impl_->values) v = value;
  t.apply_mode_rounding();
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  t.apply_mode_rounding();
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return ref().shape; }

int Tensor::rank() const { return static_cast<int>(ref().shape.size()); }

int Tensor::dim(int axis) const {
  const Shape& s = ref().shape;
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::size_t Tensor::size() const { return ref().values.size(); }

int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix tensor " + shape_str(shape()));
  return ref().shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix tensor " + shape_str(shape()));
  return ref().shape[1];
}

const std::vector<double>& Tensor::values() const { return ref().values; }

std::vector<double>& Tensor::mutable_values() { return ref().values; }

double Tensor::at(std::size_t i) const {
  const auto& v = ref().values;
  if (i >= v.size()) throw ShapeError("flat index out of range");
  return v[i];
}

double Tensor::at(int r, int c) const {
  const Impl& im = ref();
  if (im.shape.size() != 2) throw ShapeError("at(r,c) on tensor " + shape_str(im.shape));
  if (r < 0 || r >= im.shape[0] || c < 0 || c >= im.shape[1]) {
    throw ShapeError("index out of range for " + shape_str(im.shape));
  }
  return im.values[static_cast<std::size_t>(r) * im.shape[1] + c];
}

bool Tensor::requires_grad() const { return ref().requires_grad; }

void Tensor::set_requires_grad(bool rg) { ref().requires_grad = rg; }

bool Tensor::has_grad() const { return !ref().grad.empty(); }

std::vector<double>& Tensor::grad() {
  Impl& im = ref();
  if (!im.requires_grad) {
    throw ValueError("gradient requested on tensor with requires_grad=false");
  }
  if (im.grad.empty()) im.grad.assign(im.values.size(), 0.0);
  return im.grad;
}

const std::vector<double>& Tensor::grad_view() const {
  const Impl& im = ref();
  if (im.grad.empty()) throw ValueError("tensor has no gradient");
  return im.grad;
}

void Tensor::zero_grad() {
  Impl& im = ref();
  if (!im.grad.empty()) im.grad.assign(im.values.size(), 0.0);
}

std::uint64_t Tensor::tape_id() const { return ref().tape_id; }

void Tensor::set_tape_id(std::uint64_t id) { ref().tape_id = id; }

bool Tensor::apply_mode_rounding() {
  Impl& im = ref();
  bool finite = true;
  if (precision() == Precision::Float32) {
    for (double& v : im.values) {
      v = static_cast<double>(static_cast<float>(v));
      if (!std::isfinite(v)) finite = false;
    }
  } else {
    for (double v : im.values) {
      if (!std::isfinite(v)) {
        finite = false;
        break;
      }
    }
  }
  return finite;
}

bool Tensor::same_storage(const Tensor& other) const {
  return impl_ != nullptr && impl_ == other.impl_;
}

const void* Tensor::id() const { return impl_.get(); }

}  // namespace dgtl::numerics
