#include "pit/tensor.hpp"

#include <numeric>
#include <sstream>

namespace pit {

std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
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

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<detail::TensorStorage>()) {
  impl_->data.assign(numel_of(shape), fill);
  shape_ = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorStorage>()) {
  if (values.size() != numel_of(shape)) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " needs " +
                     std::to_string(numel_of(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  shape_ = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return shape_;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<double> Tensor::data() { return impl_->data; }
std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }

bool Tensor::has_grad() const {
  return impl_ && !impl_->grad.empty() && impl_->grad.size() == impl_->data.size();
}

std::span<double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return impl_->grad;
}

std::span<double> Tensor::ensure_grad() {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(shape(), impl_->data, false);
}

Tensor Tensor::view(Shape new_shape) const {
  if (numel_of(new_shape) != numel()) {
    throw ShapeError("cannot view " + shape_str(shape()) + " as " +
                     shape_str(new_shape));
  }
  Tensor t;
  t.impl_ = impl_;
  t.shape_ = std::move(new_shape);
  return t;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
  output.set_requires_grad(true);
  entries_.push_back({std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  for (auto& e : entries_) {
    e.output.ensure_grad();
    e.output.zero_grad();
    for (auto& in : e.inputs) {
      if (in.requires_grad()) in.ensure_grad();
    }
  }
  Tensor seed = loss;
  seed.ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

bool needs_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace pit
