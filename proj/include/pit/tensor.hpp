#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pit {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorStorage {
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first backward pass touches it
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape hold on to inputs and outputs of recorded operations. Use
/// clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient buffer. Tensors are handles, so the buffer stays writable
  /// through a const handle (backward rules accumulate into captured inputs).
  std::span<double> grad() const;
  /// Allocates a zero gradient if none exists yet and returns it.
  std::span<double> ensure_grad();
  void zero_grad();

  /// Deep copy of the values; the copy does not require grad.
  Tensor clone() const;
  /// Same storage and gradient buffer under a new shape with the same element
  /// count. Gradients reaching the view land in the original tensor.
  Tensor view(Shape shape) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorStorage> impl_;
  Shape shape_;
};

/// Ordered record of differentiable operations.
///
/// Operations record themselves on the tape that is active on the calling
/// thread (see TapeScope) when at least one input requires grad. backward()
/// replays the records in reverse order.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn);
  /// Seeds d(loss)/d(loss) = 1 and propagates to every recorded input.
  void backward(const Tensor& loss);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

  /// Tape active on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// True if an operation on these inputs must be recorded on the active tape.
bool needs_record(std::initializer_list<const Tensor*> inputs);

}  // namespace pit
