#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace progd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
};

/// Dense double-precision tensor with value semantics over a shared buffer.
/// The gradient buffer is allocated lazily and always matches `data` in size.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor of(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vec2(double x, double y);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rank() const { return impl_->shape.size(); }
  bool requires_grad() const { return impl_->requires_grad; }

  std::span<const double> data() const { return impl_->data; }
  /// Mutable view of the values; writes bypass the tape (parameter updates).
  std::span<double> raw_data() { return impl_->data; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  /// Gradient buffer, allocated as zeros on first use.
  std::span<double> grad_buffer();
  void zero_grad();

  double value() const;  // scalar tensors only
  double at(std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const {
    return impl_->data[i * impl_->shape[1] + j];
  }

  TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Records one backward closure per tensor operation, in execution order.
/// Operand tensors always precede their consumers, so reverse iteration is a
/// valid reverse-topological sweep. backward() may run once per tape; a
/// second call without clear() is rejected.
class Tape {
 public:
  void backward(const Tensor& root);
  void clear();
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

 private:
  std::vector<std::function<void()>> nodes_;
  bool recording_ = true;
  bool consumed_ = false;
};

// ---- primitive operations ----
// Elementwise binaries support leading-dimension broadcast only: the smaller
// operand's shape must be a suffix of the larger one's.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor log(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor softmax_lastdim(Tape& tape, const Tensor& x);
/// Per-coordinate max over a non-empty set of same-shape tensors. The
/// gradient routes to the argmax element only; ties go to the lowest index.
Tensor max_over_set(Tape& tape, const std::vector<Tensor>& xs);
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor concat_lastdim(Tape& tape, const std::vector<Tensor>& xs);
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows);
Tensor row(Tape& tape, const Tensor& x, std::size_t index);
Tensor element(Tape& tape, const Tensor& x, std::size_t index);
Tensor transpose(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor sum_all(Tape& tape, const Tensor& x);
Tensor mean_rows(Tape& tape, const Tensor& x);
/// 0.5 x^2 for |x| < beta, |x| - 0.5 beta otherwise, per coordinate.
Tensor smooth_l1(Tape& tape, const Tensor& x, double beta);

}  // namespace progd
