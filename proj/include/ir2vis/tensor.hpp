#ifndef IR2VIS_TENSOR_HPP
#define IR2VIS_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ir2vis/errors.hpp"

namespace ir2vis {

/// Dense rank-4 shape, batch x channels x height x width.
struct Shape4 {
  int64_t n = 0, c = 0, h = 0, w = 0;
  int64_t count() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

/// One recorded differentiable operation. Nodes form the tape: parents are
/// the operation's inputs and always precede the node in execution order, so
/// a reverse topological sweep visits every operation exactly once.
template <class T>
struct TapeNode {
  Shape4 shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily; same length as value once present
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<TapeNode<T>>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(TapeNode<T>&)> backprop;

  bool tracked() const { return requires_grad || static_cast<bool>(backprop); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

/// Shared handle to a tape node. Copies alias the same storage; value data is
/// immutable after an op produces it, except for leaf tensors (parameters)
/// whose values the optimizer updates between forward passes.
template <class T>
class Tensor {
public:
  Tensor() : node_(std::make_shared<TapeNode<T>>()) {}
  explicit Tensor(Shape4 s, T fill = T(0), bool requires_grad = false);
  static Tensor from_vector(Shape4 s, std::vector<T> data,
                            bool requires_grad = false);

  const Shape4& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->value.size()); }
  bool defined() const { return node_->shape.count() > 0; }

  const std::vector<T>& values() const { return node_->value; }
  std::vector<T>& values() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool grad_defined() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  const std::string& name() const { return node_->name; }
  void set_name(std::string n) { node_->name = std::move(n); }

  T operator()(int64_t n, int64_t c, int64_t h, int64_t w) const {
    const Shape4& s = node_->shape;
    return node_->value[((n * s.c + c) * s.h + h) * s.w + w];
  }
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    const Shape4& s = node_->shape;
    return node_->value[((n * s.c + c) * s.h + h) * s.w + w];
  }

  /// Value copy with no recorded history.
  Tensor detach() const;

  std::shared_ptr<TapeNode<T>> node() const { return node_; }

private:
  std::shared_ptr<TapeNode<T>> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// tensor on the tape with requires_grad set; calling twice without zeroing
/// accumulates (by contract, to support multi-loss schedules).
/// Throws ContractError if loss is not scalar, TapeError if loss has no
/// recorded operations behind it.
template <class T>
void backward(const Tensor<T>& loss);

// --- construction helpers -------------------------------------------------

template <class T>
Tensor<T> scalar_tensor(T v, bool requires_grad = false) {
  return Tensor<T>::from_vector(Shape4{1, 1, 1, 1}, {v}, requires_grad);
}

extern template struct TapeNode<float>;
extern template struct TapeNode<double>;
extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

}  // namespace ir2vis

#endif  // IR2VIS_TENSOR_HPP
