#include "ir2vis/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace ir2vis {

std::string Shape4::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <class T>
Tensor<T>::Tensor(Shape4 s, T fill, bool requires_grad)
    : node_(std::make_shared<TapeNode<T>>()) {
  node_->shape = s;
  node_->value.assign(static_cast<size_t>(s.count()), fill);
  node_->requires_grad = requires_grad;
}

template <class T>
Tensor<T> Tensor<T>::from_vector(Shape4 s, std::vector<T> data,
                                 bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != s.count())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + s.str());
  Tensor<T> t;
  t.node_->shape = s;
  t.node_->value = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  Tensor<T> t;
  t.node_->shape = node_->shape;
  t.node_->value = node_->value;
  return t;
}

template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.shape().count() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        loss.shape().str());
  auto root = loss.node();
  if (!root->backprop && !root->requires_grad)
    throw TapeError("backward: loss carries no recorded operations");

  // Post-order DFS; the resulting order places every node after its parents.
  std::vector<TapeNode<T>*> order;
  std::unordered_set<TapeNode<T>*> visited;
  std::vector<std::pair<TapeNode<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TapeNode<T>* p = node->parents[idx++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // A node needs gradient work iff some leaf beneath it requires grad.
  std::unordered_map<TapeNode<T>*, bool> needs;
  needs.reserve(order.size());
  for (TapeNode<T>* node : order) {
    bool need = node->requires_grad;
    for (const auto& p : node->parents)
      if (needs[p.get()]) need = true;
    needs[node] = need;
  }

  // Interior nodes carry this sweep's gradient only; leaf buffers accumulate
  // across sweeps until zero_grad.
  for (TapeNode<T>* node : order)
    if (node->backprop && !node->grad.empty())
      std::fill(node->grad.begin(), node->grad.end(), T(0));

  root->ensure_grad();
  for (auto& g : root->grad) g += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TapeNode<T>* node = *it;
    if (!node->backprop || !needs[node]) continue;
    node->ensure_grad();
    for (const auto& p : node->parents)
      if (needs[p.get()]) p->ensure_grad();
    node->backprop(*node);
  }
}

template struct TapeNode<float>;
template struct TapeNode<double>;
template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace ir2vis
