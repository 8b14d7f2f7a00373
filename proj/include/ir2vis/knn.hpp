#ifndef IR2VIS_KNN_HPP
#define IR2VIS_KNN_HPP

#include <string>
#include <vector>

#include "ir2vis/dataset.hpp"
#include "ir2vis/tensor.hpp"

namespace ir2vis {

/// Exact k-nearest-neighbour regression over flattened IR images: a query's
/// prediction is the pixelwise mean of the visible counterparts of the k
/// closest training IR images under Euclidean distance. Ties break on
/// ascending sample id. The index is immutable after fit; concurrent
/// queries are safe.
template <class T>
class KnnIndex {
public:
  static KnnIndex fit(const std::vector<SamplePair<T>>& pairs, int k = 3);

  Tensor<T> predict(const Tensor<T>& ir_query) const;

  int k() const { return k_; }
  int64_t size() const { return static_cast<int64_t>(ids_.size()); }
  const Shape4& ir_shape() const { return ir_shape_; }

private:
  int k_ = 3;
  Shape4 ir_shape_{};
  Shape4 vis_shape_{};
  std::vector<std::string> ids_;
  std::vector<std::vector<T>> ir_flat_;
  std::vector<std::vector<T>> visible_;
};

extern template class KnnIndex<float>;
extern template class KnnIndex<double>;

}  // namespace ir2vis

#endif  // IR2VIS_KNN_HPP
