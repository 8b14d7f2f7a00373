#include "ir2vis/knn.hpp"

#include <algorithm>
#include <set>

namespace ir2vis {

template <class T>
KnnIndex<T> KnnIndex<T>::fit(const std::vector<SamplePair<T>>& pairs, int k) {
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (static_cast<int>(pairs.size()) < k)
    throw ConfigError("knn: need at least k=" + std::to_string(k) +
                      " training pairs, got " + std::to_string(pairs.size()));
  KnnIndex<T> index;
  index.k_ = k;
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    if (!p.visible)
      throw ValidationError("knn: training pair '" + p.id +
                            "' has no visible target");
    if (!seen.insert(p.id).second)
      throw ValidationError("knn: duplicate sample id '" + p.id + "'");
    if (index.ids_.empty()) {
      index.ir_shape_ = p.ir.shape();
      index.vis_shape_ = p.visible->shape();
    } else if (!(p.ir.shape() == index.ir_shape_)) {
      throw DimensionError("knn: pair '" + p.id + "' ir shape " +
                           p.ir.shape().str() + " differs from index shape " +
                           index.ir_shape_.str());
    }
    index.ids_.push_back(p.id);
    index.ir_flat_.push_back(p.ir.values());
    index.visible_.push_back(p.visible->values());
  }
  return index;
}

template <class T>
Tensor<T> KnnIndex<T>::predict(const Tensor<T>& ir_query) const {
  if (!(ir_query.shape() == ir_shape_))
    throw DimensionError("knn: query shape " + ir_query.shape().str() +
                         " does not match index shape " + ir_shape_.str());
  const auto& q = ir_query.values();

  struct Hit {
    double dist2;
    int64_t idx;
  };
  std::vector<Hit> hits;
  hits.reserve(ir_flat_.size());
  for (size_t i = 0; i < ir_flat_.size(); ++i) {
    const auto& t = ir_flat_[i];
    double d = 0;
    for (size_t j = 0; j < q.size(); ++j) {
      const double diff = double(q[j]) - double(t[j]);
      d += diff * diff;
    }
    hits.push_back({d, static_cast<int64_t>(i)});
  }
  // Ascending distance; equal distances break on ascending sample id so the
  // prediction is invariant to training-set order.
  std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    return ids_[a.idx] < ids_[b.idx];
  });

  Tensor<T> out(vis_shape_);
  auto& ov = out.values();
  const T scale = T(1) / T(k_);
  for (int i = 0; i < k_; ++i) {
    const auto& vis = visible_[hits[i].idx];
    for (size_t j = 0; j < ov.size(); ++j) ov[j] += vis[j] * scale;
  }
  return out;
}

template class KnnIndex<float>;
template class KnnIndex<double>;

}  // namespace ir2vis
