#ifndef IR2VIS_ADAM_HPP
#define IR2VIS_ADAM_HPP

#include <vector>

#include "ir2vis/tensor.hpp"

namespace ir2vis {

/// Adam state for one ordered parameter list. First/second moment buffers
/// match the parameters' shapes; t counts completed steps.
template <class T>
struct AdamState {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  int64_t t = 0;
  std::vector<std::vector<T>> m, v;

  static AdamState for_params(const std::vector<Tensor<T>>& params) {
    AdamState st;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& p : params) {
      st.m.emplace_back(p.size(), T(0));
      st.v.emplace_back(p.size(), T(0));
    }
    return st;
  }
};

/// One bias-corrected Adam update, reading gradients off the parameters'
/// tape nodes (a missing grad buffer counts as all zeros). Throws
/// OptimizerError naming the parameter on non-finite gradients.
template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, T lr);

extern template struct AdamState<float>;
extern template struct AdamState<double>;
extern template void adam_step<float>(std::vector<Tensor<float>>&,
                                      AdamState<float>&, float);
extern template void adam_step<double>(std::vector<Tensor<double>>&,
                                       AdamState<double>&, double);

}  // namespace ir2vis

#endif  // IR2VIS_ADAM_HPP
