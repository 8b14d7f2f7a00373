#include "ir2vis/adam.hpp"

#include <cmath>

namespace ir2vis {

template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, T lr) {
  if (!(lr > T(0)))
    throw OptimizerError("<adam>", "learning rate must be > 0");
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw OptimizerError("<adam>", "state does not match parameter list");

  state.t += 1;
  const T bc1 = T(1) - std::pow(state.beta1, T(state.t));
  const T bc2 = T(1) - std::pow(state.beta2, T(state.t));

  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    if (static_cast<int64_t>(m.size()) != p.size())
      throw OptimizerError(p.name(), "moment buffer shape mismatch");
    const bool has_grad = p.grad_defined();
    auto& w = p.values();
    for (int64_t i = 0; i < p.size(); ++i) {
      const T g = has_grad ? p.grad()[i] : T(0);
      if (!std::isfinite(g))
        throw OptimizerError(p.name().empty() ? "<unnamed>" : p.name(),
                             "non-finite gradient");
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g * g;
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&,
                               float);
template void adam_step<double>(std::vector<Tensor<double>>&,
                                AdamState<double>&, double);

}  // namespace ir2vis
