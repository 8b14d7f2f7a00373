#include "ir2vis/losses.hpp"

#include "ir2vis/ops.hpp"

namespace ir2vis {

template <class T>
Tensor<T> ssim_loss(const Tensor<T>& pred, const Tensor<T>& target,
                    const std::vector<const PixelMask*>& masks,
                    const SsimParams& params) {
  auto res = windowed_ssim_batch(pred, target, params, masks, true);
  if (res.valid_positions == 0)
    throw DegenerateError(
        "ssim_loss: every window in the batch is masked; the loss is "
        "undefined");
  return affine(res.mean, T(-1), T(1));
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  return mean(abs(sub(pred, target)));
}

namespace {
constexpr double kScoreEps = 1e-7;
}

template <class T>
Tensor<T> gan_generator_loss(const Tensor<T>& d_fake_map) {
  Tensor<T> cf = clamp(d_fake_map, T(kScoreEps), T(1.0 - kScoreEps));
  return affine(mean(log(cf)), T(-1), T(0));
}

template <class T>
GanLosses<T> gan_losses(const Tensor<T>& d_real_map,
                        const Tensor<T>& d_fake_map) {
  Tensor<T> cr = clamp(d_real_map, T(kScoreEps), T(1.0 - kScoreEps));
  Tensor<T> cf = clamp(d_fake_map, T(kScoreEps), T(1.0 - kScoreEps));
  Tensor<T> real_term = affine(mean(log(cr)), T(-1), T(0));
  Tensor<T> fake_term = affine(mean(log(affine(cf, T(-1), T(1)))), T(-1), T(0));
  GanLosses<T> out;
  out.d_loss = add(real_term, fake_term);
  out.g_adv = gan_generator_loss(d_fake_map);
  return out;
}

template <class T>
Tensor<T> composite_generator_loss(const Tensor<T>& g_adv, const Tensor<T>& l1,
                                   const Tensor<T>& ssim_l, T lambda, T mu) {
  if (lambda < T(0) || mu < T(0))
    throw ContractError("composite loss: weights must be >= 0");
  return add(add(g_adv, affine(l1, lambda, T(0))), affine(ssim_l, mu, T(0)));
}

#define IR2VIS_LOSSES_INSTANTIATE(T)                                         \
  template Tensor<T> ssim_loss<T>(const Tensor<T>&, const Tensor<T>&,        \
                                  const std::vector<const PixelMask*>&,      \
                                  const SsimParams&);                        \
  template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> gan_generator_loss<T>(const Tensor<T>&);                \
  template GanLosses<T> gan_losses<T>(const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> composite_generator_loss<T>(                            \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, T);
IR2VIS_LOSSES_INSTANTIATE(float)
IR2VIS_LOSSES_INSTANTIATE(double)
#undef IR2VIS_LOSSES_INSTANTIATE

}  // namespace ir2vis
