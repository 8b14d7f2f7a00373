#ifndef IR2VIS_LOSSES_HPP
#define IR2VIS_LOSSES_HPP

#include <utility>
#include <vector>

#include "ir2vis/dataset.hpp"
#include "ir2vis/metrics.hpp"
#include "ir2vis/tensor.hpp"

namespace ir2vis {

/// 1 - masked windowed SSIM mean, differentiable w.r.t. pred. masks is empty
/// for the unmasked form or one (possibly null) entry per batch item; dark
/// target pixels are dilated by the window radius and excluded per the
/// masked-SSIM rules. Throws DegenerateError when every window is masked.
template <class T>
Tensor<T> ssim_loss(const Tensor<T>& pred, const Tensor<T>& target,
                    const std::vector<const PixelMask*>& masks,
                    const SsimParams& params = {});

/// Mean absolute error over pixels and channels.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Non-saturating adversarial loss for the generator: -mean log D(G).
template <class T>
Tensor<T> gan_generator_loss(const Tensor<T>& d_fake_map);

template <class T>
struct GanLosses {
  Tensor<T> d_loss;  // -mean log D(real) - mean log(1 - D(fake))
  Tensor<T> g_adv;   // -mean log D(fake)
};

/// Both adversarial losses from the discriminator's patch score maps.
/// Scores are clamped to [1e-7, 1 - 1e-7] before the logs.
template <class T>
GanLosses<T> gan_losses(const Tensor<T>& d_real_map,
                        const Tensor<T>& d_fake_map);

/// g_adv + lambda * l1 + mu * ssim_l.
template <class T>
Tensor<T> composite_generator_loss(const Tensor<T>& g_adv, const Tensor<T>& l1,
                                   const Tensor<T>& ssim_l, T lambda, T mu);

#define IR2VIS_LOSSES_EXTERN(T)                                               \
  extern template Tensor<T> ssim_loss<T>(const Tensor<T>&, const Tensor<T>&,  \
                                         const std::vector<const PixelMask*>&,\
                                         const SsimParams&);                  \
  extern template Tensor<T> l1_loss<T>(const Tensor<T>&, const Tensor<T>&);   \
  extern template Tensor<T> gan_generator_loss<T>(const Tensor<T>&);          \
  extern template GanLosses<T> gan_losses<T>(const Tensor<T>&,                \
                                             const Tensor<T>&);               \
  extern template Tensor<T> composite_generator_loss<T>(                      \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, T);
IR2VIS_LOSSES_EXTERN(float)
IR2VIS_LOSSES_EXTERN(double)
#undef IR2VIS_LOSSES_EXTERN

}  // namespace ir2vis

#endif  // IR2VIS_LOSSES_HPP
