#ifndef IR2VIS_OPS_HPP
#define IR2VIS_OPS_HPP

#include <vector>

#include "ir2vis/rng.hpp"
#include "ir2vis/tensor.hpp"

namespace ir2vis {

// Differentiable operations over rank-4 tensors. Every op records itself on
// the tape when any input is tracked; backward() then drives the chain rule.

/// Cross-correlation with weight (out_ch, in_ch, k, k) and optional bias
/// (1, out_ch, 1, 1); pass a default-constructed tensor for no bias.
/// Output spatial dim = floor((H + 2*padding - k) / stride) + 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int stride, int padding);

/// Per-channel valid correlation with one fixed k x k kernel shared by all
/// channels. The kernel is a constant, not a learnable tensor; used for the
/// sliding-window statistics in SSIM.
template <class T>
Tensor<T> window_filter(const Tensor<T>& input, const std::vector<T>& kernel,
                        int k);

/// 2x2 max pooling, stride 2. Odd trailing rows/columns are dropped.
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& input);

template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input);

/// Concatenates along channels; first a.channels() channels equal a.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> relu(const Tensor<T>& x);
template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <class T>
Tensor<T> tanh(const Tensor<T>& x);

/// Inverted dropout: zeroes activations with probability p and scales
/// survivors by 1/(1-p) when active; identity when inactive or p == 0.
/// Consumes exactly size(x) draws from rng when active, so a fixed seed
/// reproduces the mask bit-exactly.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool active);

/// Batch normalization over (N, H, W) per channel. In training mode uses
/// batch statistics (biased variance) and updates the running buffers in
/// place with the given momentum; in inference mode uses the running stats.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>& running_mean,
                     std::vector<T>& running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5));

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

/// y = scale * x + shift, elementwise with scalar coefficients.
template <class T>
Tensor<T> affine(const Tensor<T>& x, T scale, T shift);

template <class T>
Tensor<T> abs(const Tensor<T>& x);
/// Natural log; inputs must be strictly positive (clamp first for losses).
template <class T>
Tensor<T> log(const Tensor<T>& x);
/// Clamp to [lo, hi]; gradient is zero where the clamp is active.
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

/// Reduction to a (1,1,1,1) scalar tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& x);
template <class T>
Tensor<T> mean(const Tensor<T>& x);
/// sum(x * weights); weights must match x's shape.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, const Tensor<T>& weights);

/// Reflect padding (edge not repeated); each pad must be < the padded dim.
template <class T>
Tensor<T> pad_reflect(const Tensor<T>& x, int top, int bottom, int left,
                      int right);
template <class T>
Tensor<T> crop(const Tensor<T>& x, int top, int left, int out_h, int out_w);

}  // namespace ir2vis

#endif  // IR2VIS_OPS_HPP
