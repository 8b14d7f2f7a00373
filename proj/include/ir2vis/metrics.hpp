#ifndef IR2VIS_METRICS_HPP
#define IR2VIS_METRICS_HPP

#include <string>
#include <vector>

#include "ir2vis/dataset.hpp"
#include "ir2vis/tensor.hpp"

namespace ir2vis {

enum class WindowKind { uniform, gaussian };

struct SsimParams {
  double dynamic_range = 1.0;  // L; pixel values lie in [0, L]
  int window_size = 11;        // odd, >= 3
  WindowKind window_kind = WindowKind::uniform;
  double gaussian_sigma = 1.5;

  double c1() const { return 0.0001 * dynamic_range * dynamic_range; }
  double c2() const { return 0.0009 * dynamic_range * dynamic_range; }
  int radius() const { return (window_size - 1) / 2; }
  void validate() const;
};

/// Per-location SSIM over valid sliding windows (channel-averaged), plus the
/// validity of each contributing window position. Spatial extent is
/// (H - window + 1) x (W - window + 1): valid windows only, no padding.
template <class T>
struct SsimMap {
  int64_t h = 0, w = 0;
  std::vector<T> value;        // h * w, clamped into [-1, 1]
  std::vector<uint8_t> valid;  // h * w
};

/// Single SSIM from means/variances/covariance pooled over all pixels and
/// channels of the pair.
template <class T>
double global_ssim(const Tensor<T>& x, const Tensor<T>& y,
                   const SsimParams& params = {});

template <class T>
struct WindowedSsimResult {
  Tensor<T> mean;  // scalar tensor; differentiable w.r.t. x and y
  int64_t valid_positions = 0;
  int64_t map_h = 0, map_w = 0;
  std::vector<T> channel_map;  // B * map_h * map_w channel-averaged values
  std::vector<uint8_t> valid;  // B * map_h * map_w
};

/// Batched windowed SSIM with mask-aware window statistics. masks is empty
/// (no masking) or one entry per batch item (entries may be null).
/// With dilate_target_mask, invalid pixels are dilated by the Chebyshev
/// window radius: window positions containing an originally-invalid pixel
/// are excluded from the spatial mean, and dilated pixels are dropped from
/// the remaining windows' statistics, so predictions under the dilated zone
/// cannot influence the result. Without it, the mask only excludes window
/// positions overlapping an invalid pixel.
template <class T>
WindowedSsimResult<T> windowed_ssim_batch(
    const Tensor<T>& x, const Tensor<T>& y, const SsimParams& params,
    const std::vector<const PixelMask*>& masks, bool dilate_target_mask);

/// Windowed SSIM of one pair; mean is taken over valid windows only.
template <class T>
std::pair<SsimMap<T>, double> windowed_ssim(const Tensor<T>& x,
                                            const Tensor<T>& y,
                                            const SsimParams& params = {},
                                            const PixelMask* mask = nullptr);

/// Masked SSIM: dark pixels come from the target mask only; prediction
/// darkness never masks. Throws DegenerateError when every window position
/// is excluded.
template <class T>
double masked_ssim(const Tensor<T>& pred, const Tensor<T>& target,
                   const PixelMask& target_mask,
                   const SsimParams& params = {});

/// Root mean squared error over valid pixels and channels.
template <class T>
double rmse(const Tensor<T>& x, const Tensor<T>& y,
            const PixelMask* mask = nullptr);

/// Chebyshev dilation of the invalid region by `radius` pixels.
PixelMask dilate_invalid(const PixelMask& mask, int radius);

// --- reporting -------------------------------------------------------------

struct PerImageMetrics {
  std::string id;
  double ssim = 0;         // windowed (masked when the pair carries a mask)
  double ssim_global = 0;
  double rmse = 0;
};

struct MetricsReport {
  std::string method;
  int n_passes = 1;
  double ssim_mean = 0;
  double ssim_global_mean = 0;
  double rmse_mean = 0;
  std::vector<PerImageMetrics> per_image;
};

std::string report_to_json(const std::vector<MetricsReport>& reports);
void write_report_json(const std::vector<MetricsReport>& reports,
                       const std::string& path);
/// CSV in the report table's column order: Method,SSIM,RSME.
void write_table_csv(const std::vector<MetricsReport>& reports,
                     const std::string& path);
/// Canonical method ordering for tables: kNN baseline, cGAN, U-Net, U-Net++.
int table_method_rank(const std::string& method);

#define IR2VIS_METRICS_EXTERN(T)                                              \
  extern template double global_ssim<T>(const Tensor<T>&, const Tensor<T>&,   \
                                        const SsimParams&);                   \
  extern template WindowedSsimResult<T> windowed_ssim_batch<T>(               \
      const Tensor<T>&, const Tensor<T>&, const SsimParams&,                  \
      const std::vector<const PixelMask*>&, bool);                            \
  extern template std::pair<SsimMap<T>, double> windowed_ssim<T>(             \
      const Tensor<T>&, const Tensor<T>&, const SsimParams&,                  \
      const PixelMask*);                                                      \
  extern template double masked_ssim<T>(const Tensor<T>&, const Tensor<T>&,   \
                                        const PixelMask&, const SsimParams&); \
  extern template double rmse<T>(const Tensor<T>&, const Tensor<T>&,          \
                                 const PixelMask*);
IR2VIS_METRICS_EXTERN(float)
IR2VIS_METRICS_EXTERN(double)
#undef IR2VIS_METRICS_EXTERN

}  // namespace ir2vis

#endif  // IR2VIS_METRICS_HPP
