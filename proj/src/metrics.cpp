#include "ir2vis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ir2vis/ops.hpp"

using nlohmann::json;

namespace ir2vis {

void SsimParams::validate() const {
  if (window_size < 3 || window_size % 2 == 0)
    throw ConfigError("ssim: window size must be odd and >= 3, got " +
                      std::to_string(window_size));
  if (!(dynamic_range > 0))
    throw ConfigError("ssim: dynamic range must be positive");
}

namespace {

template <class T>
std::vector<T> make_window_kernel(const SsimParams& p) {
  const int k = p.window_size;
  std::vector<T> ker(static_cast<size_t>(k) * k);
  if (p.window_kind == WindowKind::uniform) {
    const T w = T(1) / T(k * k);
    std::fill(ker.begin(), ker.end(), w);
  } else {
    const int r = p.radius();
    double total = 0;
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        const double d2 = double(a - r) * (a - r) + double(b - r) * (b - r);
        const double v = std::exp(-d2 / (2.0 * p.gaussian_sigma * p.gaussian_sigma));
        ker[a * k + b] = T(v);
        total += v;
      }
    }
    for (auto& v : ker) v = T(double(v) / total);
  }
  return ker;
}

}  // namespace

PixelMask dilate_invalid(const PixelMask& mask, int radius) {
  PixelMask out = PixelMask::all_valid(mask.h, mask.w);
  for (int64_t y = 0; y < mask.h; ++y) {
    for (int64_t x = 0; x < mask.w; ++x) {
      if (mask.at(y, x)) continue;
      const int64_t y0 = std::max<int64_t>(0, y - radius);
      const int64_t y1 = std::min<int64_t>(mask.h - 1, y + radius);
      const int64_t x0 = std::max<int64_t>(0, x - radius);
      const int64_t x1 = std::min<int64_t>(mask.w - 1, x + radius);
      for (int64_t yy = y0; yy <= y1; ++yy)
        for (int64_t xx = x0; xx <= x1; ++xx) out.set(yy, xx, false);
    }
  }
  return out;
}

template <class T>
double global_ssim(const Tensor<T>& x, const Tensor<T>& y,
                   const SsimParams& params) {
  if (!(x.shape() == y.shape()))
    throw DimensionError("global_ssim: shape mismatch " + x.shape().str() +
                         " vs " + y.shape().str());
  params.validate();
  const auto& xv = x.values();
  const auto& yv = y.values();
  const double n = double(xv.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < xv.size(); ++i) {
    sx += double(xv[i]);
    sy += double(yv[i]);
  }
  const double mx = sx / n, my = sy / n;
  double vx = 0, vy = 0, cxy = 0;
  for (size_t i = 0; i < xv.size(); ++i) {
    const double dx = double(xv[i]) - mx;
    const double dy = double(yv[i]) - my;
    vx += dx * dx;
    vy += dy * dy;
    cxy += dx * dy;
  }
  vx /= n;
  vy /= n;
  cxy /= n;
  const double c1 = params.c1(), c2 = params.c2();
  return ((2 * mx * my + c1) * (2 * cxy + c2)) /
         ((mx * mx + my * my + c1) * (vx + vy + c2));
}

template <class T>
WindowedSsimResult<T> windowed_ssim_batch(
    const Tensor<T>& x, const Tensor<T>& y, const SsimParams& params,
    const std::vector<const PixelMask*>& masks, bool dilate_target_mask) {
  if (!(x.shape() == y.shape()))
    throw DimensionError("windowed_ssim: shape mismatch " + x.shape().str() +
                         " vs " + y.shape().str());
  params.validate();
  const Shape4 s = x.shape();
  const int k = params.window_size;
  if (s.h < k || s.w < k)
    throw DimensionError("windowed_ssim: image " + std::to_string(s.h) + "x" +
                         std::to_string(s.w) + " smaller than window " +
                         std::to_string(k));
  if (!masks.empty() && static_cast<int64_t>(masks.size()) != s.n)
    throw DimensionError("windowed_ssim: got " + std::to_string(masks.size()) +
                         " masks for batch of " + std::to_string(s.n));
  for (const PixelMask* m : masks)
    if (m && (m->h != s.h || m->w != s.w))
      throw DimensionError("windowed_ssim: mask " + std::to_string(m->h) +
                           "x" + std::to_string(m->w) +
                           " does not match image spatial axes");

  const int64_t oh = s.h - k + 1;
  const int64_t ow = s.w - k + 1;
  const int r = params.radius();
  const auto kernel = make_window_kernel<T>(params);

  // Per-item pixel weights for the window statistics and per-position
  // exclusions. Statistics drop dilated-invalid pixels; positions whose
  // window contains an originally-invalid (hard) pixel leave the mean.
  bool any_mask = false;
  for (const PixelMask* m : masks)
    if (m && !m->is_all_valid()) any_mask = true;

  Tensor<T> stat_valid(Shape4{s.n, s.c, s.h, s.w}, T(1));
  std::vector<uint8_t> pos_valid(static_cast<size_t>(s.n * oh * ow), 1);
  if (any_mask) {
    for (int64_t b = 0; b < s.n; ++b) {
      const PixelMask* m = masks[b];
      if (!m || m->is_all_valid()) continue;
      const PixelMask stat =
          dilate_target_mask ? dilate_invalid(*m, r) : *m;
      for (int64_t yy = 0; yy < s.h; ++yy)
        for (int64_t xx = 0; xx < s.w; ++xx)
          if (!stat.at(yy, xx))
            for (int64_t c = 0; c < s.c; ++c)
              stat_valid.at(b, c, yy, xx) = T(0);
      // A window position is excluded iff its window contains a hard-invalid
      // pixel, i.e. its center lies within the dilated region of *m.
      const PixelMask excl = dilate_invalid(*m, r);
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j)
          if (!excl.at(i + r, j + r)) pos_valid[(b * oh + i) * ow + j] = 0;
    }
  }

  // Weighted window statistics: W(v * x) / W(v) with the window kernel.
  Tensor<T> xw = mul(x, stat_valid);
  Tensor<T> yw = mul(y, stat_valid);
  Tensor<T> denom_raw = window_filter(stat_valid, kernel, k);
  // Positions with no valid pixel at all are forced out of the mean and
  // guarded against division blowups.
  {
    auto& dv = denom_raw.values();
    for (int64_t b = 0; b < s.n; ++b) {
      for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
          if (dv[((b * s.c) * oh + i) * ow + j] < T(1e-9))
            pos_valid[(b * oh + i) * ow + j] = 0;
        }
      }
    }
    for (auto& v : dv) v = std::max(v, T(1e-9));
  }

  Tensor<T> mu_x = div(window_filter(xw, kernel, k), denom_raw);
  Tensor<T> mu_y = div(window_filter(yw, kernel, k), denom_raw);
  Tensor<T> e_xx = div(window_filter(mul(xw, x), kernel, k), denom_raw);
  Tensor<T> e_yy = div(window_filter(mul(yw, y), kernel, k), denom_raw);
  Tensor<T> e_xy = div(window_filter(mul(xw, y), kernel, k), denom_raw);
  Tensor<T> var_x = sub(e_xx, mul(mu_x, mu_x));
  Tensor<T> var_y = sub(e_yy, mul(mu_y, mu_y));
  Tensor<T> cov_xy = sub(e_xy, mul(mu_x, mu_y));

  const T c1 = T(params.c1()), c2 = T(params.c2());
  Tensor<T> num = mul(affine(mul(mu_x, mu_y), T(2), c1),
                      affine(cov_xy, T(2), c2));
  Tensor<T> den = mul(affine(add(mul(mu_x, mu_x), mul(mu_y, mu_y)), T(1), c1),
                      affine(add(var_x, var_y), T(1), c2));
  Tensor<T> map = div(num, den);

  WindowedSsimResult<T> res;
  res.map_h = oh;
  res.map_w = ow;
  res.valid = pos_valid;
  int64_t valid_count = 0;
  for (uint8_t v : pos_valid) valid_count += v;
  res.valid_positions = valid_count;

  Tensor<T> pos_weights(Shape4{s.n, s.c, oh, ow}, T(0));
  {
    auto& pw = pos_weights.values();
    for (int64_t b = 0; b < s.n; ++b)
      for (int64_t c = 0; c < s.c; ++c)
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j)
            pw[((b * s.c + c) * oh + i) * ow + j] =
                T(pos_valid[(b * oh + i) * ow + j]);
  }
  if (valid_count > 0) {
    res.mean = affine(weighted_sum(map, pos_weights),
                      T(1) / T(valid_count * s.c), T(0));
  } else {
    res.mean = scalar_tensor<T>(T(0));
  }

  // Channel-averaged map values for reporting, clamped to the SSIM range.
  res.channel_map.assign(static_cast<size_t>(s.n * oh * ow), T(0));
  const auto& mv = map.values();
  for (int64_t b = 0; b < s.n; ++b) {
    for (int64_t i = 0; i < oh * ow; ++i) {
      T acc = T(0);
      for (int64_t c = 0; c < s.c; ++c) acc += mv[(b * s.c + c) * oh * ow + i];
      acc /= T(s.c);
      res.channel_map[b * oh * ow + i] =
          std::min(T(1), std::max(T(-1), acc));
    }
  }
  return res;
}

template <class T>
std::pair<SsimMap<T>, double> windowed_ssim(const Tensor<T>& x,
                                            const Tensor<T>& y,
                                            const SsimParams& params,
                                            const PixelMask* mask) {
  if (x.shape().n != 1)
    throw DimensionError("windowed_ssim: expected batch of 1, got " +
                         x.shape().str());
  std::vector<const PixelMask*> masks;
  if (mask) masks.push_back(mask);
  auto res = windowed_ssim_batch(x, y, params, masks, false);
  SsimMap<T> map;
  map.h = res.map_h;
  map.w = res.map_w;
  map.value = std::move(res.channel_map);
  map.valid = std::move(res.valid);
  return {std::move(map), double(res.mean.values()[0])};
}

template <class T>
double masked_ssim(const Tensor<T>& pred, const Tensor<T>& target,
                   const PixelMask& target_mask, const SsimParams& params) {
  std::vector<const PixelMask*> masks{&target_mask};
  auto res = windowed_ssim_batch(pred, target, params, masks, true);
  if (res.valid_positions == 0)
    throw DegenerateError(
        "masked_ssim: every window position is masked; the spatial mean is "
        "undefined");
  return double(res.mean.values()[0]);
}

template <class T>
double rmse(const Tensor<T>& x, const Tensor<T>& y, const PixelMask* mask) {
  if (!(x.shape() == y.shape()))
    throw DimensionError("rmse: shape mismatch " + x.shape().str() + " vs " +
                         y.shape().str());
  const Shape4 s = x.shape();
  if (mask && (mask->h != s.h || mask->w != s.w))
    throw DimensionError("rmse: mask does not match image spatial axes");
  const auto& xv = x.values();
  const auto& yv = y.values();
  double acc = 0;
  int64_t count = 0;
  const int64_t plane = s.h * s.w;
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const int64_t off = (n * s.c + c) * plane;
      for (int64_t p = 0; p < plane; ++p) {
        if (mask && !mask->valid[p]) continue;
        const double d = double(xv[off + p]) - double(yv[off + p]);
        acc += d * d;
        ++count;
      }
    }
  }
  if (count == 0)
    throw DegenerateError("rmse: every pixel is masked");
  return std::sqrt(acc / double(count));
}

int table_method_rank(const std::string& method) {
  static const std::map<std::string, int> ranks = {
      {"Baseline: kNN", 0},
      {"Method 1: cGAN", 1},
      {"Method 2: U-Net", 2},
      {"Method 3: U-Net++", 3},
  };
  auto it = ranks.find(method);
  return it == ranks.end() ? 100 : it->second;
}

namespace {

json report_json(const MetricsReport& r) {
  json j;
  j["ssim_mean"] = r.ssim_mean;
  j["ssim_global_mean"] = r.ssim_global_mean;
  j["rmse_mean"] = r.rmse_mean;
  j["n_passes"] = r.n_passes;
  json per = json::array();
  for (const auto& p : r.per_image) {
    per.push_back({{"id", p.id},
                   {"ssim", p.ssim},
                   {"ssim_global", p.ssim_global},
                   {"rmse", p.rmse}});
  }
  j["per_image"] = std::move(per);
  return j;
}

std::vector<const MetricsReport*> table_order(
    const std::vector<MetricsReport>& reports) {
  std::vector<const MetricsReport*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  std::stable_sort(ptrs.begin(), ptrs.end(),
                   [](const MetricsReport* a, const MetricsReport* b) {
                     return table_method_rank(a->method) <
                            table_method_rank(b->method);
                   });
  return ptrs;
}

}  // namespace

std::string report_to_json(const std::vector<MetricsReport>& reports) {
  json j;
  for (const MetricsReport* r : table_order(reports))
    j[r->method] = report_json(*r);
  return j.dump(2);
}

void write_report_json(const std::vector<MetricsReport>& reports,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("report: cannot write " + path);
  os << report_to_json(reports) << "\n";
}

void write_table_csv(const std::vector<MetricsReport>& reports,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("report: cannot write " + path);
  os << "Method,SSIM,RSME\n";
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const MetricsReport* r : table_order(reports))
    os << "\"" << r->method << "\"," << r->ssim_mean << "," << r->rmse_mean
       << "\n";
}

#define IR2VIS_METRICS_INSTANTIATE(T)                                        \
  template double global_ssim<T>(const Tensor<T>&, const Tensor<T>&,         \
                                 const SsimParams&);                         \
  template WindowedSsimResult<T> windowed_ssim_batch<T>(                     \
      const Tensor<T>&, const Tensor<T>&, const SsimParams&,                 \
      const std::vector<const PixelMask*>&, bool);                           \
  template std::pair<SsimMap<T>, double> windowed_ssim<T>(                   \
      const Tensor<T>&, const Tensor<T>&, const SsimParams&,                 \
      const PixelMask*);                                                     \
  template double masked_ssim<T>(const Tensor<T>&, const Tensor<T>&,         \
                                 const PixelMask&, const SsimParams&);       \
  template double rmse<T>(const Tensor<T>&, const Tensor<T>&,                \
                          const PixelMask*);
IR2VIS_METRICS_INSTANTIATE(float)
IR2VIS_METRICS_INSTANTIATE(double)
#undef IR2VIS_METRICS_INSTANTIATE

}  // namespace ir2vis
