#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ir2vis/losses.hpp"
#include "ir2vis/metrics.hpp"
#include "ir2vis/ops.hpp"
#include "ir2vis/rng.hpp"
#include "gradcheck.hpp"

using namespace ir2vis;

namespace {

Tensor<double> randu(Rng& rng, Shape4 s, double lo = 0, double hi = 1) {
  std::vector<double> v(size_t(s.count()));
  for (auto& x : v) x = uniform_range(rng, lo, hi);
  return Tensor<double>::from_vector(s, std::move(v));
}

// Direct per-window reference: uniform windows, loops only. Independent of
// the window_filter implementation path.
double brute_windowed_ssim(const Tensor<double>& x, const Tensor<double>& y,
                           int k, double c1, double c2) {
  const Shape4 s = x.shape();
  const int64_t oh = s.h - k + 1, ow = s.w - k + 1;
  double acc = 0;
  int64_t count = 0;
  for (int64_t c = 0; c < s.c; ++c) {
    for (int64_t i = 0; i < oh; ++i) {
      for (int64_t j = 0; j < ow; ++j) {
        double sx = 0, sy = 0;
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) {
            sx += x(0, c, i + a, j + b);
            sy += y(0, c, i + a, j + b);
          }
        const double n = double(k) * k;
        const double mx = sx / n, my = sy / n;
        double vx = 0, vy = 0, cxy = 0;
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) {
            const double dx = x(0, c, i + a, j + b) - mx;
            const double dy = y(0, c, i + a, j + b) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
          }
        vx /= n;
        vy /= n;
        cxy /= n;
        acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
  }
  return acc / double(count);
}

}  // namespace

TEST_CASE("global ssim: identity, closed forms, symmetry, L-scaling") {
  Rng rng(5);
  auto x = randu(rng, {1, 3, 12, 12});
  CHECK(std::fabs(global_ssim(x, x) - 1.0) < 1e-9);

  Tensor<double> zeros(Shape4{1, 3, 8, 8}, 0.0);
  Tensor<double> ones(Shape4{1, 3, 8, 8}, 1.0);
  CHECK(global_ssim(zeros, ones) ==
        doctest::Approx(1e-4 / (1 + 1e-4)).epsilon(1e-6));

  Tensor<double> half(Shape4{1, 3, 8, 8}, 0.5);
  Tensor<double> shifted(Shape4{1, 3, 8, 8}, 0.6);
  CHECK(global_ssim(half, shifted) ==
        doctest::Approx(0.6001 / 0.6101).epsilon(1e-6));

  auto y = randu(rng, {1, 3, 12, 12});
  CHECK(global_ssim(x, y) == doctest::Approx(global_ssim(y, x)).epsilon(1e-12));

  // doubling L and all pixel values leaves ssim unchanged
  SsimParams p2;
  p2.dynamic_range = 2.0;
  auto x2 = Tensor<double>::from_vector(x.shape(), x.values());
  auto y2 = Tensor<double>::from_vector(y.shape(), y.values());
  for (auto& v : x2.values()) v *= 2;
  for (auto& v : y2.values()) v *= 2;
  CHECK(global_ssim(x2, y2, p2) ==
        doctest::Approx(global_ssim(x, y)).epsilon(1e-9));

  Tensor<double> other(Shape4{1, 3, 9, 9}, 0.0);
  CHECK_THROWS_AS(global_ssim(x, other), DimensionError);
}

TEST_CASE("windowed ssim equals the brute-force per-window oracle") {
  Rng rng(17);
  SsimParams params;
  for (int trial = 0; trial < 5; ++trial) {
    auto x = randu(rng, {1, 3, 16, 16});
    auto y = randu(rng, {1, 3, 16, 16});
    auto [map, mean] = windowed_ssim(x, y, params);
    const double ref = brute_windowed_ssim(x, y, 11, params.c1(), params.c2());
    CHECK(std::fabs(mean - ref) < 1e-9);
    CHECK(map.h == 6);
    CHECK(map.w == 6);
    for (double v : map.value) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
  // identity maps to exactly 1 everywhere
  auto x = randu(rng, {1, 3, 16, 16});
  auto [map, mean] = windowed_ssim(x, x);
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : map.value) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  // symmetry
  auto y = randu(rng, {1, 3, 16, 16});
  CHECK(windowed_ssim(x, y).second ==
        doctest::Approx(windowed_ssim(y, x).second).epsilon(1e-12));
  // window larger than image
  Tensor<double> small(Shape4{1, 3, 8, 8}, 0.1);
  CHECK_THROWS_AS(windowed_ssim(small, small), DimensionError);
}

TEST_CASE("all-valid mask is bitwise equivalent to no mask") {
  Rng rng(23);
  auto x = randu(rng, {1, 3, 16, 16});
  auto y = randu(rng, {1, 3, 16, 16});
  PixelMask all = PixelMask::all_valid(16, 16);
  auto unmasked = windowed_ssim(x, y);
  auto masked = windowed_ssim(x, y, {}, &all);
  CHECK(unmasked.second == masked.second);
  CHECK(masked.first.value == unmasked.first.value);
  CHECK(masked_ssim(x, y, all) == unmasked.second);
}

TEST_CASE("masked ssim: exclusion zone of a single centered dark pixel") {
  Rng rng(29);
  const int64_t n = 31;
  auto pred = randu(rng, {1, 3, n, n});
  auto target = randu(rng, {1, 3, n, n}, 0.2, 1.0);
  PixelMask mask = PixelMask::all_valid(n, n);
  mask.set(15, 15, false);

  auto res = windowed_ssim_batch<double>(pred, target, {}, {&mask}, true);
  // brute force: a window position (top-left t) is excluded iff the window
  // [t, t+10]^2 contains (15,15)
  for (int64_t i = 0; i < res.map_h; ++i) {
    for (int64_t j = 0; j < res.map_w; ++j) {
      const bool contains_dark =
          i <= 15 && 15 <= i + 10 && j <= 15 && 15 <= j + 10;
      CHECK(res.valid[i * res.map_w + j] == (contains_dark ? 0 : 1));
    }
  }
  // exactly the 11x11 block of window positions centered within radius 5
  CHECK(res.valid_positions == res.map_h * res.map_w - 11 * 11);

  const double base = masked_ssim(pred, target, mask);

  // perturbing predictions inside the dilated radius-5 zone is invisible
  auto pred2 = Tensor<double>::from_vector(pred.shape(), pred.values());
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 10; y <= 20; ++y)
      for (int64_t x = 10; x <= 20; ++x)
        pred2.at(0, c, y, x) = uniform01(rng) * 5.0 - 2.0;
  CHECK(masked_ssim(pred2, target, mask) == base);  // bit-exact

  // perturbing just outside the zone changes the result
  auto pred3 = Tensor<double>::from_vector(pred.shape(), pred.values());
  pred3.at(0, 0, 15, 21) += 0.25;
  CHECK(masked_ssim(pred3, target, mask) != base);

  // prediction-side darkness never masks
  auto dark_pred = Tensor<double>::from_vector(pred.shape(), pred.values());
  for (int64_t c = 0; c < 3; ++c) dark_pred.at(0, c, 15, 15) = 0.0;
  PixelMask clean = PixelMask::all_valid(n, n);
  CHECK(masked_ssim(dark_pred, target, clean) ==
        windowed_ssim(dark_pred, target).second);

  // no dark pixels -> equals the windowed mean
  CHECK(masked_ssim(pred, target, clean) ==
        windowed_ssim(pred, target).second);

  // fully masked image -> degenerate error
  PixelMask all_dark = PixelMask::all_valid(n, n);
  for (int64_t y = 0; y < n; ++y)
    for (int64_t x = 0; x < n; ++x) all_dark.set(y, x, false);
  CHECK_THROWS_AS(masked_ssim(pred, target, all_dark), DegenerateError);
}

TEST_CASE("rmse") {
  Rng rng(31);
  auto x = randu(rng, {1, 3, 6, 6});
  CHECK(rmse(x, x) == 0.0);

  Tensor<double> zeros(Shape4{1, 3, 4, 4}, 0.0);
  Tensor<double> ones(Shape4{1, 3, 4, 4}, 1.0);
  CHECK(rmse(zeros, ones) == doctest::Approx(1.0));

  auto a = Tensor<double>::from_vector({1, 1, 1, 2}, {0.0, 0.0});
  auto b = Tensor<double>::from_vector({1, 1, 1, 2}, {0.3, 0.4});
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-12));

  // masked pixels are excluded across all channels
  PixelMask m = PixelMask::all_valid(4, 4);
  m.set(0, 0, false);
  auto spiked = Tensor<double>::from_vector(zeros.shape(), zeros.values());
  for (int64_t c = 0; c < 3; ++c) spiked.at(0, c, 0, 0) = 100.0;
  CHECK(rmse(spiked, zeros, &m) == 0.0);

  CHECK_THROWS_AS(rmse(zeros, x), DimensionError);
}

TEST_CASE("gradient of 1 - windowed ssim matches finite differences") {
  Rng rng(37);
  std::vector<Tensor<double>> leaves{
      gradcheck::random_leaf(rng, {1, 3, 16, 16}, 0.05, 0.95)};
  auto target = randu(rng, {1, 3, 16, 16});
  auto f = [&](std::vector<Tensor<double>>& ls) {
    return ssim_loss<double>(ls[0], target, {}, {});
  };
  auto res = gradcheck::check(leaves, f);
  CHECK(res.max_err < 1e-4);

  // masked variant; the dark pixel sits off-center so valid windows remain
  PixelMask mask = PixelMask::all_valid(16, 16);
  mask.set(2, 2, false);
  std::vector<const PixelMask*> masks{&mask};
  auto fm = [&](std::vector<Tensor<double>>& ls) {
    return ssim_loss<double>(ls[0], target, masks, {});
  };
  CHECK(gradcheck::check(leaves, fm).max_err < 1e-4);
}

TEST_CASE("gaussian window option") {
  Rng rng(43);
  SsimParams p;
  p.window_kind = WindowKind::gaussian;
  auto x = randu(rng, {1, 3, 16, 16});
  auto y = randu(rng, {1, 3, 16, 16});
  auto [map, mean] = windowed_ssim(x, y, p);
  CHECK(mean > -1.0);
  CHECK(mean < 1.0);
  CHECK(windowed_ssim(x, x, p).second == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean != windowed_ssim(x, y).second);  // differs from uniform
}

TEST_CASE("report serialization uses the table layout") {
  MetricsReport knn, unet;
  knn.method = "Baseline: kNN";
  knn.ssim_mean = 0.15;
  knn.rmse_mean = 0.24;
  knn.per_image.push_back({"a", 0.15, 0.2, 0.24});
  unet.method = "Method 2: U-Net";
  unet.ssim_mean = 0.85;
  unet.rmse_mean = 0.09;

  const auto tmp = std::filesystem::temp_directory_path();
  const auto csv = (tmp / "ir2vis_table.csv").string();
  write_table_csv({unet, knn}, csv);  // order fixed by the table, not input
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "Method,SSIM,RSME");
  std::getline(is, line);
  CHECK(line.find("Baseline: kNN") != std::string::npos);
  std::getline(is, line);
  CHECK(line.find("Method 2: U-Net") != std::string::npos);
  std::filesystem::remove(csv);

  const std::string js = report_to_json({knn, unet});
  CHECK(js.find("\"Baseline: kNN\"") != std::string::npos);
  CHECK(js.find("ssim_global_mean") != std::string::npos);
  CHECK(js.find("per_image") != std::string::npos);
}
