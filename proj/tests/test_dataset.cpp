#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ir2vis/dataset.hpp"
#include "ir2vis/image_io.hpp"
#include "ir2vis/rng.hpp"
#include "ir2vis/tensor_io.hpp"

using namespace ir2vis;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ir2vis_test_" + std::to_string(Rng(std::random_device{}())()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ImageU8 solid_image(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.rgb.resize(size_t(w) * h * 3);
  for (int i = 0; i < w * h; ++i) {
    img.rgb[i * 3 + 0] = r;
    img.rgb[i * 3 + 1] = g;
    img.rgb[i * 3 + 2] = b;
  }
  return img;
}

// Build a pair directly from an 8-bit RGB visible image.
SamplePair<float> pair_from_u8(const ImageU8& vis_img) {
  SamplePair<float> p;
  p.id = "t";
  p.ir = image_to_tensor<float>(vis_img);  // content irrelevant for filters
  p.visible = image_to_tensor<float>(vis_img);
  return p;
}

// Raw-count reference for all three strategies, straight off the u8 buffer.
struct FilterOracle {
  int64_t black = 0, nonzero = 0, dark = 0, total_px = 0;
  explicit FilterOracle(const ImageU8& img) {
    total_px = int64_t(img.width) * img.height;
    for (int64_t i = 0; i < total_px; ++i) {
      const int r = img.rgb[i * 3], g = img.rgb[i * 3 + 1],
                b = img.rgb[i * 3 + 2];
      if (r == 0 && g == 0 && b == 0) ++black;
      if (r != 0) ++nonzero;
      if (g != 0) ++nonzero;
      if (b != 0) ++nonzero;
      if (r + g + b < 5) ++dark;
    }
  }
  bool keep_a() const { return !(black * 100 > total_px * 99); }
  bool keep_b() const { return nonzero * 5 > total_px * 3 * 4; }
  bool keep_c() const { return !(dark * 500 > total_px); }
};

}  // namespace

TEST_CASE("ivt round trip preserves payloads in both dtypes") {
  TempDir tmp;
  Rng rng(3);
  std::vector<double> vals(2 * 3 * 4 * 5);
  for (auto& v : vals) v = uniform_range(rng, -10, 10);
  auto t64 = Tensor<double>::from_vector({2, 3, 4, 5}, vals);
  const auto p64 = (tmp.path / "a.ivt").string();
  save_ivt(p64, t64);
  auto back = load_ivt<double>(p64);
  CHECK(back.shape() == t64.shape());
  CHECK(back.values() == t64.values());

  auto asf = load_ivt<float>(p64);  // converting load
  for (int64_t i = 0; i < asf.size(); ++i)
    CHECK(asf.values()[i] == float(vals[i]));
  CHECK(peek_ivt_dtype(p64) == Dtype::f64);

  std::ofstream bad((tmp.path / "bad.ivt").string(), std::ios::binary);
  bad << "NOPE";
  bad.close();
  CHECK_THROWS_AS(load_ivt<float>((tmp.path / "bad.ivt").string()), IoError);
  CHECK_THROWS_AS(load_ivt<float>((tmp.path / "missing.ivt").string()),
                  IoError);
}

TEST_CASE("png io and normalization") {
  TempDir tmp;
  ImageU8 img = solid_image(127, 127, 255, 0, 128);
  const auto p = (tmp.path / "x.png").string();
  write_png(p, img);
  ImageU8 rt = read_png(p);
  CHECK(rt.width == 127);
  CHECK(rt.height == 127);
  CHECK(rt.rgb == img.rgb);

  auto t = image_to_tensor<float>(rt);
  CHECK(t.shape() == Shape4{1, 3, 127, 127});
  CHECK(t(0, 0, 5, 5) == 1.0f);       // 255 -> 1.0
  CHECK(t(0, 1, 5, 5) == 0.0f);       // 0 -> 0.0
  CHECK(t(0, 2, 5, 5) == doctest::Approx(128.0 / 255.0));

  ImageU8 back = tensor_to_image(t);
  CHECK(back.rgb == rt.rgb);
}

TEST_CASE("rfc3339 timestamps") {
  const int64_t ts = parse_rfc3339("2020-01-29T12:00:00Z");
  CHECK(format_rfc3339(ts) == "2020-01-29T12:00:00Z");
  CHECK(parse_rfc3339("2020-01-29") == ts - 12 * 3600);
  CHECK(parse_rfc3339("2020-01-29T13:00:00+01:00") == ts);
  CHECK(parse_rfc3339("2020-01-29T11:30:00-00:30") == ts);
  CHECK(parse_rfc3339("2020-01-29T12:00:00.250Z") == ts);
  CHECK_THROWS_AS(parse_rfc3339("not a date"), ValidationError);
  CHECK_THROWS_AS(parse_rfc3339("2020-13-01"), ValidationError);
  // gap arithmetic runs on UTC day indices
  CHECK(utc_day_index(parse_rfc3339("2019-12-31T23:59:59Z")) + 1 ==
        utc_day_index(parse_rfc3339("2020-01-01T00:00:00Z")));
}

TEST_CASE("manifest load validates ids, files and split rules") {
  TempDir tmp;
  write_png((tmp.path / "a.png").string(), solid_image(16, 16, 10, 10, 10));
  write_png((tmp.path / "b.png").string(), solid_image(16, 16, 20, 20, 20));

  auto write_manifest = [&](const std::string& body) {
    std::ofstream os((tmp.path / "m.json").string());
    os << body;
  };

  write_manifest(R"([
    {"id":"x","ir":"a.png","vis":"b.png","ts":"2020-01-01T00:00:00Z","split":"train"},
    {"id":"y","ir":"b.png","ts":"2020-01-02T00:00:00Z","split":"deploy"}
  ])");
  auto m = load_manifest((tmp.path / "m.json").string());
  REQUIRE(m.records.size() == 2);
  CHECK(m.records[0].split == Split::train);
  CHECK(m.records[1].vis_path.empty());

  auto pair = load_pair<float>(m.records[0]);
  CHECK(pair.ir.shape() == Shape4{1, 3, 16, 16});
  CHECK(pair.visible.has_value());
  auto deploy = load_pair<float>(m.records[1]);
  CHECK(!deploy.visible.has_value());

  // round trip
  save_manifest(m, (tmp.path / "out.json").string());
  auto m2 = load_manifest((tmp.path / "out.json").string());
  CHECK(m2.records.size() == 2);
  CHECK(m2.records[0].ts == m.records[0].ts);

  write_manifest(R"([
    {"id":"x","ir":"a.png","vis":"b.png","ts":"2020-01-01T00:00:00Z"},
    {"id":"x","ir":"a.png","vis":"b.png","ts":"2020-01-02T00:00:00Z"}
  ])");
  CHECK_THROWS_AS(load_manifest((tmp.path / "m.json").string()),
                  ValidationError);

  write_manifest(R"([
    {"id":"x","ir":"gone.png","vis":"b.png","ts":"2020-01-01T00:00:00Z"}
  ])");
  CHECK_THROWS_AS(load_manifest((tmp.path / "m.json").string()), IoError);

  // missing visible outside deploy
  write_manifest(R"([
    {"id":"x","ir":"a.png","ts":"2020-01-01T00:00:00Z","split":"train"}
  ])");
  CHECK_THROWS_AS(load_manifest((tmp.path / "m.json").string()),
                  ValidationError);
}

TEST_CASE("in-band NaN in ivt images becomes mask entries") {
  TempDir tmp;
  std::vector<float> vals(3 * 4 * 4, 0.5f);
  vals[1 * 16 + 5] = std::nanf("");  // channel 1, pixel (1,1)
  auto t = Tensor<float>::from_vector({1, 3, 4, 4}, vals);
  save_ivt((tmp.path / "v.ivt").string(), t);
  save_ivt((tmp.path / "ir.ivt").string(),
           Tensor<float>(Shape4{1, 3, 4, 4}, 0.25f));

  ManifestRecord rec;
  rec.id = "n";
  rec.ir_path = (tmp.path / "ir.ivt").string();
  rec.vis_path = (tmp.path / "v.ivt").string();
  auto pair = load_pair<float>(rec);
  REQUIRE(pair.mask.has_value());
  CHECK(pair.mask->invalid_count() == 1);
  CHECK(!pair.mask->at(1, 1));
  CHECK(pair.visible->at(0, 1, 1, 1) == 0.0f);  // NaN zeroed
}

TEST_CASE("dark pixel classification follows the 5-of-765 rule") {
  ImageU8 img = solid_image(8, 8, 255, 255, 255);
  // pixel (0,0): raw channel sum 4 -> dark; (0,1): sum 5 -> not dark
  img.rgb[0] = 1; img.rgb[1] = 1; img.rgb[2] = 2;
  img.rgb[3] = 2; img.rgb[4] = 2; img.rgb[5] = 1;
  auto vis = image_to_tensor<float>(img);
  auto mask = classify_dark_pixels(vis);
  CHECK(!mask.at(0, 0));
  CHECK(mask.at(0, 1));
  CHECK(mask.invalid_count() == 1);

  auto white = classify_dark_pixels(
      image_to_tensor<float>(solid_image(8, 8, 255, 255, 255)));
  CHECK(white.invalid_count() == 0);
}

TEST_CASE("strategy A: more than 99% black pixels drops the pair") {
  CHECK(!filter_strategy_a(pair_from_u8(solid_image(10, 10, 0, 0, 0))));
  CHECK(filter_strategy_a(pair_from_u8(solid_image(10, 10, 200, 180, 90))));

  // 98 of 100 black -> keep (98% is not more than 99%)
  ImageU8 img = solid_image(10, 10, 0, 0, 0);
  img.rgb[0] = 50; img.rgb[3] = 50;
  CHECK(filter_strategy_a(pair_from_u8(img)));

  // 100 of 100 black with one pixel lit -> 99of100 -> keep; all black -> drop
  ImageU8 one = solid_image(10, 10, 0, 0, 0);
  one.rgb[0] = 1;
  CHECK(filter_strategy_a(pair_from_u8(one)));
}

TEST_CASE("strategy B: keep iff non-zero entries exceed 80%") {
  CHECK(filter_strategy_b(pair_from_u8(solid_image(10, 10, 9, 9, 9))));
  CHECK(!filter_strategy_b(pair_from_u8(solid_image(10, 10, 0, 0, 0))));

  // exactly 80% of the 300 entries non-zero -> drop (strict inequality)
  ImageU8 img = solid_image(10, 10, 0, 0, 0);
  for (int i = 0; i < 80; ++i) {
    img.rgb[i * 3 + 0] = 7;
    img.rgb[i * 3 + 1] = 7;
    img.rgb[i * 3 + 2] = 7;
  }
  auto p = pair_from_u8(img);
  CHECK(!filter_strategy_b(p));  // 240/300 = 80.0%
  img.rgb[80 * 3] = 7;           // 241/300
  CHECK(filter_strategy_b(pair_from_u8(img)));
}

TEST_CASE("strategy C: 0.2% dark threshold at 127x127 splits 32 vs 33") {
  auto with_dark = [&](int n_dark) {
    ImageU8 img = solid_image(127, 127, 100, 100, 100);
    for (int i = 0; i < n_dark; ++i) {
      img.rgb[i * 3 + 0] = 1;
      img.rgb[i * 3 + 1] = 1;
      img.rgb[i * 3 + 2] = 1;
    }
    return pair_from_u8(img);
  };
  auto kept = filter_strategy_c(with_dark(32));
  CHECK(kept.keep);
  CHECK(kept.mask.invalid_count() == 32);

  auto dropped = filter_strategy_c(with_dark(33));
  CHECK(!dropped.keep);

  auto clean = filter_strategy_c(with_dark(0));
  CHECK(clean.keep);
  CHECK(clean.mask.is_all_valid());
}

TEST_CASE("filters match the raw-count oracle and are pure") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    ImageU8 img;
    img.width = 127;
    img.height = 127;
    img.rgb.resize(size_t(127) * 127 * 3);
    // mixes of black, near-black and lit pixels
    const double p_black = uniform01(rng);
    const double p_dim = uniform01(rng) * 0.01;
    for (int64_t i = 0; i < 127 * 127; ++i) {
      const double u = uniform01(rng);
      if (u < p_black) {
        img.rgb[i * 3] = img.rgb[i * 3 + 1] = img.rgb[i * 3 + 2] = 0;
      } else if (u < p_black + p_dim) {
        img.rgb[i * 3] = uint8_t(uniform01(rng) * 3);
        img.rgb[i * 3 + 1] = uint8_t(uniform01(rng) * 3);
        img.rgb[i * 3 + 2] = uint8_t(uniform01(rng) * 3);
      } else {
        img.rgb[i * 3] = uint8_t(10 + uniform01(rng) * 245);
        img.rgb[i * 3 + 1] = uint8_t(10 + uniform01(rng) * 245);
        img.rgb[i * 3 + 2] = uint8_t(10 + uniform01(rng) * 245);
      }
    }
    auto pair = pair_from_u8(img);
    const FilterOracle oracle(img);
    const bool a = filter_strategy_a(pair);
    const bool b = filter_strategy_b(pair);
    const auto c = filter_strategy_c(pair);
    CHECK(a == oracle.keep_a());
    CHECK(b == oracle.keep_b());
    CHECK(c.keep == oracle.keep_c());
    CHECK(c.mask.invalid_count() == oracle.dark);
    // purity: same inputs, same outcome
    CHECK(filter_strategy_a(pair) == a);
    CHECK(filter_strategy_b(pair) == b);
    CHECK(filter_strategy_c(pair).keep == c.keep);
    // strategy C keeps a subset of strategy A's kept set
    if (c.keep) CHECK(a);
  }
}

TEST_CASE("split_by_date assigns leak-free splits") {
  auto mk = [&](std::vector<std::string> dates) {
    DatasetManifest m;
    int i = 0;
    for (const auto& d : dates) {
      ManifestRecord r;
      r.id = "r" + std::to_string(i++);
      r.ir_path = "x";
      r.vis_path = "y";
      r.ts = parse_rfc3339(d);
      m.records.push_back(r);
    }
    return m;
  };

  // gap 0: nothing excluded, clean two-way split
  auto m0 = mk({"2019-12-30", "2019-12-31", "2020-01-01"});
  split_by_date(m0, {parse_rfc3339("2019-12-31")}, 0);
  REQUIRE(m0.records.size() == 3);
  CHECK(m0.records[0].split == Split::train);
  CHECK(m0.records[1].split == Split::train);
  CHECK(m0.records[2].split == Split::test);

  // 14-day gap before the year-end boundary removes the tail of December
  std::vector<std::string> dates;
  for (int d = 1; d <= 31; ++d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "2019-12-%02d", d);
    dates.push_back(buf);
  }
  dates.push_back("2020-01-01");
  dates.push_back("2020-01-05");
  auto m1 = mk(dates);
  split_by_date(m1, {parse_rfc3339("2019-12-31")}, 14);
  int64_t max_train = 0, min_test = INT64_MAX;
  for (const auto& r : m1.records) {
    if (r.split == Split::train) max_train = std::max(max_train, r.ts);
    if (r.split == Split::test) min_test = std::min(min_test, r.ts);
  }
  CHECK(format_rfc3339(max_train).substr(0, 10) == "2019-12-17");
  CHECK(format_rfc3339(min_test).substr(0, 10) == "2020-01-01");
  // leak-free invariant
  CHECK(utc_day_index(min_test) - utc_day_index(max_train) >= 14);
  // the gap window itself is gone
  for (const auto& r : m1.records) {
    const auto day = format_rfc3339(r.ts).substr(0, 10);
    CHECK(day != "2019-12-18");
    CHECK(day != "2019-12-31");
  }

  // all records after the boundary -> all test
  auto m2 = mk({"2021-05-01", "2021-06-01"});
  split_by_date(m2, {parse_rfc3339("2020-12-31")}, 14);
  for (const auto& r : m2.records) CHECK(r.split == Split::test);

  // three-way split with two boundaries
  auto m3 = mk({"2019-06-01", "2020-01-05", "2020-01-20"});
  split_by_date(m3,
                {parse_rfc3339("2019-12-31"), parse_rfc3339("2020-01-15")},
                0);
  CHECK(m3.records[0].split == Split::train);
  CHECK(m3.records[1].split == Split::val);
  CHECK(m3.records[2].split == Split::test);

  // overlapping boundary windows are a configuration error
  auto m4 = mk({"2020-01-01"});
  CHECK_THROWS_AS(
      split_by_date(m4, {parse_rfc3339("2020-01-10"),
                         parse_rfc3339("2020-01-12")}, 14),
      ConfigError);
}

TEST_CASE("synthetic dataset is deterministic, normalized and shaped") {
  auto a = synth_dataset<float>(4, 32, 7);
  auto b = synth_dataset<float>(4, 32, 7);
  REQUIRE(a.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ir.shape() == Shape4{1, 3, 32, 32});
    CHECK(a[i].visible->shape() == Shape4{1, 3, 32, 32});
    CHECK(a[i].ir.values() == b[i].ir.values());  // bit-identical
    CHECK(a[i].visible->values() == b[i].visible->values());
    for (float v : a[i].visible->values()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
    for (float v : a[i].ir.values()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  auto c = synth_dataset<float>(4, 32, 8);
  CHECK(a[0].ir.values() != c[0].ir.values());
}
