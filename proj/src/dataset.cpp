#include "ir2vis/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ir2vis/image_io.hpp"
#include "ir2vis/rng.hpp"
#include "ir2vis/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ir2vis {

namespace {

// Dark-pixel threshold: a raw 8-bit channel sum strictly below 5 of 765.
// The small slack absorbs float rounding of k/255 terms without ever moving
// a raw sum of 5 (~0.0196) across the line.
constexpr double kDarkSumThreshold = 5.0 / 255.0 - 1e-7;

// days_from_civil (Howard Hinnant's algorithm), proleptic Gregorian.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yy = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

bool looks_like_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  unsigned char sig[4] = {0, 0, 0, 0};
  is.read(reinterpret_cast<char*>(sig), 4);
  return is && sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' &&
         sig[3] == 'G';
}

double bilerp_grid(const std::vector<double>& grid, int g, double u,
                   double v) {
  // grid is (g+1) x (g+1); u, v in [0, 1]
  const double x = u * g, y = v * g;
  const int x0 = std::min(g - 1, static_cast<int>(x));
  const int y0 = std::min(g - 1, static_cast<int>(y));
  const double fx = x - x0, fy = y - y0;
  const double a = grid[y0 * (g + 1) + x0];
  const double b = grid[y0 * (g + 1) + x0 + 1];
  const double c = grid[(y0 + 1) * (g + 1) + x0];
  const double d = grid[(y0 + 1) * (g + 1) + x0 + 1];
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

std::vector<double> noise_grid(Rng& rng, int g) {
  std::vector<double> grid((g + 1) * (g + 1));
  for (auto& v : grid) v = uniform01(rng);
  return grid;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::deploy: return "deploy";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  if (name == "deploy") return Split::deploy;
  throw ValidationError("unknown split name '" + name + "'");
}

PixelMask PixelMask::all_valid(int64_t h, int64_t w) {
  PixelMask m;
  m.h = h;
  m.w = w;
  m.valid.assign(static_cast<size_t>(h * w), 1);
  return m;
}

bool PixelMask::is_all_valid() const {
  return std::all_of(valid.begin(), valid.end(),
                     [](uint8_t v) { return v != 0; });
}

int64_t PixelMask::invalid_count() const {
  return static_cast<int64_t>(
      std::count(valid.begin(), valid.end(), uint8_t(0)));
}

int64_t parse_rfc3339(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2u-%2u%n", &y, &mo, &d, &consumed) != 3)
    throw ValidationError("invalid timestamp '" + text + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31)
    throw ValidationError("invalid calendar date '" + text + "'");
  int64_t offset_sec = 0;
  size_t pos = static_cast<size_t>(consumed);
  if (pos < text.size()) {
    const char sep = text[pos];
    if (sep != 'T' && sep != 't' && sep != ' ')
      throw ValidationError("invalid timestamp '" + text + "'");
    ++pos;
    if (std::sscanf(text.c_str() + pos, "%2u:%2u:%2u%n", &hh, &mi, &ss,
                    &consumed) != 3)
      throw ValidationError("invalid time of day in '" + text + "'");
    pos += static_cast<size_t>(consumed);
    if (hh > 23 || mi > 59 || ss > 60)
      throw ValidationError("invalid time of day in '" + text + "'");
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])))
        ++pos;  // fractional seconds truncated
    }
    if (pos < text.size()) {
      const char z = text[pos];
      if (z == 'Z' || z == 'z') {
        ++pos;
      } else if (z == '+' || z == '-') {
        unsigned oh = 0, om = 0;
        if (std::sscanf(text.c_str() + pos + 1, "%2u:%2u%n", &oh, &om,
                        &consumed) != 2)
          throw ValidationError("invalid UTC offset in '" + text + "'");
        offset_sec = (z == '+' ? -1 : 1) * (int64_t(oh) * 3600 + om * 60);
        pos += 1 + static_cast<size_t>(consumed);
      }
    }
    if (pos != text.size())
      throw ValidationError("trailing characters in timestamp '" + text + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + int64_t(hh) * 3600 +
         int64_t(mi) * 60 + ss + offset_sec;
}

std::string format_rfc3339(int64_t epoch_seconds) {
  int64_t days = epoch_seconds / 86400;
  int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y;
  unsigned mo, d;
  civil_from_days(days, y, mo, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y,
                mo, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

int64_t utc_day_index(int64_t epoch_seconds) {
  int64_t days = epoch_seconds / 86400;
  if (epoch_seconds % 86400 < 0) --days;
  return days;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("manifest: cannot open " + path);
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw IoError("manifest: parse error in " + path + ": " + e.what());
  }
  if (!doc.is_array())
    throw ValidationError("manifest: top-level JSON array expected in " +
                          path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) -> std::string {
    if (p.empty()) return p;
    fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  DatasetManifest m;
  std::set<std::string> seen;
  for (const auto& item : doc) {
    ManifestRecord rec;
    try {
      rec.id = item.at("id").get<std::string>();
      rec.ir_path = resolve(item.at("ir").get<std::string>());
      if (item.contains("vis") && !item["vis"].is_null())
        rec.vis_path = resolve(item["vis"].get<std::string>());
      if (item.contains("mask") && !item["mask"].is_null())
        rec.mask_path = resolve(item["mask"].get<std::string>());
      rec.ts = parse_rfc3339(item.at("ts").get<std::string>());
      rec.split = item.contains("split")
                      ? split_from_name(item["split"].get<std::string>())
                      : Split::train;
    } catch (const json::exception& e) {
      throw ValidationError("manifest: bad record in " + path + ": " +
                            e.what());
    }
    if (!seen.insert(rec.id).second)
      throw ValidationError("manifest: duplicate id '" + rec.id + "'");
    if (!fs::exists(rec.ir_path))
      throw IoError("manifest: record '" + rec.id + "': missing ir file " +
                    rec.ir_path);
    if (!rec.vis_path.empty() && !fs::exists(rec.vis_path))
      throw IoError("manifest: record '" + rec.id + "': missing vis file " +
                    rec.vis_path);
    if (!rec.mask_path.empty() && !fs::exists(rec.mask_path))
      throw IoError("manifest: record '" + rec.id + "': missing mask file " +
                    rec.mask_path);
    if (rec.vis_path.empty() && rec.split != Split::deploy)
      throw ValidationError("manifest: record '" + rec.id +
                            "': missing visible target is only allowed for "
                            "split=deploy");
    m.records.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  json doc = json::array();
  for (const auto& rec : m.records) {
    json item;
    item["id"] = rec.id;
    item["ir"] = rec.ir_path;
    if (!rec.vis_path.empty()) item["vis"] = rec.vis_path;
    if (!rec.mask_path.empty()) item["mask"] = rec.mask_path;
    item["ts"] = format_rfc3339(rec.ts);
    item["split"] = split_name(rec.split);
    doc.push_back(std::move(item));
  }
  std::ofstream os(path);
  if (!os) throw IoError("manifest: cannot write " + path);
  os << doc.dump(2) << "\n";
}

namespace {

template <class T>
Tensor<T> load_image_any(const std::string& path, const std::string& id,
                         double l_raw, PixelMask* nan_mask) {
  Tensor<T> t;
  try {
    if (looks_like_png(path)) {
      t = image_to_tensor<T>(read_png(path), l_raw);
    } else {
      t = load_ivt<T>(path);
    }
  } catch (const IoError& e) {
    throw IoError("record '" + id + "': " + e.what());
  }
  const Shape4 s = t.shape();
  if (s.n != 1 || s.c != 3)
    throw ValidationError("record '" + id + "': expected 1x3xHxW image, got " +
                          s.str());
  // In-band NaN marks invalid pixels; convert to mask entries.
  auto& v = t.values();
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      bool bad = false;
      for (int64_t c = 0; c < 3; ++c) {
        T& val = v[(c * s.h + y) * s.w + x];
        if (std::isnan(static_cast<double>(val))) {
          val = T(0);
          bad = true;
        }
      }
      if (bad && nan_mask) {
        if (nan_mask->valid.empty()) *nan_mask = PixelMask::all_valid(s.h, s.w);
        nan_mask->set(y, x, false);
      }
    }
  }
  return t;
}

}  // namespace

template <class T>
SamplePair<T> load_pair(const ManifestRecord& rec, double l_raw) {
  SamplePair<T> pair;
  pair.id = rec.id;
  pair.ts = rec.ts;
  pair.split = rec.split;

  PixelMask nan_mask;
  pair.ir = load_image_any<T>(rec.ir_path, rec.id, l_raw, &nan_mask);
  const Shape4 irs = pair.ir.shape();

  if (!rec.vis_path.empty()) {
    Tensor<T> vis = load_image_any<T>(rec.vis_path, rec.id, l_raw, &nan_mask);
    if (vis.shape().h != irs.h || vis.shape().w != irs.w)
      throw ValidationError("record '" + rec.id + "': visible " +
                            vis.shape().str() + " does not match ir " +
                            irs.str() + " on the spatial axes");
    pair.visible = std::move(vis);
  } else if (rec.split != Split::deploy) {
    throw ValidationError("record '" + rec.id +
                          "': missing visible target is only allowed for "
                          "split=deploy");
  }

  if (!rec.mask_path.empty()) {
    Tensor<T> mt = load_ivt<T>(rec.mask_path);
    if (mt.shape().h != irs.h || mt.shape().w != irs.w ||
        mt.shape().c != 1)
      throw ValidationError("record '" + rec.id + "': mask " +
                            mt.shape().str() + " does not match image " +
                            irs.str());
    PixelMask m = PixelMask::all_valid(irs.h, irs.w);
    for (int64_t i = 0; i < irs.h * irs.w; ++i)
      m.valid[i] = mt.values()[i] != T(0) ? 1 : 0;
    pair.mask = std::move(m);
  }
  if (!nan_mask.valid.empty()) {
    if (pair.mask) {
      for (size_t i = 0; i < pair.mask->valid.size(); ++i)
        pair.mask->valid[i] &= nan_mask.valid[i];
    } else {
      pair.mask = std::move(nan_mask);
    }
  }
  return pair;
}

template <class T>
PixelMask classify_dark_pixels(const Tensor<T>& visible) {
  const Shape4 s = visible.shape();
  PixelMask mask = PixelMask::all_valid(s.h, s.w);
  const auto& v = visible.values();
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      const double sum = static_cast<double>(v[(0 * s.h + y) * s.w + x]) +
                         static_cast<double>(v[(1 * s.h + y) * s.w + x]) +
                         static_cast<double>(v[(2 * s.h + y) * s.w + x]);
      if (sum < kDarkSumThreshold) mask.set(y, x, false);
    }
  }
  return mask;
}

template <class T>
bool filter_strategy_a(const SamplePair<T>& pair) {
  if (!pair.visible) throw ContractError("filter a: visible image required");
  const Tensor<T>& vis = *pair.visible;
  const Shape4 s = vis.shape();
  const auto& v = vis.values();
  int64_t black = 0;
  const int64_t total = s.h * s.w;
  for (int64_t i = 0; i < total; ++i) {
    if (v[i] == T(0) && v[total + i] == T(0) && v[2 * total + i] == T(0))
      ++black;
  }
  // drop iff black fraction strictly exceeds 99%
  return !(black * 100 > total * 99);
}

template <class T>
bool filter_strategy_b(const SamplePair<T>& pair) {
  if (!pair.visible) throw ContractError("filter b: visible image required");
  const auto& v = pair.visible->values();
  int64_t nonzero = 0;
  for (const T x : v)
    if (x != T(0)) ++nonzero;
  const int64_t total = static_cast<int64_t>(v.size());  // 3*H*W
  // keep iff non-zero fraction strictly exceeds 80%
  return nonzero * 5 > total * 4;
}

template <class T>
StrategyCResult<T> filter_strategy_c(const SamplePair<T>& pair) {
  if (!pair.visible) throw ContractError("filter c: visible image required");
  StrategyCResult<T> res;
  res.mask = classify_dark_pixels(*pair.visible);
  const int64_t dark = res.mask.invalid_count();
  const int64_t total = res.mask.h * res.mask.w;
  // drop iff dark fraction strictly exceeds 0.2%
  res.keep = !(dark * 500 > total);
  return res;
}

void split_by_date(DatasetManifest& m, const std::vector<int64_t>& boundaries,
                   int gap_days) {
  if (boundaries.empty() || boundaries.size() > 2)
    throw ConfigError("split_by_date: expected 1 or 2 boundaries, got " +
                      std::to_string(boundaries.size()));
  if (gap_days < 0) throw ConfigError("split_by_date: negative gap");
  std::vector<int64_t> bdays;
  for (int64_t b : boundaries) bdays.push_back(utc_day_index(b));
  for (size_t i = 1; i < bdays.size(); ++i)
    if (bdays[i] - gap_days <= bdays[i - 1])
      throw ConfigError(
          "split_by_date: boundary windows overlap (boundaries closer than "
          "the gap)");

  const Split two[2] = {Split::train, Split::test};
  const Split three[3] = {Split::train, Split::val, Split::test};
  const Split* labels = boundaries.size() == 1 ? two : three;

  std::vector<ManifestRecord> kept;
  kept.reserve(m.records.size());
  for (auto& rec : m.records) {
    const int64_t day = utc_day_index(rec.ts);
    size_t idx = 0;
    bool excluded = false;
    for (size_t i = 0; i < bdays.size(); ++i) {
      if (day > bdays[i]) {
        idx = i + 1;
      } else if (day > bdays[i] - gap_days) {
        excluded = true;  // inside the leakage gap before this boundary
        break;
      }
    }
    if (excluded) continue;
    rec.split = labels[idx];
    kept.push_back(std::move(rec));
  }
  m.records = std::move(kept);
}

template <class T>
std::vector<SamplePair<T>> synth_dataset(int n, int size, uint64_t seed) {
  if (n < 1) throw ContractError("synth_dataset: n must be >= 1");
  if (size < 8) throw ContractError("synth_dataset: size must be >= 8");
  std::vector<SamplePair<T>> out;
  out.reserve(static_cast<size_t>(n));
  const int64_t base_ts = parse_rfc3339("2020-01-01T12:00:00Z");
  for (int i = 0; i < n; ++i) {
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(i) + 1);
    const auto coarse = noise_grid(rng, 4);
    const auto fine = noise_grid(rng, 8);
    std::vector<std::vector<double>> vis_noise;
    for (int c = 0; c < 3; ++c) vis_noise.push_back(noise_grid(rng, 8));

    SamplePair<T> pair;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%04d", i);
    pair.id = idbuf;
    pair.ts = base_ts + int64_t(i) * 86400;
    pair.split = Split::train;
    pair.ir = Tensor<T>(Shape4{1, 3, size, size});
    Tensor<T> vis(Shape4{1, 3, size, size});
    auto& irv = pair.ir.values();
    auto& viv = vis.values();
    const int64_t plane = int64_t(size) * size;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = size > 1 ? double(x) / (size - 1) : 0.0;
        const double v = size > 1 ? double(y) / (size - 1) : 0.0;
        const double f = 0.65 * bilerp_grid(coarse, 4, u, v) +
                         0.35 * bilerp_grid(fine, 8, u, v);
        const int64_t p = int64_t(y) * size + x;
        irv[0 * plane + p] = T(f);
        irv[1 * plane + p] = T(0.2 + 0.6 * f);
        irv[2 * plane + p] = T(1.0 - 0.8 * f);
        // visible = smooth pointwise map of the IR field + faint smooth noise
        const double s3 = f * f * (3.0 - 2.0 * f);
        double base[3] = {s3, f * f, 0.3 + 0.5 * f};
        for (int c = 0; c < 3; ++c) {
          const double noise =
              0.03 * (2.0 * bilerp_grid(vis_noise[c], 8, u, v) - 1.0);
          viv[c * plane + p] =
              T(std::min(1.0, std::max(0.0, base[c] + noise)));
        }
      }
    }
    pair.visible = std::move(vis);
    out.push_back(std::move(pair));
  }
  return out;
}

#define IR2VIS_DATASET_INSTANTIATE(T)                                  \
  template struct SamplePair<T>;                                        \
  template SamplePair<T> load_pair<T>(const ManifestRecord&, double);   \
  template PixelMask classify_dark_pixels<T>(const Tensor<T>&);         \
  template bool filter_strategy_a<T>(const SamplePair<T>&);             \
  template bool filter_strategy_b<T>(const SamplePair<T>&);             \
  template StrategyCResult<T> filter_strategy_c<T>(const SamplePair<T>&); \
  template std::vector<SamplePair<T>> synth_dataset<T>(int, int, uint64_t);
IR2VIS_DATASET_INSTANTIATE(float)
IR2VIS_DATASET_INSTANTIATE(double)
#undef IR2VIS_DATASET_INSTANTIATE

}  // namespace ir2vis
