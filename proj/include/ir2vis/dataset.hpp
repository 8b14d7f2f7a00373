#ifndef IR2VIS_DATASET_HPP
#define IR2VIS_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ir2vis/tensor.hpp"

namespace ir2vis {

enum class Split { train, val, test, deploy };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

/// Boolean per-pixel validity map. An all-true mask is equivalent to no mask.
struct PixelMask {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> valid;  // 1 = valid, 0 = invalid (dark)

  static PixelMask all_valid(int64_t h, int64_t w);
  bool is_all_valid() const;
  int64_t invalid_count() const;
  uint8_t at(int64_t y, int64_t x) const { return valid[y * w + x]; }
  void set(int64_t y, int64_t x, bool v) { valid[y * w + x] = v ? 1 : 0; }
};

/// One (IR composite, visible target) pair. Values are normalized to [0, 1];
/// visible may be absent for deploy-split (nighttime) records.
template <class T>
struct SamplePair {
  std::string id;
  int64_t ts = 0;  // UTC seconds since epoch
  Tensor<T> ir;    // (1, 3, H, W)
  std::optional<Tensor<T>> visible;
  std::optional<PixelMask> mask;
  Split split = Split::train;
};

struct ManifestRecord {
  std::string id;
  std::string ir_path;
  std::string vis_path;   // empty => no visible target
  std::string mask_path;  // optional, written by preprocess --filter c
  int64_t ts = 0;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  double l_raw = 255.0;  // dynamic range of raw source pixels
};

/// RFC 3339 timestamp (date-only also accepted) to UTC epoch seconds.
int64_t parse_rfc3339(const std::string& text);
std::string format_rfc3339(int64_t epoch_seconds);
int64_t utc_day_index(int64_t epoch_seconds);

/// Parses the JSON array manifest; relative image paths resolve against the
/// manifest's directory. Validates unique ids and that referenced files
/// exist.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

/// Loads one record; PNG pixels are divided by l_raw, IVT1 tensors are taken
/// as already normalized and any in-band NaN becomes an invalid mask entry.
template <class T>
SamplePair<T> load_pair(const ManifestRecord& rec, double l_raw = 255.0);

/// Marks a pixel dark iff the sum of its 3 channel values is under 5/255
/// (i.e. a raw 8-bit channel sum under 5 of the 765 maximum).
template <class T>
PixelMask classify_dark_pixels(const Tensor<T>& visible);

/// Drop iff more than 99% of pixels are black (all three channels exactly 0).
template <class T>
bool filter_strategy_a(const SamplePair<T>& pair);

/// Keep iff more than 80% of all scalar entries across the 3 channels are
/// non-zero.
template <class T>
bool filter_strategy_b(const SamplePair<T>& pair);

template <class T>
struct StrategyCResult {
  bool keep = false;
  PixelMask mask;  // dark pixels invalid; meaningful only when keep
};

/// Drop iff more than 0.2% of pixels are dark; kept pairs carry a mask over
/// the remaining dark pixels.
template <class T>
StrategyCResult<T> filter_strategy_c(const SamplePair<T>& pair);

/// Assigns splits by date. boundaries holds 1 or 2 timestamps: records on or
/// before a boundary (minus the gap) fall in the earlier split, records after
/// it in the later one, and records inside the trailing gap_days window are
/// removed entirely, so min(test) - max(train) always exceeds gap_days.
void split_by_date(DatasetManifest& m, const std::vector<int64_t>& boundaries,
                   int gap_days);

/// Deterministic procedural IR/visible pairs for desk-scale runs. The
/// visible image is a fixed pointwise nonlinearity of the IR composite plus
/// low-amplitude smoothed noise, so models can demonstrably learn the map.
template <class T>
std::vector<SamplePair<T>> synth_dataset(int n, int size, uint64_t seed);

#define IR2VIS_DATASET_EXTERN(T)                                             \
  extern template struct SamplePair<T>;                                      \
  extern template SamplePair<T> load_pair<T>(const ManifestRecord&, double); \
  extern template PixelMask classify_dark_pixels<T>(const Tensor<T>&);       \
  extern template bool filter_strategy_a<T>(const SamplePair<T>&);           \
  extern template bool filter_strategy_b<T>(const SamplePair<T>&);           \
  extern template StrategyCResult<T> filter_strategy_c<T>(                   \
      const SamplePair<T>&);                                                 \
  extern template std::vector<SamplePair<T>> synth_dataset<T>(int, int,      \
                                                              uint64_t);
IR2VIS_DATASET_EXTERN(float)
IR2VIS_DATASET_EXTERN(double)
#undef IR2VIS_DATASET_EXTERN

}  // namespace ir2vis

#endif  // IR2VIS_DATASET_HPP
