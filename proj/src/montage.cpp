#include "ir2vis/montage.hpp"

#include "ir2vis/errors.hpp"

namespace ir2vis {

ImageU8 compose_montage(const std::vector<std::vector<ImageU8>>& rows,
                        const MontageLayout& layout) {
  if (rows.empty() || rows[0].empty())
    throw ContractError("montage: no panels");
  const int pw = rows[0][0].width;
  const int ph = rows[0][0].height;
  const size_t cols = rows[0].size();
  for (const auto& row : rows) {
    if (row.size() != cols)
      throw DimensionError("montage: rows have different panel counts");
    for (const auto& panel : row)
      if (panel.width != pw || panel.height != ph)
        throw DimensionError("montage: panels have different sizes");
  }

  const int g = layout.gutter;
  ImageU8 out;
  out.width = static_cast<int>(cols) * pw + (static_cast<int>(cols) - 1) * g;
  out.height =
      static_cast<int>(rows.size()) * ph + (static_cast<int>(rows.size()) - 1) * g;
  out.rgb.assign(static_cast<size_t>(out.width) * out.height * 3,
                 layout.gutter_value);

  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < cols; ++c) {
      const ImageU8& panel = rows[r][c];
      const int y0 = static_cast<int>(r) * (ph + g);
      const int x0 = static_cast<int>(c) * (pw + g);
      for (int y = 0; y < ph; ++y) {
        const uint8_t* src = panel.rgb.data() + size_t(y) * pw * 3;
        uint8_t* dst =
            out.rgb.data() + (size_t(y0 + y) * out.width + x0) * 3;
        std::copy(src, src + size_t(pw) * 3, dst);
      }
    }
  }
  return out;
}

}  // namespace ir2vis
