#ifndef IR2VIS_MONTAGE_HPP
#define IR2VIS_MONTAGE_HPP

#include <string>
#include <vector>

#include "ir2vis/image_io.hpp"

namespace ir2vis {

/// Lays out rows of equally-sized panels (IR | ground truth | per-method
/// predictions) separated by thin gutters. Every panel must share one size;
/// rows must share one panel count.
struct MontageLayout {
  int gutter = 2;
  uint8_t gutter_value = 255;
};

ImageU8 compose_montage(const std::vector<std::vector<ImageU8>>& rows,
                        const MontageLayout& layout = {});

}  // namespace ir2vis

#endif  // IR2VIS_MONTAGE_HPP
