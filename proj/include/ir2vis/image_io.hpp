#ifndef IR2VIS_IMAGE_IO_HPP
#define IR2VIS_IMAGE_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ir2vis/tensor.hpp"

namespace ir2vis {

/// 8-bit interleaved RGB image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 * width * height
};

ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

/// (1, 3, H, W) tensor with values scaled into [0, 1] by l_raw.
template <class T>
Tensor<T> image_to_tensor(const ImageU8& img, double l_raw = 255.0);

/// Rounds and clamps a (1, 3, H, W) tensor in [0, 1] back to 8-bit RGB.
template <class T>
ImageU8 tensor_to_image(const Tensor<T>& t);

extern template Tensor<float> image_to_tensor<float>(const ImageU8&, double);
extern template Tensor<double> image_to_tensor<double>(const ImageU8&, double);
extern template ImageU8 tensor_to_image<float>(const Tensor<float>&);
extern template ImageU8 tensor_to_image<double>(const Tensor<double>&);

}  // namespace ir2vis

#endif  // IR2VIS_IMAGE_IO_HPP
