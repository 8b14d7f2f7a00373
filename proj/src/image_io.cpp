#include "ir2vis/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>

namespace ir2vis {

ImageU8 read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("png: cannot read " + path + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  ImageU8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("png: decode failed for " + path + ": " + image.message);
  }
  return out;
}

void write_png(const std::string& path, const ImageU8& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (static_cast<size_t>(img.width) * img.height * 3 != img.rgb.size())
    throw IoError("png: pixel buffer does not match declared size for " +
                  path);
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0,
                               nullptr))
    throw IoError("png: cannot write " + path + ": " + image.message);
}

template <class T>
Tensor<T> image_to_tensor(const ImageU8& img, double l_raw) {
  const int64_t h = img.height, w = img.width;
  Tensor<T> t(Shape4{1, 3, h, w});
  const T inv = T(1.0 / l_raw);
  auto& v = t.values();
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < 3; ++ch)
        v[(ch * h + y) * w + x] = T(img.rgb[(y * w + x) * 3 + ch]) * inv;
  return t;
}

template <class T>
ImageU8 tensor_to_image(const Tensor<T>& t) {
  const Shape4 s = t.shape();
  if (s.n != 1 || s.c != 3)
    throw DimensionError("tensor_to_image: expected 1x3xHxW, got " + s.str());
  ImageU8 img;
  img.width = static_cast<int>(s.w);
  img.height = static_cast<int>(s.h);
  img.rgb.resize(static_cast<size_t>(3 * s.h * s.w));
  const auto& v = t.values();
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      for (int64_t ch = 0; ch < 3; ++ch) {
        double u = static_cast<double>(v[(ch * s.h + y) * s.w + x]) * 255.0;
        u = std::nearbyint(std::min(255.0, std::max(0.0, u)));
        img.rgb[(y * s.w + x) * 3 + ch] = static_cast<uint8_t>(u);
      }
    }
  }
  return img;
}

template Tensor<float> image_to_tensor<float>(const ImageU8&, double);
template Tensor<double> image_to_tensor<double>(const ImageU8&, double);
template ImageU8 tensor_to_image<float>(const Tensor<float>&);
template ImageU8 tensor_to_image<double>(const Tensor<double>&);

}  // namespace ir2vis
