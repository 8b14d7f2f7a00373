#ifndef IR2VIS_TENSOR_IO_HPP
#define IR2VIS_TENSOR_IO_HPP

#include <string>

#include "ir2vis/tensor.hpp"

namespace ir2vis {

// IVT1 raw tensor container: 4-byte magic "IVT1", 1 byte dtype (0 = f32,
// 1 = f64), four 32-bit little-endian unsigned dims (N, C, H, W), then the
// row-major little-endian payload. Used for weight checkpoints and
// intermediate tensors.

enum class Dtype : uint8_t { f32 = 0, f64 = 1 };

template <class T>
void save_ivt(const std::string& path, const Tensor<T>& t);

/// Loads an IVT1 file, converting to T if the stored dtype differs.
/// NaN payload values survive the conversion; image loaders turn them into
/// mask entries.
template <class T>
Tensor<T> load_ivt(const std::string& path);

/// Dtype byte of an IVT1 file without reading the payload.
Dtype peek_ivt_dtype(const std::string& path);

extern template void save_ivt<float>(const std::string&, const Tensor<float>&);
extern template void save_ivt<double>(const std::string&,
                                      const Tensor<double>&);
extern template Tensor<float> load_ivt<float>(const std::string&);
extern template Tensor<double> load_ivt<double>(const std::string&);

}  // namespace ir2vis

#endif  // IR2VIS_TENSOR_IO_HPP
