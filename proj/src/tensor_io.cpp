#include "ir2vis/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace ir2vis {
namespace {

constexpr char kMagic[4] = {'I', 'V', 'T', '1'};

void put_u32le(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError("ivt: truncated header in " + path);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

template <class U>
void write_payload_le(std::ostream& os, const std::vector<U>& data) {
  static_assert(sizeof(U) == 4 || sizeof(U) == 8);
  using Bits = std::conditional_t<sizeof(U) == 4, uint32_t, uint64_t>;
  std::vector<unsigned char> buf(data.size() * sizeof(U));
  for (size_t i = 0; i < data.size(); ++i) {
    Bits bits;
    std::memcpy(&bits, &data[i], sizeof(U));
    for (size_t b = 0; b < sizeof(U); ++b)
      buf[i * sizeof(U) + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
}

template <class U>
std::vector<U> read_payload_le(std::istream& is, size_t count,
                               const std::string& path) {
  using Bits = std::conditional_t<sizeof(U) == 4, uint32_t, uint64_t>;
  std::vector<unsigned char> buf(count * sizeof(U));
  if (!is.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size())))
    throw IoError("ivt: truncated payload in " + path);
  std::vector<U> data(count);
  for (size_t i = 0; i < count; ++i) {
    Bits bits = 0;
    for (size_t b = 0; b < sizeof(U); ++b)
      bits |= Bits(buf[i * sizeof(U) + b]) << (8 * b);
    std::memcpy(&data[i], &bits, sizeof(U));
  }
  return data;
}

struct IvtHeader {
  Dtype dtype;
  Shape4 shape;
};

IvtHeader read_header(std::istream& is, const std::string& path) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("ivt: bad magic in " + path);
  char dt;
  if (!is.get(dt)) throw IoError("ivt: truncated header in " + path);
  if (dt != 0 && dt != 1)
    throw IoError("ivt: unknown dtype byte " + std::to_string(int(dt)) +
                  " in " + path);
  IvtHeader h;
  h.dtype = static_cast<Dtype>(dt);
  h.shape.n = get_u32le(is, path);
  h.shape.c = get_u32le(is, path);
  h.shape.h = get_u32le(is, path);
  h.shape.w = get_u32le(is, path);
  return h;
}

}  // namespace

template <class T>
void save_ivt(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("ivt: cannot open for writing: " + path);
  os.write(kMagic, 4);
  os.put(sizeof(T) == 4 ? 0 : 1);
  const Shape4& s = t.shape();
  put_u32le(os, static_cast<uint32_t>(s.n));
  put_u32le(os, static_cast<uint32_t>(s.c));
  put_u32le(os, static_cast<uint32_t>(s.h));
  put_u32le(os, static_cast<uint32_t>(s.w));
  write_payload_le(os, t.values());
  if (!os) throw IoError("ivt: write failed: " + path);
}

template <class T>
Tensor<T> load_ivt(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("ivt: cannot open: " + path);
  const IvtHeader h = read_header(is, path);
  const size_t count = static_cast<size_t>(h.shape.count());
  std::vector<T> out(count);
  if (h.dtype == Dtype::f32) {
    auto raw = read_payload_le<float>(is, count, path);
    for (size_t i = 0; i < count; ++i) out[i] = static_cast<T>(raw[i]);
  } else {
    auto raw = read_payload_le<double>(is, count, path);
    for (size_t i = 0; i < count; ++i) out[i] = static_cast<T>(raw[i]);
  }
  return Tensor<T>::from_vector(h.shape, std::move(out));
}

Dtype peek_ivt_dtype(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("ivt: cannot open: " + path);
  return read_header(is, path).dtype;
}

template void save_ivt<float>(const std::string&, const Tensor<float>&);
template void save_ivt<double>(const std::string&, const Tensor<double>&);
template Tensor<float> load_ivt<float>(const std::string&);
template Tensor<double> load_ivt<double>(const std::string&);

}  // namespace ir2vis
