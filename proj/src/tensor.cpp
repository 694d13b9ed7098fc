#include "akspace/tensor.hpp"

#include <cstring>
#include <fstream>

namespace akspace {

namespace {

constexpr char kMagic[4] = {'A', 'K', 'T', '1'};
constexpr int kMaxRank = 8;
constexpr int64_t kMaxDim = 1 << 20;
constexpr int64_t kMaxNumel = 1ll << 28;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("tensor file truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_akt1(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int d : t.dims) put_u32(os, static_cast<uint32_t>(d));
  for (float v : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor read_akt1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad tensor magic in " + path);
  uint32_t rank = get_u32(is);
  if (rank == 0 || rank > kMaxRank) throw std::runtime_error("bad tensor rank in " + path);
  std::vector<int> dims(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = get_u32(is);
    if (d == 0 || d > kMaxDim) throw std::runtime_error("bad tensor dim in " + path);
    dims[i] = static_cast<int>(d);
    numel *= d;
    if (numel > kMaxNumel) throw std::runtime_error("tensor too large in " + path);
  }
  Tensor t(dims);
  for (int64_t i = 0; i < numel; ++i) {
    uint32_t bits = get_u32(is);
    std::memcpy(&t.data[static_cast<size_t>(i)], &bits, 4);
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("trailing bytes in " + path);
  return t;
}

}  // namespace akspace
