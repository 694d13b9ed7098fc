#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace akspace {

template <typename T>
struct BasicTensor {
  std::vector<int> dims;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<int> d)
      : dims(std::move(d)), data(static_cast<size_t>(numel_of(dims)), T(0)) {}

  static int64_t numel_of(const std::vector<int>& d) {
    int64_t n = 1;
    for (int x : d) {
      if (x <= 0) throw std::invalid_argument("tensor dim must be positive");
      n *= x;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(dims.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // rank-specific helpers; callers know their layouts
  T& at(int i, int j) { return data[static_cast<size_t>(i) * dims[1] + j]; }
  const T& at(int i, int j) const { return data[static_cast<size_t>(i) * dims[1] + j]; }
  T& at(int c, int i, int j) {
    return data[(static_cast<size_t>(c) * dims[1] + i) * dims[2] + j];
  }
  const T& at(int c, int i, int j) const {
    return data[(static_cast<size_t>(c) * dims[1] + i) * dims[2] + j];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const BasicTensor& o) const { return dims == o.dims; }

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(dims);
    for (int64_t i = 0; i < numel(); ++i) out.data[static_cast<size_t>(i)] = static_cast<U>(data[static_cast<size_t>(i)]);
    return out;
  }
};

using Tensor = BasicTensor<float>;
using DTensor = BasicTensor<double>;

// Binary tensor file: magic "AKT1", then u32 rank, u32 dims[rank],
// then float32 payload, row-major, little-endian. Complex data is stored
// with a leading dimension of 2 (real plane then imaginary plane).
void write_akt1(const std::string& path, const Tensor& t);
Tensor read_akt1(const std::string& path);

}  // namespace akspace
