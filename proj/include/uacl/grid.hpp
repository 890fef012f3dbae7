#pragma once

#include <cstdint>
#include <vector>

namespace uacl {

// Dense row-major matrix, just large enough for M x N per-pair quantities.
template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{})
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  const T& operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  bool same_shape(const Grid& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(T v) { data.assign(data.size(), v); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using Mat = Grid<double>;
using BitMat = Grid<std::uint8_t>;

}  // namespace uacl
