#pragma once

// The unit of compute and distribution: an edge^3 block of conserved cells
// wrapped in a ghost shell. Storage is var-major with x fastest, so x
// pencils are contiguous.

#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

#include "taskmesh/amr/morton.hpp"

namespace taskmesh::amr {

class SubGrid {
 public:
  SubGrid() = default;
  SubGrid(int edge, int ghost, int vars)
      : edge_(edge),
        ghost_(ghost),
        vars_(vars),
        stride_(edge + 2 * ghost),
        data_(static_cast<std::size_t>(vars) * stride_ * stride_ * stride_,
              0.0) {
    if (edge < 2 || ghost < 1 || vars < 1)
      throw AmrError("subgrid geometry out of range");
  }

  int edge() const { return edge_; }
  int ghost() const { return ghost_; }
  int vars() const { return vars_; }
  int stride() const { return stride_; }  // edge + 2*ghost

  std::size_t cells_per_var() const {
    return static_cast<std::size_t>(stride_) * stride_ * stride_;
  }

  // Storage coordinates: the interior occupies [ghost, ghost+edge) per axis.
  std::size_t offset(int var, int i, int j, int k) const {
    return (static_cast<std::size_t>(var) * stride_ + k) * stride_ * stride_ +
           static_cast<std::size_t>(j) * stride_ + i;
  }
  double& at(int var, int i, int j, int k) { return data_[offset(var, i, j, k)]; }
  double at(int var, int i, int j, int k) const {
    return data_[offset(var, i, j, k)];
  }

  std::span<double> raw() { return data_; }
  std::span<const double> raw() const { return data_; }

  /// Interior cells of one var in (k, j, i) iteration order, i fastest.
  void copy_interior_out(int var, std::span<double> out) const {
    std::size_t n = 0;
    for (int k = ghost_; k < ghost_ + edge_; ++k)
      for (int j = ghost_; j < ghost_ + edge_; ++j)
        for (int i = ghost_; i < ghost_ + edge_; ++i) out[n++] = at(var, i, j, k);
  }
  void copy_interior_in(int var, std::span<const double> in) {
    std::size_t n = 0;
    for (int k = ghost_; k < ghost_ + edge_; ++k)
      for (int j = ghost_; j < ghost_ + edge_; ++j)
        for (int i = ghost_; i < ghost_ + edge_; ++i) at(var, i, j, k) = in[n++];
  }

  /// Sequential interior sum of one var (left-to-right in storage order).
  double interior_sum(int var) const {
    double acc = 0.0;
    for (int k = ghost_; k < ghost_ + edge_; ++k)
      for (int j = ghost_; j < ghost_ + edge_; ++j)
        for (int i = ghost_; i < ghost_ + edge_; ++i) acc += at(var, i, j, k);
    return acc;
  }

 private:
  int edge_ = 0;
  int ghost_ = 0;
  int vars_ = 0;
  int stride_ = 0;
  std::vector<double> data_;
};

}  // namespace taskmesh::amr
