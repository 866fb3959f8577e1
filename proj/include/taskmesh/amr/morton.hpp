#pragma once

// Morton (bit-interleaved) keys over the refinement octree. Index bits hold
// one (k,j,i) triple per level, i least significant within each triple, so
// key order restricted to leaves equals depth-first octree order.

#include <cstdint>
#include <stdexcept>

namespace taskmesh::amr {

class AmrError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct MortonKey {
  int level = 0;
  std::uint64_t index = 0;

  friend bool operator==(const MortonKey&, const MortonKey&) = default;
};

struct CellCoords {
  std::uint64_t i = 0, j = 0, k = 0;

  friend bool operator==(const CellCoords&, const CellCoords&) = default;
};

inline constexpr int kMaxMortonLevel = 20;  // 60 index bits

inline MortonKey morton_encode(int level, std::uint64_t i, std::uint64_t j,
                               std::uint64_t k) {
  if (level < 0 || level > kMaxMortonLevel)
    throw AmrError("morton_encode: level out of range");
  const std::uint64_t limit = 1ull << level;
  if (i >= limit || j >= limit || k >= limit)
    throw AmrError("morton_encode: coordinate out of range for level");
  std::uint64_t idx = 0;
  for (int b = 0; b < level; ++b) {
    idx |= ((i >> b) & 1ull) << (3 * b);
    idx |= ((j >> b) & 1ull) << (3 * b + 1);
    idx |= ((k >> b) & 1ull) << (3 * b + 2);
  }
  return MortonKey{level, idx};
}

inline CellCoords morton_decode(const MortonKey& key) {
  if (key.level < 0 || key.level > kMaxMortonLevel)
    throw AmrError("morton_decode: level out of range");
  if (key.level < 64 / 3 && key.index >> (3 * key.level) != 0)
    throw AmrError("morton_decode: index has bits above the level");
  CellCoords c;
  for (int b = 0; b < key.level; ++b) {
    c.i |= ((key.index >> (3 * b)) & 1ull) << b;
    c.j |= ((key.index >> (3 * b + 1)) & 1ull) << b;
    c.k |= ((key.index >> (3 * b + 2)) & 1ull) << b;
  }
  return c;
}

/// Depth-first position of a key inside one octree, comparable across
/// levels: the key's index aligned to the deepest level.
inline std::uint64_t morton_dfs_rank(const MortonKey& key) {
  return key.index << (3 * (kMaxMortonLevel - key.level));
}

}  // namespace taskmesh::amr
