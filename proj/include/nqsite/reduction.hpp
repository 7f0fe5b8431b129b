#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nqsite {

// Fixed-shape pairwise summation.  The reduction tree depends only on the
// element count, never on thread count or chunking, so every batch mean in
// the code base is bit-reproducible; the tree also keeps rounding error at
// O(log n) instead of O(n).
template <class T>
T pairwise_sum(const T* data, std::size_t n) {
  if (n == 0) return T{};
  if (n <= 8) {
    T acc = data[0];
    for (std::size_t i = 1; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  T left = pairwise_sum(data, half);
  T right = pairwise_sum(data + half, n - half);
  left += right;
  return left;
}

template <class T>
T pairwise_sum(std::span<const T> data) {
  return pairwise_sum(data.data(), data.size());
}

template <class T>
T pairwise_sum(const std::vector<T>& data) {
  return pairwise_sum(data.data(), data.size());
}

// Samples are reduced in fixed blocks of this many consecutive elements;
// blocks are distributed over threads and the per-block partials combined
// pairwise on one thread.
constexpr std::size_t kReductionBlock = 32;

inline std::size_t reduction_block_count(std::size_t n) {
  return (n + kReductionBlock - 1) / kReductionBlock;
}

}  // namespace nqsite
