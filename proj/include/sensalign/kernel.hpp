#pragma once

#include <cstddef>
#include <iterator>
#include <utility>
#include <cstdint>
#include <span>
#include <vector>

#include "sensalign/embedding_store.hpp"

namespace sensalign {

inline constexpr std::size_t kDefaultK = 10;

// n x n cosine similarity matrix, stored row-major in double precision.
// Exactly symmetric: the lower triangle is a copy of the upper one.
class Kernel {
 public:
  Kernel() = default;
  Kernel(std::size_t n, std::vector<double> values);

  std::size_t n() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

Kernel cosine_kernel(const EmbeddingMatrix& x);

// Per-row top-k neighbor lists, self excluded, ordered by descending
// similarity then ascending index.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  NeighborIndex(std::size_t n, std::size_t k, std::vector<std::uint32_t> lists);

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }
  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {lists_.data() + i * k_, k_};
  }
  std::span<const std::uint32_t> lists() const noexcept { return lists_; }

  bool operator==(const NeighborIndex&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::uint32_t> lists_;
};

NeighborIndex topk_neighbors(const Kernel& kernel, std::size_t k);

// Neighbor search over an implicit n x n similarity `sim(i, j)`. Used by the
// bootstrap to search resampled kernels without materialising them.
template <typename Similarity>
NeighborIndex topk_neighbors_by(std::size_t n, std::size_t k, Similarity&& sim);

struct AlignmentScore {
  double value = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
  // Sum over rows of |Na(i) ∩ Nb(i)|; value == shared / (n * k).
  std::uint64_t shared = 0;
};

// |a ∩ b| for two duplicate-free neighbor lists.
std::size_t intersection_size(std::span<const std::uint32_t> a,
                              std::span<const std::uint32_t> b);

AlignmentScore mutual_knn_alignment(const NeighborIndex& a, const NeighborIndex& b);

// Mutual-kNN alignment of two paired embedding sets.
AlignmentScore alignment(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t k);

// Biased linear CKA with column centering.
double linear_cka(const EmbeddingMatrix& x, const EmbeddingMatrix& y);

// Implementation details shared with the bootstrap.
namespace detail {
void check_k(std::size_t n, std::size_t k);
}

template <typename Similarity>
NeighborIndex topk_neighbors_by(std::size_t n, std::size_t k, Similarity&& sim) {
  detail::check_k(n, k);
  std::vector<std::uint32_t> lists(n * k);
  // Best-first buffer of (similarity, index). Candidates arrive in ascending
  // index order, so an equal similarity never displaces an earlier index.
  std::vector<std::pair<double, std::uint32_t>> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < n; ++i) {
    best.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = sim(i, j);
      if (best.size() == k && !(v > best.back().first)) continue;
      auto pos = best.end();
      while (pos != best.begin() && v > std::prev(pos)->first) --pos;
      best.insert(pos, {v, static_cast<std::uint32_t>(j)});
      if (best.size() > k) best.pop_back();
    }
    for (std::size_t r = 0; r < k; ++r) lists[i * k + r] = best[r].second;
  }
  return NeighborIndex(n, k, std::move(lists));
}

}  // namespace sensalign
