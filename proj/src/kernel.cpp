#include "sensalign/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sensalign/error.hpp"

namespace sensalign {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix to_double(const EmbeddingMatrix& x) {
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      view(x.data().data(), static_cast<Eigen::Index>(x.rows()),
           static_cast<Eigen::Index>(x.cols()));
  return view.cast<double>();
}

RowMatrix centered(const EmbeddingMatrix& x) {
  RowMatrix m = to_double(x);
  m.rowwise() -= m.colwise().mean();
  return m;
}

}  // namespace

namespace detail {

void check_k(std::size_t n, std::size_t k) {
  if (k < 1 || k + 1 > n) {
    fail("k out of range: k=" + std::to_string(k) + " requires 1 ≤ k ≤ n−1 with n=" +
         std::to_string(n));
  }
}

}  // namespace detail

Kernel::Kernel(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n_ * n_) fail("kernel values do not form an n x n matrix");
}

namespace {

// Fixed summation order, so the result depends only on the two rows' contents:
// identical rows give bitwise-identical similarities.
double dot(const double* a, const double* b, std::size_t d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= d; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < d; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Kernel cosine_kernel(const EmbeddingMatrix& x) {
  if (x.rows() < 2) fail("cosine kernel needs at least 2 rows");
  require_well_formed(x);

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> unit(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double* u = unit.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) u[j] = r[j];
    const double norm = std::sqrt(dot(u, u, d));
    for (std::size_t j = 0; j < d; ++j) u[j] /= norm;
  }

  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ui = unit.data() + i * d;
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(ui, unit.data() + j * d, d);
      values[i * n + j] = v;
      values[j * n + i] = v;
    }
  }
  return Kernel(n, std::move(values));
}

NeighborIndex::NeighborIndex(std::size_t n, std::size_t k, std::vector<std::uint32_t> lists)
    : n_(n), k_(k), lists_(std::move(lists)) {
  if (lists_.size() != n_ * k_) fail("neighbor lists do not form an n x k table");
}

NeighborIndex topk_neighbors(const Kernel& kernel, std::size_t k) {
  return topk_neighbors_by(kernel.n(), k,
                           [&kernel](std::size_t i, std::size_t j) { return kernel(i, j); });
}

std::size_t intersection_size(std::span<const std::uint32_t> a,
                              std::span<const std::uint32_t> b) {
  std::size_t count = 0;
  for (auto v : a) {
    if (std::find(b.begin(), b.end(), v) != b.end()) ++count;
  }
  return count;
}

AlignmentScore mutual_knn_alignment(const NeighborIndex& a, const NeighborIndex& b) {
  if (a.n() != b.n()) {
    fail("shape mismatch: neighbor indices over " + std::to_string(a.n()) + " and " +
         std::to_string(b.n()) + " rows");
  }
  if (a.k() != b.k()) {
    fail("shape mismatch: neighbor indices with k=" + std::to_string(a.k()) + " and k=" +
         std::to_string(b.k()));
  }
  AlignmentScore score;
  score.n = a.n();
  score.k = a.k();
  for (std::size_t i = 0; i < a.n(); ++i) {
    score.shared += intersection_size(a.neighbors(i), b.neighbors(i));
  }
  score.value = static_cast<double>(score.shared) /
                (static_cast<double>(score.n) * static_cast<double>(score.k));
  return score;
}

AlignmentScore alignment(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t k) {
  if (a.rows() != b.rows()) {
    fail("row count mismatch (" + std::to_string(a.rows()) + "≠" + std::to_string(b.rows()) +
         ")");
  }
  return mutual_knn_alignment(topk_neighbors(cosine_kernel(a), k),
                              topk_neighbors(cosine_kernel(b), k));
}

double linear_cka(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  if (x.rows() != y.rows()) {
    fail("row count mismatch (" + std::to_string(x.rows()) + "≠" + std::to_string(y.rows()) +
         ")");
  }
  if (x.rows() < 3) fail("linear CKA needs at least 3 rows");
  if (x.nonfinite_count() > 0 || y.nonfinite_count() > 0) fail("non-finite value");

  const RowMatrix xc = centered(x);
  const RowMatrix yc = centered(y);
  auto constant = [](const RowMatrix& c, const EmbeddingMatrix& raw) {
    return c.squaredNorm() <= 1e-24 * to_double(raw).squaredNorm();
  };
  if (constant(xc, x) || constant(yc, y)) fail("degenerate matrix: all columns constant");

  // ‖XᵀY‖²_F / (‖XᵀX‖_F ‖YᵀY‖_F), evaluated through whichever of the feature
  // cross-products or the n x n Gram matrices is smaller.
  const auto n = xc.rows();
  const auto dx = xc.cols();
  const auto dy = yc.cols();
  double cross = 0.0;
  double self_x = 0.0;
  double self_y = 0.0;
  if (dx * dy + dx * dx + dy * dy <= 3 * n * n) {
    cross = (xc.transpose() * yc).squaredNorm();
    self_x = (xc.transpose() * xc).norm();
    self_y = (yc.transpose() * yc).norm();
  } else {
    const RowMatrix gx = xc * xc.transpose();
    const RowMatrix gy = yc * yc.transpose();
    cross = gx.cwiseProduct(gy).sum();
    self_x = gx.norm();
    self_y = gy.norm();
  }
  return cross / (self_x * self_y);
}

}  // namespace sensalign
