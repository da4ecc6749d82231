#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sensalign/embedding_store.hpp"

namespace sensalign {

struct BootstrapOptions {
  std::size_t k = 10;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  // 0 selects std::thread::hardware_concurrency().
  std::size_t threads = 0;
  bool keep_replicates = true;
};

struct BootstrapResult {
  double point_estimate = 0.0;  // full-sample alignment
  double standard_error = 0.0;  // sample sd of replicates, denominator B-1
  double replicate_mean = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::size_t n = 0;
  std::vector<double> replicate_scores;  // empty unless keep_replicates
};

// Paired-row bootstrap of the mutual-kNN alignment between two embedding sets.
// Each replicate draws n row positions with replacement, applies them to both
// sets, and recomputes the alignment on the resampled multiset. Duplicated rows
// stay distinct items: only an item's own position is excluded from its
// neighbor search.
BootstrapResult bootstrap_alignment(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                    const BootstrapOptions& options);

// The n row positions drawn by replicate `replicate` of a run with `seed`.
std::vector<std::uint32_t> bootstrap_indices(std::size_t n, std::uint64_t seed,
                                             std::uint64_t replicate);

double mean(std::span<const double> xs);
// Bessel-corrected sample variance.
double sample_variance(std::span<const double> xs);

// Standardised mean difference with pooled sample standard deviation.
double cohens_d(std::span<const double> a, std::span<const double> b);

// Mann-Whitney AUROC: P(pos > neg) + 0.5 P(pos == neg).
double auroc(std::span<const double> pos, std::span<const double> neg);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

inline constexpr std::size_t kDefaultGridPoints = 512;

double scott_bandwidth(std::span<const double> samples);

// Gaussian kernel density estimate at a single point.
double kde_at(std::span<const double> samples, double bandwidth, double x);

// Gaussian KDE on a uniform grid over [min - 4h, max + 4h]. Bandwidth defaults
// to Scott's rule.
DensityCurve kde(std::span<const double> samples, std::size_t grid_points = kDefaultGridPoints,
                 std::optional<double> bandwidth = std::nullopt);

double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace sensalign
