#include "sensalign/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "sensalign/error.hpp"
#include "sensalign/kernel.hpp"
#include "sensalign/rng.hpp"

namespace sensalign {

std::vector<std::uint32_t> bootstrap_indices(std::size_t n, std::uint64_t seed,
                                             std::uint64_t replicate) {
  StreamRng rng(seed, replicate);
  std::vector<std::uint32_t> idx(n);
  for (auto& i : idx) i = static_cast<std::uint32_t>(rng.below(n));
  return idx;
}

BootstrapResult bootstrap_alignment(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                                    const BootstrapOptions& options) {
  if (a.rows() != b.rows()) {
    fail("row count mismatch (" + std::to_string(a.rows()) + "≠" + std::to_string(b.rows()) +
         ")");
  }
  if (options.replicates < 2) fail("bootstrap needs at least 2 replicates");
  const std::size_t n = a.rows();
  const std::size_t k = options.k;
  detail::check_k(n, k);

  const Kernel ka = cosine_kernel(a);
  const Kernel kb = cosine_kernel(b);

  BootstrapResult result;
  result.point_estimate = mutual_knn_alignment(topk_neighbors(ka, k), topk_neighbors(kb, k)).value;
  result.replicates = options.replicates;
  result.seed = options.seed;
  result.k = k;
  result.n = n;

  std::vector<double> scores(options.replicates);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < scores.size(); r = next++) {
      const auto idx = bootstrap_indices(n, options.seed, r);
      const auto na = topk_neighbors_by(
          n, k, [&](std::size_t i, std::size_t j) { return ka(idx[i], idx[j]); });
      const auto nb = topk_neighbors_by(
          n, k, [&](std::size_t i, std::size_t j) { return kb(idx[i], idx[j]); });
      scores[r] = mutual_knn_alignment(na, nb).value;
    }
  };

  std::size_t threads = options.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, options.replicates);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  result.replicate_mean = mean(scores);
  result.standard_error = std::sqrt(sample_variance(scores));
  if (options.keep_replicates) result.replicate_scores = std::move(scores);
  return result;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) fail("mean of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) fail("sample variance needs at least 2 values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) fail("Cohen's d needs at least 2 values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled =
      ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
  if (!(pooled > 0.0)) fail("zero pooled variance");
  return (mean(a) - mean(b)) / std::sqrt(pooled);
}

double auroc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) fail("AUROC needs nonempty positive and negative samples");
  std::vector<double> sorted(neg.begin(), neg.end());
  std::sort(sorted.begin(), sorted.end());
  // Twice the Mann-Whitney U, kept integral so ties count exactly one half.
  std::uint64_t twice_u = 0;
  for (double p : pos) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), p);
    const auto hi = std::upper_bound(lo, sorted.end(), p);
    twice_u += 2 * static_cast<std::uint64_t>(lo - sorted.begin()) +
               static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(pos.size()) * static_cast<double>(neg.size());
  return static_cast<double>(twice_u) / 2.0 / pairs;
}

double scott_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) fail("bandwidth needs at least 2 samples");
  const double sd = std::sqrt(sample_variance(samples));
  return sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

double kde_at(std::span<const double> samples, double bandwidth, double x) {
  if (samples.empty()) fail("KDE needs samples");
  if (!(bandwidth > 0.0)) fail("bandwidth must be positive");
  double acc = 0.0;
  for (double s : samples) {
    const double u = (x - s) / bandwidth;
    acc += std::exp(-0.5 * u * u);
  }
  return acc / (static_cast<double>(samples.size()) * bandwidth *
                std::sqrt(2.0 * std::numbers::pi));
}

DensityCurve kde(std::span<const double> samples, std::size_t grid_points,
                 std::optional<double> bandwidth) {
  if (samples.size() < 2) fail("KDE needs at least 2 samples");
  if (grid_points < 2) fail("KDE needs at least 2 grid points");
  for (double s : samples) {
    if (!std::isfinite(s)) fail("non-finite value");
  }

  double h = 0.0;
  if (bandwidth) {
    h = *bandwidth;
    if (!(h > 0.0) || !std::isfinite(h)) fail("bandwidth must be positive");
  } else {
    h = scott_bandwidth(samples);
    if (!(h > 0.0)) fail("zero variance");
  }

  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it - 4.0 * h;
  const double hi = *hi_it + 4.0 * h;
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);

  DensityCurve curve;
  curve.bandwidth = h;
  curve.grid.resize(grid_points);
  curve.density.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = g + 1 == grid_points ? hi : lo + step * static_cast<double>(g);
    curve.grid[g] = x;
    curve.density[g] = kde_at(samples, h, x);
  }
  return curve;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail("trapezoid: abscissa and ordinate lengths differ");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  }
  return area;
}

}  // namespace sensalign
