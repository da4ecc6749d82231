#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "sensalign/embedding_store.hpp"

namespace sensalign::testing {

inline EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed,
                                     double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<float> data(n * d);
  for (auto& v : data) v = static_cast<float>(normal(gen));
  return EmbeddingMatrix(n, d, std::move(data));
}

inline EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows) {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return EmbeddingMatrix(rows.size(), rows.empty() ? 0 : rows.front().size(), std::move(data));
}

// Row i of `out` is row i of `x` plus Gaussian noise of the given scale.
inline EmbeddingMatrix noisy_copy(const EmbeddingMatrix& x, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, noise);
  std::vector<float> data(x.data().begin(), x.data().end());
  for (auto& v : data) v = static_cast<float>(v + normal(gen));
  return EmbeddingMatrix(x.rows(), x.cols(), std::move(data));
}

inline std::vector<double> normal_samples(std::size_t n, double mu, double sd,
                                          std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(mu, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(gen);
  return out;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sensalign_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline DatasetManifest numbered_manifest(std::size_t n, const std::string& id = "synthetic") {
  std::vector<ManifestItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    items.push_back({"item" + std::to_string(i), "caption " + std::to_string(i), std::nullopt});
  }
  return DatasetManifest(id, std::move(items));
}

}  // namespace sensalign::testing
