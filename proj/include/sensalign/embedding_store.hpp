#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace sensalign {

// Prompt condition under which an embedding matrix was produced.
struct ConditionTag {
  enum class Cue { none, see, hear, custom };
  enum class Transform {
    ablated,
    redirected_to_see,
    redirected_to_hear,
    caption_plus_visual_words,
    visual_words_only
  };

  Cue cue = Cue::none;
  std::string custom_cue;  // nonempty iff cue == custom
  std::optional<std::string> verb;
  std::optional<Transform> transform;

  // "none", "see", "hear" or the custom cue text.
  std::string label() const;

  bool operator==(const ConditionTag&) const = default;
};

std::string to_string(ConditionTag::Transform t);
ConditionTag::Transform transform_from_string(const std::string& s);

struct LayerPolicy {
  // nullopt means the mean over all layers.
  std::optional<std::uint32_t> single_layer;

  bool is_mean() const { return !single_layer.has_value(); }
  std::string label() const;
  bool operator==(const LayerPolicy&) const = default;
};

struct MatrixMeta {
  std::string model_id;
  ConditionTag condition;
  LayerPolicy layer_policy;
  std::optional<std::uint64_t> token_budget;
  // Unrecognised metadata keys, carried through load/write untouched.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const MatrixMeta&) const = default;
};

nlohmann::json meta_to_json(const MatrixMeta& meta);
MatrixMeta meta_from_json(const nlohmann::json& j);

// n x d row-major float32 embeddings for one (model, condition, layer policy) cell.
// The type itself does not enforce finiteness or nonzero rows so that
// malformed data can be reported; load_matrix and the kernel engine do.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                  MatrixMeta meta = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  float operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  const MatrixMeta& meta() const noexcept { return meta_; }
  MatrixMeta& meta() noexcept { return meta_; }

  // Indices of rows whose entries are all zero.
  std::vector<std::size_t> zero_rows() const;
  // Count of NaN / infinite entries.
  std::size_t nonfinite_count() const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
  MatrixMeta meta_;
};

// Throws unless every value is finite and no row is all zero.
void require_well_formed(const EmbeddingMatrix& m);

// File layout: "EMB1" | u32 version | u64 n | u64 d | u32 meta_len | meta JSON |
// n*d little-endian float32, row-major.
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kFixedHeaderBytes = 4 + 4 + 8 + 8 + 4;

void write_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_matrix(const std::filesystem::path& path);
// Format checks only; zero rows and non-finite values are left for
// validate_cell_set to report.
EmbeddingMatrix load_matrix_unchecked(const std::filesystem::path& path);

struct ManifestItem {
  std::string item_id;
  std::string caption;
  std::optional<std::string> media_ref;

  bool operator==(const ManifestItem&) const = default;
};

// Fixes row order for every matrix of a dataset.
class DatasetManifest {
 public:
  DatasetManifest(std::string dataset_id, std::vector<ManifestItem> items);

  const std::string& dataset_id() const noexcept { return dataset_id_; }
  const std::vector<ManifestItem>& items() const noexcept { return items_; }
  std::size_t n_items() const noexcept { return items_.size(); }
  const ManifestItem& item(std::size_t i) const;

 private:
  std::string dataset_id_;
  std::vector<ManifestItem> items_;
};

DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct MatrixReport {
  std::size_t index = 0;
  std::size_t rows = 0;
  bool row_count_ok = true;
  std::vector<std::size_t> zero_rows;
  std::size_t nonfinite = 0;
  std::vector<std::string> missing_meta;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

struct ValidationReport {
  std::vector<MatrixReport> matrices;
  bool passed = true;
};

ValidationReport validate_cell_set(const DatasetManifest& manifest,
                                   std::span<const EmbeddingMatrix> matrices);
nlohmann::json report_to_json(const ValidationReport& report);

}  // namespace sensalign
