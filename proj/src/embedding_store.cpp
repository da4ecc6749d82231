#include "sensalign/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "sensalign/error.hpp"

namespace sensalign {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic = {'E', 'M', 'B', '1'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(p[i]) << (8 * i);
  }
  return value;
}

std::string cue_name(ConditionTag::Cue cue) {
  switch (cue) {
    case ConditionTag::Cue::none: return "none";
    case ConditionTag::Cue::see: return "see";
    case ConditionTag::Cue::hear: return "hear";
    case ConditionTag::Cue::custom: return "custom";
  }
  return "none";
}

}  // namespace

std::string ConditionTag::label() const {
  return cue == Cue::custom ? custom_cue : cue_name(cue);
}

std::string to_string(ConditionTag::Transform t) {
  switch (t) {
    case ConditionTag::Transform::ablated: return "ablated";
    case ConditionTag::Transform::redirected_to_see: return "redirected-to-see";
    case ConditionTag::Transform::redirected_to_hear: return "redirected-to-hear";
    case ConditionTag::Transform::caption_plus_visual_words:
      return "caption-plus-visual-words";
    case ConditionTag::Transform::visual_words_only: return "visual-words-only";
  }
  return "ablated";
}

ConditionTag::Transform transform_from_string(const std::string& s) {
  using T = ConditionTag::Transform;
  if (s == "ablated") return T::ablated;
  if (s == "redirected-to-see") return T::redirected_to_see;
  if (s == "redirected-to-hear") return T::redirected_to_hear;
  if (s == "caption-plus-visual-words") return T::caption_plus_visual_words;
  if (s == "visual-words-only") return T::visual_words_only;
  fail("unknown transform \"" + s + "\"");
}

std::string LayerPolicy::label() const {
  return is_mean() ? "mean" : std::to_string(*single_layer);
}

json meta_to_json(const MatrixMeta& meta) {
  json j = meta.extra.is_object() ? meta.extra : json::object();
  j["model_id"] = meta.model_id;

  json cond = json::object();
  cond["cue"] = cue_name(meta.condition.cue);
  if (meta.condition.cue == ConditionTag::Cue::custom) {
    cond["custom"] = meta.condition.custom_cue;
  }
  if (meta.condition.verb) cond["verb"] = *meta.condition.verb;
  if (meta.condition.transform) cond["transform"] = to_string(*meta.condition.transform);
  j["condition"] = cond;

  if (meta.layer_policy.is_mean()) {
    j["layer_policy"] = "mean-all-layers";
  } else {
    j["layer_policy"] = "single-layer";
    j["layer"] = *meta.layer_policy.single_layer;
  }
  if (meta.token_budget) {
    j["token_budget"] = *meta.token_budget;
  } else {
    j["token_budget"] = nullptr;
  }
  return j;
}

MatrixMeta meta_from_json(const json& j) {
  if (!j.is_object()) fail("metadata must be a JSON object");
  MatrixMeta meta;
  try {
    meta.model_id = j.value("model_id", std::string{});

    if (auto it = j.find("condition"); it != j.end() && it->is_object()) {
      const std::string cue = it->value("cue", std::string{"none"});
      if (cue == "none") {
        meta.condition.cue = ConditionTag::Cue::none;
      } else if (cue == "see") {
        meta.condition.cue = ConditionTag::Cue::see;
      } else if (cue == "hear") {
        meta.condition.cue = ConditionTag::Cue::hear;
      } else if (cue == "custom") {
        meta.condition.cue = ConditionTag::Cue::custom;
        meta.condition.custom_cue = it->value("custom", std::string{});
        if (meta.condition.custom_cue.empty()) fail("custom cue requires a nonempty string");
      } else {
        fail("unknown cue \"" + cue + "\"");
      }
      if (it->contains("verb")) meta.condition.verb = it->at("verb").get<std::string>();
      if (it->contains("transform")) {
        meta.condition.transform =
            transform_from_string(it->at("transform").get<std::string>());
      }
    }

    const std::string policy = j.value("layer_policy", std::string{"mean-all-layers"});
    if (policy == "single-layer") {
      meta.layer_policy.single_layer = j.at("layer").get<std::uint32_t>();
    } else if (policy != "mean-all-layers") {
      fail("unknown layer_policy \"" + policy + "\"");
    }

    if (auto it = j.find("token_budget"); it != j.end() && !it->is_null()) {
      meta.token_budget = it->get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed metadata: ") + e.what());
  }

  meta.extra = json::object();
  for (const auto& [key, value] : j.items()) {
    if (key != "model_id" && key != "condition" && key != "layer_policy" &&
        key != "layer" && key != "token_budget") {
      meta.extra[key] = value;
    }
  }
  return meta;
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols,
                                 std::vector<float> data, MatrixMeta meta)
    : rows_(rows), cols_(cols), data_(std::move(data)), meta_(std::move(meta)) {
  if (data_.size() != rows_ * cols_) {
    fail("matrix data has " + std::to_string(data_.size()) + " values, expected " +
         std::to_string(rows_ * cols_));
  }
}

std::vector<std::size_t> EmbeddingMatrix::zero_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_; ++i) {
    auto r = row(i);
    if (std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; })) {
      out.push_back(i);
    }
  }
  return out;
}

std::size_t EmbeddingMatrix::nonfinite_count() const {
  return static_cast<std::size_t>(std::count_if(
      data_.begin(), data_.end(), [](float v) { return !std::isfinite(v); }));
}

void require_well_formed(const EmbeddingMatrix& m) {
  if (m.nonfinite_count() > 0) fail("non-finite value");
  auto zeros = m.zero_rows();
  if (!zeros.empty()) fail("zero row at index " + std::to_string(zeros.front()));
}

void write_matrix(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.nonfinite_count() > 0) fail("non-finite value");

  const std::string meta = meta_to_json(matrix.meta()).dump();
  std::vector<unsigned char> bytes;
  bytes.reserve(kFixedHeaderBytes + meta.size() + 4 * matrix.data().size());
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(bytes, kFormatVersion);
  put_le<std::uint64_t>(bytes, matrix.rows());
  put_le<std::uint64_t>(bytes, matrix.cols());
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(meta.size()));
  bytes.insert(bytes.end(), meta.begin(), meta.end());
  for (float v : matrix.data()) {
    put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_io("write failed: " + path.string());
}

EmbeddingMatrix load_matrix(const std::filesystem::path& path) {
  EmbeddingMatrix m = load_matrix_unchecked(path);
  require_well_formed(m);
  return m;
}

EmbeddingMatrix load_matrix_unchecked(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) fail_io("read failed: " + path.string());

  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    fail("bad magic");
  }
  if (bytes.size() < kFixedHeaderBytes) fail("truncated header");

  const unsigned char* p = bytes.data() + 4;
  const auto version = get_le<std::uint32_t>(p);
  if (version != kFormatVersion) {
    fail("version mismatch (" + std::to_string(version) + "≠" +
         std::to_string(kFormatVersion) + ")");
  }
  const auto n = get_le<std::uint64_t>(p + 4);
  const auto d = get_le<std::uint64_t>(p + 12);
  const auto meta_len = get_le<std::uint32_t>(p + 20);

  const std::size_t meta_end = kFixedHeaderBytes + meta_len;
  if (bytes.size() < meta_end) fail("truncated header");
  if (d != 0 && n > (std::numeric_limits<std::uint64_t>::max() / 4) / d) {
    fail("matrix shape overflows");
  }
  const std::uint64_t payload = 4 * n * d;
  const std::size_t have = bytes.size() - meta_end;
  if (have < payload) fail("truncated payload");
  if (have > payload) fail("trailing bytes after payload");

  json meta_json;
  try {
    meta_json = json::parse(bytes.begin() + kFixedHeaderBytes, bytes.begin() + meta_end);
  } catch (const json::exception& e) {
    fail(std::string("malformed metadata: ") + e.what());
  }

  std::vector<float> data(n * d);
  const unsigned char* q = bytes.data() + meta_end;
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(q + 4 * i));
  }

  return EmbeddingMatrix(n, d, std::move(data), meta_from_json(meta_json));
}

DatasetManifest::DatasetManifest(std::string dataset_id, std::vector<ManifestItem> items)
    : dataset_id_(std::move(dataset_id)), items_(std::move(items)) {
  if (items_.size() < 2) fail("manifest needs at least 2 items");
  std::unordered_set<std::string> seen;
  for (const auto& item : items_) {
    if (!seen.insert(item.item_id).second) {
      fail("duplicate item_id \"" + item.item_id + "\"");
    }
  }
}

const ManifestItem& DatasetManifest::item(std::size_t i) const {
  if (i >= items_.size()) fail("unknown item index " + std::to_string(i));
  return items_[i];
}

DatasetManifest manifest_from_json(const json& j) {
  try {
    std::vector<ManifestItem> items;
    for (const auto& entry : j.at("items")) {
      ManifestItem item;
      item.item_id = entry.at("item_id").get<std::string>();
      item.caption = entry.value("caption", std::string{});
      if (auto it = entry.find("media_ref"); it != entry.end() && !it->is_null()) {
        item.media_ref = it->get<std::string>();
      }
      items.push_back(std::move(item));
    }
    if (auto it = j.find("n_items"); it != j.end() && it->get<std::size_t>() != items.size()) {
      fail("n_items does not match the number of items");
    }
    return DatasetManifest(j.at("dataset_id").get<std::string>(), std::move(items));
  } catch (const json::exception& e) {
    fail(std::string("malformed manifest: ") + e.what());
  }
}

json manifest_to_json(const DatasetManifest& manifest) {
  json items = json::array();
  for (const auto& item : manifest.items()) {
    json e = {{"item_id", item.item_id}, {"caption", item.caption}};
    if (item.media_ref) e["media_ref"] = *item.media_ref;
    items.push_back(std::move(e));
  }
  return {{"dataset_id", manifest.dataset_id()},
          {"n_items", manifest.n_items()},
          {"items", std::move(items)}};
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(std::string("malformed manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) fail_io("write failed: " + path.string());
}

ValidationReport validate_cell_set(const DatasetManifest& manifest,
                                   std::span<const EmbeddingMatrix> matrices) {
  if (matrices.empty()) fail("validate_cell_set needs at least one matrix");

  ValidationReport report;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& m = matrices[i];
    MatrixReport r;
    r.index = i;
    r.rows = m.rows();
    r.row_count_ok = m.rows() == manifest.n_items();
    if (!r.row_count_ok) {
      r.violations.push_back("row count mismatch (" + std::to_string(m.rows()) + "≠" +
                             std::to_string(manifest.n_items()) + ")");
    }
    r.zero_rows = m.zero_rows();
    for (auto z : r.zero_rows) {
      r.violations.push_back("zero row at index " + std::to_string(z));
    }
    r.nonfinite = m.nonfinite_count();
    if (r.nonfinite > 0) {
      r.violations.push_back(std::to_string(r.nonfinite) + " non-finite values");
    }
    if (m.meta().model_id.empty()) r.missing_meta.push_back("model_id");
    if (m.meta().condition.cue == ConditionTag::Cue::custom &&
        m.meta().condition.custom_cue.empty()) {
      r.missing_meta.push_back("condition.custom");
    }
    for (const auto& field : r.missing_meta) {
      r.violations.push_back("missing metadata: " + field);
    }
    report.passed = report.passed && r.ok();
    report.matrices.push_back(std::move(r));
  }
  return report;
}

json report_to_json(const ValidationReport& report) {
  json matrices = json::array();
  for (const auto& r : report.matrices) {
    matrices.push_back({{"index", r.index},
                        {"rows", r.rows},
                        {"row_count_ok", r.row_count_ok},
                        {"zero_rows", r.zero_rows},
                        {"nonfinite", r.nonfinite},
                        {"missing_meta", r.missing_meta},
                        {"violations", r.violations},
                        {"ok", r.ok()}});
  }
  return {{"passed", report.passed}, {"matrices", std::move(matrices)}};
}

}  // namespace sensalign
