#include "sensalign/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>
#include <toml.hpp>

#include "sensalign/embedding_store.hpp"
#include "sensalign/error.hpp"
#include "sensalign/kernel.hpp"
#include "sensalign/stats.hpp"

namespace sensalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_config_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  try {
    if (path.extension() == ".toml") {
      const toml::table table = toml::parse(in, path.string());
      std::ostringstream text;
      text << toml::json_formatter{table};
      return json::parse(text.str());
    }
    return json::parse(in);
  } catch (const toml::parse_error& e) {
    fail("malformed sweep config: " + std::string(e.description()));
  } catch (const json::exception& e) {
    fail(std::string("malformed sweep config: ") + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string cell_label(const SweepCell& c) {
  return c.model_id + "/" + c.condition + "/" +
         (c.token_budget ? std::to_string(*c.token_budget) : "-") + "/" + c.layer;
}

}  // namespace

SweepConfig load_sweep_config(const fs::path& path) {
  const json j = read_config_json(path);
  const fs::path base = path.parent_path();
  SweepConfig config;
  try {
    config.manifest = resolve(base, j.at("manifest").get<std::string>());
    config.reference = resolve(base, j.at("reference").get<std::string>());
    config.k = j.value("k", config.k);
    config.bootstrap = j.value("bootstrap", config.bootstrap);
    config.seed = j.value("seed", config.seed);
    config.threads = j.value("threads", config.threads);
    if (auto it = j.find("output"); it != j.end() && !it->is_null()) {
      config.output = resolve(base, it->get<std::string>());
    }
    for (const auto& c : j.at("cells")) {
      SweepCell cell;
      cell.matrix = resolve(base, c.at("matrix").get<std::string>());
      cell.model_id = c.value("model_id", std::string{});
      cell.condition = c.value("condition", std::string{});
      if (auto it = c.find("token_budget"); it != c.end() && !it->is_null()) {
        cell.token_budget = it->get<std::uint64_t>();
      }
      if (auto it = c.find("layer"); it != c.end() && !it->is_null()) {
        cell.layer = it->is_string() ? it->get<std::string>() : it->dump();
      }
      if (auto it = c.find("reference"); it != c.end() && !it->is_null()) {
        cell.reference = resolve(base, it->get<std::string>());
      }
      config.cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed sweep config: ") + e.what());
  }

  if (config.cells.empty()) fail("sweep config has no cells");
  std::set<std::string> labels;
  for (const auto& cell : config.cells) {
    if (!labels.insert(cell_label(cell)).second) {
      fail("duplicate cell labels: " + cell_label(cell));
    }
  }
  return config;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
  const DatasetManifest manifest = load_manifest(config.manifest);

  // References are shared read-only across cells; a failed load turns every
  // cell that needs it into an error row.
  std::map<fs::path, EmbeddingMatrix> references;
  std::map<fs::path, std::string> reference_errors;
  auto preload = [&](const fs::path& p) {
    if (references.contains(p) || reference_errors.contains(p)) return;
    try {
      references.emplace(p, load_matrix(p));
    } catch (const Error& e) {
      reference_errors.emplace(p, std::string("reference: ") + e.what());
    }
  };
  preload(config.reference);
  for (const auto& cell : config.cells) {
    if (cell.reference) preload(*cell.reference);
  }

  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(threads, config.cells.size());
  const std::size_t per_cell_threads = std::max<std::size_t>(1, threads / workers);

  std::vector<SweepRow> rows(config.cells.size());
  auto evaluate = [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.cell = config.cells[i];
    const fs::path ref_path = row.cell.reference.value_or(config.reference);
    try {
      if (auto it = reference_errors.find(ref_path); it != reference_errors.end()) {
        fail(it->second);
      }
      const EmbeddingMatrix& ref = references.at(ref_path);
      const EmbeddingMatrix m = load_matrix(row.cell.matrix);
      for (const auto* x : {&m, &ref}) {
        if (x->rows() != manifest.n_items()) {
          fail("row count mismatch (" + std::to_string(x->rows()) + "≠" +
               std::to_string(manifest.n_items()) + ")");
        }
      }
      BootstrapOptions opts;
      opts.k = config.k;
      opts.seed = config.seed;
      opts.threads = per_cell_threads;
      opts.keep_replicates = false;
      row.n = m.rows();
      if (config.bootstrap == 0) {
        row.score = alignment(m, ref, config.k).value;
      } else {
        opts.replicates = config.bootstrap;
        const auto result = bootstrap_alignment(m, ref, opts);
        row.score = result.point_estimate;
        row.se = result.standard_error;
      }
      row.ok = true;
    } catch (const Error& e) {
      row.ok = false;
      row.message = e.what();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) evaluate(i);
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void write_sweep_csv(std::ostream& out, const SweepConfig& config,
                     const std::vector<SweepRow>& rows) {
  out << "model_id,condition,token_budget,layer,matrix,score,se,k,n,B,seed,status,message\n";
  for (const auto& r : rows) {
    out << csv_escape(r.cell.model_id) << ',' << csv_escape(r.cell.condition) << ','
        << (r.cell.token_budget ? std::to_string(*r.cell.token_budget) : "") << ','
        << csv_escape(r.cell.layer) << ',' << csv_escape(r.cell.matrix.string()) << ',';
    if (r.ok) {
      out << format_double(r.score) << ','
          << (config.bootstrap > 0 ? format_double(r.se) : "") << ',';
    } else {
      out << ",,";
    }
    out << config.k << ',' << (r.ok ? std::to_string(r.n) : "") << ',' << config.bootstrap
        << ',' << config.seed << ',' << (r.ok ? "ok" : "error") << ','
        << csv_escape(r.message) << '\n';
  }
}

}  // namespace sensalign
