#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sensalign {

struct SweepCell {
  std::filesystem::path matrix;
  std::string model_id;
  std::string condition;
  std::optional<std::uint64_t> token_budget;
  std::string layer = "mean";
  // Overrides the config-wide reference encoder for this cell.
  std::optional<std::filesystem::path> reference;
};

struct SweepConfig {
  std::filesystem::path manifest;
  std::filesystem::path reference;
  std::vector<SweepCell> cells;
  std::size_t k = 10;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output;
  std::size_t threads = 0;
};

// Reads a JSON or TOML (by .toml extension) sweep config. Relative paths are
// resolved against the config file's directory. Rejects duplicate cell labels.
SweepConfig load_sweep_config(const std::filesystem::path& path);

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string message;
  double score = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Evaluates every cell; a failing cell becomes an error row and does not stop
// the others. Rows come back in config order.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

void write_sweep_csv(std::ostream& out, const SweepConfig& config,
                     const std::vector<SweepRow>& rows);

std::string csv_escape(const std::string& field);
// Shortest round-trip decimal for a double.
std::string format_double(double value);

}  // namespace sensalign
