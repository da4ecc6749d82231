#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sensalign {

enum class VqaAnswer { yes, no, unparsed };

struct VqaLogEntry {
  std::string category;
  std::string question_id;
  std::string condition;  // "none" or "see"
  VqaAnswer answer = VqaAnswer::unparsed;
  VqaAnswer gold = VqaAnswer::no;  // yes or no

  bool correct() const { return answer != VqaAnswer::unparsed && answer == gold; }
};

// Case-insensitive yes/no from the final alphabetic token of a model reply;
// anything else is unparsed.
VqaAnswer normalize_answer(std::string_view raw);

VqaLogEntry parse_vqa_entry(const nlohmann::json& j);

// Reads JSON-lines; blank lines are skipped. Errors name the 1-based line.
std::vector<VqaLogEntry> read_vqa_log(std::istream& in);

struct AccuracyCell {
  std::size_t correct = 0;
  std::size_t n = 0;

  double percent() const;
};

struct VqaTable {
  std::vector<std::string> categories;  // sorted
  std::vector<std::string> conditions;  // "none" before "see"
  std::map<std::pair<std::string, std::string>, AccuracyCell> cells;  // (category, condition)
  std::map<std::string, AccuracyCell> overall;                        // per condition

  const AccuracyCell* cell(const std::string& category, const std::string& condition) const;
};

VqaTable score_vqa(const std::vector<VqaLogEntry>& entries);

// Two decimals, e.g. 64.78.
std::string format_percent(double value);

// Wide table: one row per condition with a column per category and Overall,
// followed by the item counts.
std::string render_vqa_csv(const VqaTable& table);
nlohmann::json vqa_to_json(const VqaTable& table);

}  // namespace sensalign
