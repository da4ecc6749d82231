#include "sensalign/vqa.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "sensalign/error.hpp"

namespace sensalign {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string condition_label(const std::string& raw) {
  const std::string c = lower(raw);
  if (c == "none" || c == "see") return c;
  fail("condition must be \"none\" or \"see\", got \"" + raw + "\"");
}

}  // namespace

VqaAnswer normalize_answer(std::string_view raw) {
  auto end = raw.size();
  while (end > 0 && !alpha(raw[end - 1])) --end;
  auto begin = end;
  while (begin > 0 && alpha(raw[begin - 1])) --begin;
  const std::string token = lower(raw.substr(begin, end - begin));
  if (token == "yes") return VqaAnswer::yes;
  if (token == "no") return VqaAnswer::no;
  return VqaAnswer::unparsed;
}

VqaLogEntry parse_vqa_entry(const nlohmann::json& j) {
  if (!j.is_object()) fail("entry is not a JSON object");
  VqaLogEntry e;
  try {
    e.category = j.at("category").get<std::string>();
    if (e.category.empty()) fail("empty category");
    if (auto it = j.find("question_id"); it != j.end()) {
      e.question_id = it->is_string() ? it->get<std::string>() : it->dump();
    }
    e.condition = condition_label(j.at("condition").get<std::string>());
    e.answer = normalize_answer(j.at("answer").get<std::string>());
    e.gold = normalize_answer(j.at("gold").get<std::string>());
    if (e.gold == VqaAnswer::unparsed) fail("gold must be yes or no");
  } catch (const nlohmann::json::exception& ex) {
    fail(ex.what());
  }
  return e;
}

std::vector<VqaLogEntry> read_vqa_log(std::istream& in) {
  std::vector<VqaLogEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      continue;
    }
    try {
      entries.push_back(parse_vqa_entry(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      fail("line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      fail("line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

double AccuracyCell::percent() const {
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

const AccuracyCell* VqaTable::cell(const std::string& category,
                                   const std::string& condition) const {
  auto it = cells.find({category, condition});
  return it == cells.end() ? nullptr : &it->second;
}

VqaTable score_vqa(const std::vector<VqaLogEntry>& entries) {
  VqaTable table;
  std::set<std::string> categories;
  std::set<std::string> conditions;
  for (const auto& e : entries) {
    categories.insert(e.category);
    conditions.insert(e.condition);
    auto& c = table.cells[{e.category, e.condition}];
    auto& o = table.overall[e.condition];
    ++c.n;
    ++o.n;
    if (e.correct()) {
      ++c.correct;
      ++o.correct;
    }
  }
  table.categories.assign(categories.begin(), categories.end());
  for (const char* c : {"none", "see"}) {
    if (conditions.contains(c)) table.conditions.emplace_back(c);
  }
  return table;
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::string render_vqa_csv(const VqaTable& table) {
  std::ostringstream out;
  out << "condition";
  for (const auto& cat : table.categories) out << ',' << cat;
  out << ",Overall\n";

  for (const auto& cond : table.conditions) {
    out << cond;
    for (const auto& cat : table.categories) {
      out << ',';
      if (const auto* c = table.cell(cat, cond)) out << format_percent(c->percent());
    }
    out << ',' << format_percent(table.overall.at(cond).percent()) << '\n';
  }

  if (table.conditions.empty()) return out.str();

  // A single n row when every condition saw the same questions per category.
  bool shared_counts = true;
  for (const auto& cat : table.categories) {
    const auto* first = table.cell(cat, table.conditions.front());
    for (const auto& cond : table.conditions) {
      const auto* c = table.cell(cat, cond);
      if (!c || !first || c->n != first->n) shared_counts = false;
    }
  }
  auto count_row = [&](const std::string& label, const std::string& cond) {
    out << label;
    for (const auto& cat : table.categories) {
      out << ',';
      if (const auto* c = table.cell(cat, cond)) out << c->n;
    }
    out << ',' << table.overall.at(cond).n << '\n';
  };
  if (shared_counts) {
    count_row("n", table.conditions.front());
  } else {
    for (const auto& cond : table.conditions) count_row("n_" + cond, cond);
  }
  return out.str();
}

nlohmann::json vqa_to_json(const VqaTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& cond : table.conditions) {
    for (const auto& cat : table.categories) {
      if (const auto* c = table.cell(cat, cond)) {
        rows.push_back({{"category", cat},
                        {"condition", cond},
                        {"correct", c->correct},
                        {"n", c->n},
                        {"accuracy", format_percent(c->percent())}});
      }
    }
    const auto& o = table.overall.at(cond);
    rows.push_back({{"category", "Overall"},
                    {"condition", cond},
                    {"correct", o.correct},
                    {"n", o.n},
                    {"accuracy", format_percent(o.percent())}});
  }
  return {{"rows", std::move(rows)}};
}

}  // namespace sensalign
