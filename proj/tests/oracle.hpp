#pragma once

#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "hypertab/structqa.hpp"

namespace hypertab::testing {

// Re-derives a StructQA answer from the question text and the body grid only:
// the slots are read back out of the question, then the task is answered by
// direct scans. Shares nothing with the generator beyond the template strings.
class QuestionOracle {
 public:
  struct Reading {
    int template_id = -1;
    std::vector<std::string> answer;
  };

  // Every reading of `question` consistent with the table; empty when the
  // question instantiates no template of `task`.
  static std::vector<Reading> read(const table::Table& t, qa::Task task, const std::string& question) {
    std::vector<Reading> out;
    const auto& ts = qa::templates(task);
    for (int k = 0; k < static_cast<int>(ts.size()); ++k) {
      const std::string& tpl = ts[static_cast<std::size_t>(k)];
      const bool named = tpl.find("{column name}") != std::string::npos;
      const std::size_t n_cols = named ? t.n_cols() : 1;
      for (std::size_t c = 0; c < n_cols; ++c) {
        std::string pattern = tpl;
        if (named) pattern = replace(pattern, "{column name}", "\x01" + name_of(t, c) + "\x01");
        const auto reading = match(t, task, pattern, question, named ? std::optional<std::size_t>(c) : std::nullopt);
        if (reading) out.push_back({k, *reading});
      }
    }
    return out;
  }

  static std::string name_of(const table::Table& t, std::size_t col) {
    std::string s;
    for (const auto& part : t.column_path(col)) s += (s.empty() ? "" : " > ") + part;
    return s;
  }

 private:
  static std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    if (at != std::string::npos) s.replace(at, from.size(), to);
    return s;
  }

  // Regex from a template where literal runs (including a column name fenced
  // by \x01) are escaped and the remaining slots become capture groups.
  static std::optional<std::vector<std::string>> match(const table::Table& t, qa::Task task,
                                                       const std::string& tpl, const std::string& question,
                                                       std::optional<std::size_t> col) {
    std::string rx;
    std::vector<std::string> order;
    bool fenced = false;
    for (std::size_t i = 0; i < tpl.size();) {
      if (tpl[i] == '\x01') {
        fenced = !fenced;
        ++i;
        continue;
      }
      if (!fenced && tpl.compare(i, 12, "{row number}") == 0) {
        rx += "(\\d+)";
        order.push_back("row");
        i += 12;
        continue;
      }
      if (!fenced && tpl.compare(i, 12, "{cell value}") == 0) {
        rx += "([\\s\\S]*)";
        order.push_back("value");
        i += 12;
        continue;
      }
      if (std::string("\\^$.|?*+()[]{}").find(tpl[i]) != std::string::npos) rx += '\\';
      rx += tpl[i++];
    }
    std::smatch m;
    if (!std::regex_match(question, m, std::regex(rx))) return std::nullopt;
    std::optional<std::size_t> row;
    std::string value;
    for (std::size_t g = 0; g < order.size(); ++g) {
      if (order[g] == "row") {
        row = std::stoul(m[g + 1].str());
        if (*row >= t.n_rows()) return std::nullopt;
      } else {
        value = m[g + 1].str();
      }
    }
    std::vector<std::string> ans;
    switch (task) {
      case qa::Task::kCellLocation:
        ans.push_back(t.body_text(*row, *col));
        break;
      case qa::Task::kColumnLookup:
        for (std::size_t c = 0; c < t.n_cols(); ++c) {
          if (t.body_text(*row, c) == value) ans.push_back(name_of(t, c));
        }
        if (ans.empty()) return std::nullopt;
        break;
      case qa::Task::kRowLookup:
        for (std::size_t r = 0; r < t.n_rows(); ++r) {
          if (t.body_text(r, *col) == value) ans.push_back(std::to_string(r));
        }
        if (ans.empty()) return std::nullopt;
        break;
      case qa::Task::kColumnComprehension: {
        std::set<std::string> seen;
        for (std::size_t r = 0; r < t.n_rows(); ++r) {
          if (seen.insert(t.body_text(r, *col)).second) ans.push_back(t.body_text(r, *col));
        }
        break;
      }
      case qa::Task::kRowComprehension:
        for (std::size_t c = 0; c < t.n_cols(); ++c) ans.push_back(t.body_text(*row, c));
        break;
    }
    return ans;
  }
};

// True when the question reads exactly one way (up to equal answers), with
// the sample's template id, and that reading gives the sample's answer.
inline bool oracle_agrees(const table::Table& t, const qa::Sample& s, std::string* why = nullptr) {
  const auto readings = QuestionOracle::read(t, s.task, s.question);
  if (readings.empty()) {
    if (why) *why = "no template reading of: " + s.question;
    return false;
  }
  for (const auto& r : readings) {
    if (r.template_id != s.template_id || r.answer != s.answer) {
      if (why) *why = "reading disagrees for: " + s.question;
      return false;
    }
  }
  return true;
}

}  // namespace hypertab::testing
