// Copyright 2026 The DataPop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The knowledge base: categorized entity rows by typed columns. Each cell
// carries an optional value, its confidence, and the pool of candidate
// answers players have given for it.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/json_util.hpp"
#include "datapop/scoring.hpp"
#include "datapop/slot_type.hpp"

namespace datapop {

// Cells at or above this confidence are known answers usable as probes.
inline constexpr double kGroundTruthConfidence = 0.95;

struct ColumnMeta {
  std::string name;
  SlotType slot_type = SlotType::kText;
  double difficulty = 0.0;    // 1 = most difficult
  std::uint32_t importance = 0;  // 0 = most important

  bool operator==(const ColumnMeta&) const = default;
};

struct Candidate {
  std::string answer;  // normalized
  std::string user_id;
  double accuracy = 0.0;  // user's accuracy when the answer was given

  bool operator==(const Candidate&) const = default;
};

struct Cell {
  std::optional<std::string> value;
  double confidence = 0.0;
  bool ground_truth = false;
  std::vector<Candidate> candidates;

  bool has_value() const { return value.has_value(); }

  std::size_t distinct_users() const {
    std::unordered_set<std::string> users;
    for (const auto& c : candidates) users.insert(c.user_id);
    return users.size();
  }

  bool operator==(const Cell&) const = default;
};

struct Row {
  std::string id;
  std::string entity_name;
  std::string category;
  std::map<std::string, Cell> cells;  // column name -> cell

  const Cell* find_cell(const std::string& column) const {
    auto it = cells.find(column);
    return it == cells.end() ? nullptr : &it->second;
  }

  bool operator==(const Row&) const = default;
};

// Natural-language question pattern with {Entity Name}, {Column Name} and
// optionally {Column Value} placeholders, targeting one column.
struct QueryTemplate {
  std::string pattern;
  std::string target_column;
  SlotType answer_slot = SlotType::kText;

  bool operator==(const QueryTemplate&) const = default;
};

struct KnowledgeBase {
  std::vector<ColumnMeta> columns;
  std::vector<QueryTemplate> templates;
  std::vector<Row> rows;  // sorted by id after load
  std::set<std::string> categories;

  const ColumnMeta* find_column(std::string_view name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  const ColumnMeta& column(std::string_view name) const {
    if (const auto* c = find_column(name)) return *c;
    throw DomainError("unknown column '" + std::string(name) + "'");
  }

  const Row* find_row(std::string_view id) const {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const Row& r) { return r.id == id; });
    return it == rows.end() ? nullptr : &*it;
  }

  Row* find_row(std::string_view id) {
    return const_cast<Row*>(std::as_const(*this).find_row(id));
  }

  const Row& row(std::string_view id) const {
    if (const auto* r = find_row(id)) return *r;
    throw DomainError("unknown row '" + std::string(id) + "'");
  }

  bool has_category(const std::string& category) const {
    return categories.count(category) > 0;
  }

  // Existing cell or nullptr. Throws on an unknown row or column.
  const Cell* find_cell(const CellRef& ref) const {
    column(ref.column);
    return row(ref.row_id).find_cell(ref.column);
  }

  // Creates an empty cell when the row has none yet.
  Cell& cell(const CellRef& ref) {
    column(ref.column);
    Row* r = find_row(ref.row_id);
    if (r == nullptr) throw DomainError("unknown row '" + ref.row_id + "'");
    return r->cells[ref.column];
  }

  bool operator==(const KnowledgeBase&) const = default;
};

// A cell is ground truth (eligible as a probe) when it holds a value that is
// either flagged or known with high confidence.
inline bool is_ground_truth(const Cell& cell) {
  return cell.has_value() &&
         (cell.ground_truth || cell.confidence >= kGroundTruthConfidence);
}

// ---------------------------------------------------------------------------
// Loading and saving.

namespace detail {

inline void validate_kb(const KnowledgeBase& kb) {
  std::set<std::string> names;
  for (const auto& c : kb.columns) {
    if (!names.insert(c.name).second) {
      throw ValidationError("duplicate column '" + c.name + "'");
    }
    if (!(c.difficulty >= 0.0 && c.difficulty <= 1.0)) {
      throw ValidationError("column '" + c.name +
                            "': difficulty outside [0,1]");
    }
  }
  for (const auto& t : kb.templates) {
    if (t.pattern.find("{Entity Name}") == std::string::npos) {
      throw ValidationError("template '" + t.pattern +
                            "' lacks {Entity Name}");
    }
    if (!names.count(t.target_column)) {
      throw ValidationError("template targets unknown column '" +
                            t.target_column + "'");
    }
  }
  std::set<std::string> ids;
  for (const auto& r : kb.rows) {
    if (!ids.insert(r.id).second) {
      throw ValidationError("duplicate row id '" + r.id + "'");
    }
    if (!kb.categories.count(r.category)) {
      throw ValidationError("row '" + r.id + "': unknown category '" +
                            r.category + "'");
    }
    for (const auto& [column, cell] : r.cells) {
      if (!names.count(column)) {
        throw ValidationError("row '" + r.id + "': unknown column '" +
                              column + "'");
      }
      if (!(cell.confidence >= 0.0 && cell.confidence <= 1.0)) {
        throw ValidationError("row '" + r.id + "', column '" + column +
                              "': confidence outside [0,1]");
      }
      if (cell.has_value() && cell.confidence <= 0.0) {
        throw ValidationError("row '" + r.id + "', column '" + column +
                              "': value present with zero confidence");
      }
      for (const auto& cand : cell.candidates) {
        if (cand.accuracy < 0.0) {
          throw ValidationError("row '" + r.id + "', column '" + column +
                                "': negative candidate accuracy");
        }
      }
    }
  }
}

}  // namespace detail

inline KnowledgeBase kb_from_json(const Json& doc) {
  using namespace json_util;
  KnowledgeBase kb;
  const std::string root = "kb";
  {
    const auto& cats = as_array(field(doc, "categories", root), root + ".categories");
    for (std::size_t i = 0; i < cats.size(); ++i) {
      kb.categories.insert(
          as_string(cats[i], root + ".categories[" + std::to_string(i) + "]"));
    }
  }
  {
    const auto& cols = as_array(field(doc, "columns", root), root + ".columns");
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::string p = root + ".columns[" + std::to_string(i) + "]";
      ColumnMeta c;
      c.name = as_string(field(cols[i], "name", p), p + ".name");
      try {
        c.slot_type = parse_slot_type(
            as_string(field(cols[i], "slot_type", p), p + ".slot_type"));
      } catch (const ParseError& e) {
        throw ParseError(p + ".slot_type: " + e.what());
      }
      c.difficulty = as_number(field(cols[i], "difficulty", p), p + ".difficulty");
      const auto importance =
          as_count(field(cols[i], "importance", p), p + ".importance");
      c.importance = static_cast<std::uint32_t>(importance);
      kb.columns.push_back(std::move(c));
    }
  }
  if (doc.contains("templates")) {
    const auto& ts = as_array(doc.at("templates"), root + ".templates");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string p = root + ".templates[" + std::to_string(i) + "]";
      QueryTemplate t;
      t.pattern = as_string(field(ts[i], "pattern", p), p + ".pattern");
      t.target_column = as_string(field(ts[i], "column", p), p + ".column");
      try {
        t.answer_slot = parse_slot_type(
            as_string(field(ts[i], "answer_slot", p), p + ".answer_slot"));
      } catch (const ParseError& e) {
        throw ParseError(p + ".answer_slot: " + e.what());
      }
      kb.templates.push_back(std::move(t));
    }
  }
  {
    const auto& rows = as_array(field(doc, "rows", root), root + ".rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string p = root + ".rows[" + std::to_string(i) + "]";
      Row r;
      r.id = as_string(field(rows[i], "id", p), p + ".id");
      r.entity_name = as_string(field(rows[i], "entity_name", p), p + ".entity_name");
      r.category = as_string(field(rows[i], "category", p), p + ".category");
      const auto& cells = field(rows[i], "cells", p);
      if (!cells.is_object()) throw ParseError(p + ".cells: expected object");
      for (const auto& [column, jc] : cells.items()) {
        const std::string cp = p + ".cells." + column;
        Cell cell;
        const auto& v = field(jc, "value", cp);
        if (!v.is_null()) cell.value = as_string(v, cp + ".value");
        cell.confidence = as_number(field(jc, "confidence", cp), cp + ".confidence");
        if (jc.contains("ground_truth")) {
          cell.ground_truth = as_bool(jc.at("ground_truth"), cp + ".ground_truth");
        }
        if (jc.contains("candidates")) {
          const auto& cands = as_array(jc.at("candidates"), cp + ".candidates");
          for (std::size_t k = 0; k < cands.size(); ++k) {
            const std::string kp = cp + ".candidates[" + std::to_string(k) + "]";
            Candidate cand;
            cand.answer = as_string(field(cands[k], "answer", kp), kp + ".answer");
            cand.user_id = as_string(field(cands[k], "user_id", kp), kp + ".user_id");
            cand.accuracy = as_number(field(cands[k], "accuracy", kp), kp + ".accuracy");
            cell.candidates.push_back(std::move(cand));
          }
        }
        r.cells.emplace(column, std::move(cell));
      }
      kb.rows.push_back(std::move(r));
    }
  }
  std::sort(kb.rows.begin(), kb.rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });
  detail::validate_kb(kb);
  return kb;
}

inline KnowledgeBase load_kb(std::string_view text) {
  return kb_from_json(json_util::parse_document(text, "kb"));
}

inline KnowledgeBase load_kb_file(const std::string& path) {
  return load_kb(json_util::read_file(path));
}

inline OrderedJson kb_to_json(const KnowledgeBase& kb) {
  OrderedJson doc;
  doc["categories"] = OrderedJson::array();
  for (const auto& c : kb.categories) doc["categories"].push_back(c);
  doc["columns"] = OrderedJson::array();
  for (const auto& c : kb.columns) {
    OrderedJson jc;
    jc["name"] = c.name;
    jc["slot_type"] = std::string(to_string(c.slot_type));
    jc["difficulty"] = c.difficulty;
    jc["importance"] = c.importance;
    doc["columns"].push_back(std::move(jc));
  }
  doc["templates"] = OrderedJson::array();
  for (const auto& t : kb.templates) {
    OrderedJson jt;
    jt["pattern"] = t.pattern;
    jt["column"] = t.target_column;
    jt["answer_slot"] = std::string(to_string(t.answer_slot));
    doc["templates"].push_back(std::move(jt));
  }
  std::vector<const Row*> sorted;
  for (const auto& r : kb.rows) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const Row* a, const Row* b) { return a->id < b->id; });
  doc["rows"] = OrderedJson::array();
  for (const Row* r : sorted) {
    OrderedJson jr;
    jr["id"] = r->id;
    jr["entity_name"] = r->entity_name;
    jr["category"] = r->category;
    jr["cells"] = OrderedJson::object();
    for (const auto& [column, cell] : r->cells) {
      OrderedJson jc;
      jc["value"] = cell.value ? OrderedJson(*cell.value) : OrderedJson(nullptr);
      jc["confidence"] = cell.confidence;
      if (cell.ground_truth) jc["ground_truth"] = true;
      jc["candidates"] = OrderedJson::array();
      for (const auto& cand : cell.candidates) {
        OrderedJson jk;
        jk["answer"] = cand.answer;
        jk["user_id"] = cand.user_id;
        jk["accuracy"] = cand.accuracy;
        jc["candidates"].push_back(std::move(jk));
      }
      jr["cells"][column] = std::move(jc);
    }
    doc["rows"].push_back(std::move(jr));
  }
  return doc;
}

inline std::string save_kb(const KnowledgeBase& kb) {
  return kb_to_json(kb).dump(2) + "\n";
}

inline void save_kb_file(const KnowledgeBase& kb, const std::string& path) {
  json_util::write_file(path, save_kb(kb));
}

// ---------------------------------------------------------------------------
// Gaps and write-back.

// Cells in `category` that are absent, valueless, or below `conf_threshold`,
// ordered by (row id, column name).
inline std::vector<CellRef> find_gaps(const KnowledgeBase& kb,
                                      const std::string& category,
                                      double conf_threshold) {
  if (!kb.has_category(category)) {
    throw DomainError("unknown category '" + category + "'");
  }
  std::vector<std::string> names;
  for (const auto& c : kb.columns) names.push_back(c.name);
  std::sort(names.begin(), names.end());

  std::vector<CellRef> gaps;
  std::vector<const Row*> rows;
  for (const auto& r : kb.rows) {
    if (r.category == category) rows.push_back(&r);
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row* a, const Row* b) { return a->id < b->id; });
  for (const Row* r : rows) {
    for (const auto& name : names) {
      const Cell* cell = r->find_cell(name);
      if (cell == nullptr || !cell->has_value() ||
          cell->confidence < conf_threshold) {
        gaps.push_back({r->id, name});
      }
    }
  }
  return gaps;
}

struct CommitPolicy {
  double commit_threshold = 0.7;
  std::size_t min_distinct_users = 3;
};

struct CommitOutcome {
  bool committed = false;
  std::string value;  // meaningful only when committed
  double confidence = 0.0;

  bool operator==(const CommitOutcome&) const = default;
};

// Adds each non-skipped record to the target cell's candidate pool.
inline void append_candidates(KnowledgeBase& kb, const CellRef& target,
                              const std::vector<AnswerRecord>& records) {
  Cell& cell = kb.cell(target);
  for (const auto& r : records) {
    if (r.skipped) continue;
    cell.candidates.push_back({r.normalized_answer, r.user_id, r.accuracy_at_answer});
  }
}

// Candidate pool as answer records, in pool order, so a user's most recent
// candidate wins when aggregated.
inline std::vector<AnswerRecord> pool_records(const Cell& cell) {
  std::vector<AnswerRecord> records;
  records.reserve(cell.candidates.size());
  std::int64_t order = 0;
  for (const auto& c : cell.candidates) {
    AnswerRecord r;
    r.user_id = c.user_id;
    r.raw_answer = c.answer;
    r.normalized_answer = c.answer;
    r.accuracy_at_answer = c.accuracy;
    r.timestamp = Timestamp{order++};
    records.push_back(std::move(r));
  }
  return records;
}

// Writes the table's top answer into the cell when it is confident enough
// and the pool spans enough distinct users. Otherwise leaves the value alone.
inline CommitOutcome commit_answers(KnowledgeBase& kb, const CellRef& target,
                                    const ConfidenceTable& table,
                                    const CommitPolicy& policy = {}) {
  if (table.empty()) throw EmptyTableError("cannot commit an empty table");
  Cell& cell = kb.cell(target);
  const std::string& top = table.top_answer();
  const double confidence = table.confidence(top);
  if (confidence >= policy.commit_threshold && confidence > 0.0 &&
      cell.distinct_users() >= policy.min_distinct_users) {
    cell.value = top;
    cell.confidence = confidence;
    return {true, top, confidence};
  }
  return {};
}

}  // namespace datapop
