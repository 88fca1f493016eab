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

// Question generation. A gap is chosen in stages (topic, then most
// important column, then uniformly at random) and turned into text through
// one of the templates that target its column. A fraction of questions are
// probes: cells whose answer is already known, used to measure players.

#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/kb.hpp"
#include "datapop/scoring.hpp"

namespace datapop {

using Rng = std::mt19937_64;

struct GeneratedQuery {
  std::string query_id;
  std::string question_text;
  CellRef target;
  SlotType answer_slot = SlotType::kText;
  double difficulty = 0.0;
  bool is_probe = false;
  std::optional<std::string> expected_answer;  // present iff is_probe

  bool operator==(const GeneratedQuery&) const = default;
};

struct QueryConfig {
  double gap_threshold = 0.7;
  double probe_ratio = 0.25;
};

template <typename URBG>
std::size_t uniform_index(std::size_t n, URBG& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  return pick(rng);
}

// Keeps the gaps under the most important column (lowest rank) and picks one
// uniformly. The list is sorted first so storage order never matters.
template <typename URBG>
CellRef select_gap(std::vector<CellRef> gaps,
                   const std::vector<ColumnMeta>& columns, URBG& rng) {
  if (gaps.empty()) throw CategoryComplete("category complete: no gaps left");
  auto importance_of = [&](const std::string& name) {
    for (const auto& c : columns) {
      if (c.name == name) return c.importance;
    }
    throw DomainError("gap names unknown column '" + name + "'");
  };
  std::sort(gaps.begin(), gaps.end());
  std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
  for (const auto& g : gaps) best = std::min(best, importance_of(g.column));
  std::erase_if(gaps, [&](const CellRef& g) {
    return importance_of(g.column) != best;
  });
  return gaps[uniform_index(gaps.size(), rng)];
}

inline std::string display_column_name(const std::string& name) {
  std::string out = name;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

inline std::string instantiate_template(const QueryTemplate& tmpl,
                                        const Row& row,
                                        const ColumnMeta& column,
                                        const std::optional<std::string>& value) {
  std::string out;
  const std::string& p = tmpl.pattern;
  std::size_t i = 0;
  while (i < p.size()) {
    if (p[i] == '}') {
      throw TemplateError("stray '}' in template '" + p + "'");
    }
    if (p[i] != '{') {
      out += p[i++];
      continue;
    }
    const auto close = p.find('}', i);
    if (close == std::string::npos) {
      throw TemplateError("unterminated placeholder in template '" + p + "'");
    }
    const std::string name = p.substr(i + 1, close - i - 1);
    if (name == "Entity Name") {
      out += row.entity_name;
    } else if (name == "Column Name") {
      out += display_column_name(column.name);
    } else if (name == "Column Value") {
      if (!value) {
        throw TemplateError("placeholder {Column Value} has no value");
      }
      out += *value;
    } else {
      throw TemplateError("unknown placeholder {" + name + "}");
    }
    i = close + 1;
  }
  return out;
}

namespace detail {

inline bool needs_value(const QueryTemplate& t) {
  return t.pattern.find("{Column Value}") != std::string::npos;
}

// Templates that can be instantiated for this cell. {Column Value} resolves
// to the cell's current value, so probes never use such templates.
inline std::vector<const QueryTemplate*> usable_templates(
    const KnowledgeBase& kb, const CellRef& ref, bool probe = false) {
  const Cell* cell = kb.row(ref.row_id).find_cell(ref.column);
  const bool has_value = cell != nullptr && cell->has_value();
  std::vector<const QueryTemplate*> out;
  for (const auto& t : kb.templates) {
    if (t.target_column != ref.column) continue;
    if (needs_value(t) && (probe || !has_value)) continue;
    out.push_back(&t);
  }
  return out;
}

inline std::vector<CellRef> probe_cells(const KnowledgeBase& kb,
                                        const std::string& category) {
  std::vector<CellRef> out;
  for (const auto& r : kb.rows) {
    if (r.category != category) continue;
    for (const auto& [column, cell] : r.cells) {
      if (is_ground_truth(cell)) out.push_back({r.id, column});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<CellRef> askable(const KnowledgeBase& kb,
                                    std::vector<CellRef> cells,
                                    const std::set<CellRef>& exclude, bool probe) {
  std::erase_if(cells, [&](const CellRef& c) {
    return usable_templates(kb, c, probe).empty();
  });
  std::vector<CellRef> fresh = cells;
  std::erase_if(fresh, [&](const CellRef& c) { return exclude.count(c) > 0; });
  return fresh.empty() ? cells : fresh;
}

}  // namespace detail

// True when generate_query can produce anything for the category.
inline bool has_questions(const KnowledgeBase& kb, const std::string& category,
                          const QueryConfig& config) {
  return !detail::askable(kb, find_gaps(kb, category, config.gap_threshold), {}, false)
              .empty() ||
         !detail::askable(kb, detail::probe_cells(kb, category), {}, true).empty();
}

// Emits a probe with probability `config.probe_ratio`, otherwise a question
// about a gap. Falls back to the other kind when the chosen pool is empty.
// Cells in `exclude` (typically already asked this session) are avoided
// while alternatives remain.
template <typename URBG>
GeneratedQuery generate_query(const KnowledgeBase& kb,
                              const std::string& category, URBG& rng,
                              const QueryConfig& config, std::string query_id,
                              const std::set<CellRef>& exclude = {}) {
  const auto gaps = detail::askable(
      kb, find_gaps(kb, category, config.gap_threshold), exclude, false);
  const auto probes =
      detail::askable(kb, detail::probe_cells(kb, category), exclude, true);
  std::bernoulli_distribution coin(std::clamp(config.probe_ratio, 0.0, 1.0));
  bool probe = coin(rng);
  if (probe && probes.empty()) probe = false;
  if (!probe && gaps.empty()) probe = true;
  if (probe && probes.empty()) {
    throw CategoryExhausted("category '" + category + "' has no gaps or probes");
  }

  const CellRef target =
      probe ? probes[uniform_index(probes.size(), rng)]
            : select_gap(gaps, kb.columns, rng);
  const auto templates = detail::usable_templates(kb, target, probe);
  const QueryTemplate& tmpl = *templates[templates.size() == 1
                                             ? 0
                                             : uniform_index(templates.size(), rng)];
  const Row& row = kb.row(target.row_id);
  const ColumnMeta& column = kb.column(target.column);
  const Cell* cell = row.find_cell(target.column);
  const std::optional<std::string> value =
      cell != nullptr ? cell->value : std::nullopt;

  GeneratedQuery q;
  q.query_id = std::move(query_id);
  q.question_text = instantiate_template(tmpl, row, column, value);
  q.target = target;
  q.answer_slot = tmpl.answer_slot;
  q.difficulty = column.difficulty;
  q.is_probe = probe;
  if (probe) q.expected_answer = normalize_or_fold(*value, tmpl.answer_slot);
  return q;
}

}  // namespace datapop
