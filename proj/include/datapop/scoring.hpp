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

// Answer normalization, per-user accuracy from probe questions, and
// accuracy-weighted confidence over the distinct answers to one question.

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/slot_type.hpp"

namespace datapop {

// Accuracy every new user starts with. A zero prior would remove new users
// from the confidence denominator entirely.
inline constexpr double kInitialAccuracy = 0.5;

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

inline std::string pad2(unsigned v) {
  std::string out = std::to_string(v);
  return out.size() < 2 ? "0" + out : out;
}

inline std::string canonical_date(const std::string& folded) {
  // YYYY, YYYY-MM or YYYY-MM-DD with '-', '/' or '.' as separator.
  std::vector<std::string> parts;
  std::string current;
  for (char c : folded) {
    if (c == '-' || c == '/' || c == '.') {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  if (parts.empty() || parts.size() > 3 || parts[0].size() != 4) {
    throw NormalizationError("unparseable date '" + folded + "'");
  }
  for (const auto& p : parts) {
    if (!all_digits(p) || p.size() > 4) {
      throw NormalizationError("unparseable date '" + folded + "'");
    }
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].size() > 2) {
      throw NormalizationError("unparseable date '" + folded + "'");
    }
  }
  const int year = std::stoi(parts[0]);
  std::string out = parts[0];
  if (parts.size() >= 2) {
    const unsigned month = static_cast<unsigned>(std::stoi(parts[1]));
    if (!std::chrono::month{month}.ok()) {
      throw NormalizationError("month out of range in '" + folded + "'");
    }
    out += "-" + pad2(month);
    if (parts.size() == 3) {
      const unsigned day = static_cast<unsigned>(std::stoi(parts[2]));
      const std::chrono::year_month_day ymd{std::chrono::year{year},
                                            std::chrono::month{month},
                                            std::chrono::day{day}};
      if (!ymd.ok()) {
        throw NormalizationError("day out of range in '" + folded + "'");
      }
      out += "-" + pad2(day);
    }
  }
  return out;
}

inline std::string canonical_number(const std::string& folded) {
  std::string_view s = folded;
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part =
      dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  const bool int_ok = int_part.empty() || all_digits(int_part);
  const bool frac_ok = frac_part.empty() || all_digits(frac_part);
  if (!int_ok || !frac_ok || (int_part.empty() && frac_part.empty())) {
    throw NormalizationError("unparseable number '" + folded + "'");
  }
  while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);
  std::string out = int_part.empty() ? "0" : std::string(int_part);
  if (!frac_part.empty()) out += "." + std::string(frac_part);
  if (negative && out != "0") out = "-" + out;
  return out;
}

}  // namespace detail

// Trims, collapses internal whitespace runs to one space, and lower-cases
// ASCII letters. Bytes outside ASCII pass through unchanged.
inline std::string fold_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (detail::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// Canonical form used to decide whether two answers are the same.
// DATE → YYYY | YYYY-MM | YYYY-MM-DD; NUMBER → minimal decimal;
// TEXT/ORGANIZATION → case and whitespace folded.
inline std::string normalize_answer(std::string_view raw, SlotType slot) {
  std::string folded = fold_text(raw);
  if (folded.empty()) throw NormalizationError("empty answer");
  switch (slot) {
    case SlotType::kDate:
      return detail::canonical_date(folded);
    case SlotType::kNumber:
      return detail::canonical_number(folded);
    case SlotType::kText:
    case SlotType::kOrganization:
      break;
  }
  return folded;
}

// Like normalize_answer, but an unparseable DATE/NUMBER falls back to its
// folded text. A folded unparseable string can never equal a canonical
// form, so it stays a distinct, non-matching answer.
inline std::string normalize_or_fold(std::string_view raw, SlotType slot) {
  try {
    return normalize_answer(raw, slot);
  } catch (const NormalizationError&) {
    return fold_text(raw);
  }
}

struct UserAccuracy {
  std::string user_id;
  double score = kInitialAccuracy;  // cumulative, never decreases
  std::size_t probes_answered = 0;
  std::size_t probes_correct = 0;

  bool operator==(const UserAccuracy&) const = default;
};

// A correct probe adds the column difficulty to the score; an incorrect one
// adds nothing. Counters move either way.
inline UserAccuracy update_accuracy(UserAccuracy acc, bool correct,
                                    double column_difficulty) {
  if (!(column_difficulty >= 0.0 && column_difficulty <= 1.0)) {
    throw DomainError("column difficulty outside [0,1]");
  }
  ++acc.probes_answered;
  if (correct) {
    ++acc.probes_correct;
    acc.score += column_difficulty;
  }
  return acc;
}

struct AnswerRecord {
  std::string user_id;
  std::string query_id;
  std::string raw_answer;
  std::string normalized_answer;  // empty when skipped
  double accuracy_at_answer = 0.0;  // frozen when the answer arrives
  bool skipped = false;
  Timestamp timestamp{0};

  bool operator==(const AnswerRecord&) const = default;
};

struct ConfidenceEntry {
  double confidence = 0.0;
  std::size_t respondents = 0;

  bool operator==(const ConfidenceEntry&) const = default;
};

struct ConfidenceTable {
  std::map<std::string, ConfidenceEntry> entries;  // keyed by normalized answer
  std::size_t total_respondents = 0;
  // Set when every respondent had zero accuracy and confidences fell back to
  // a uniform split.
  bool low_trust = false;

  bool empty() const { return entries.empty(); }

  double confidence(const std::string& answer) const {
    auto it = entries.find(answer);
    return it == entries.end() ? 0.0 : it->second.confidence;
  }

  // Highest-confidence answer; ties go to the lexicographically smallest.
  const std::string& top_answer() const {
    if (entries.empty()) throw EmptyTableError("confidence table is empty");
    auto best = entries.begin();
    for (auto it = entries.begin(); it != entries.end(); ++it) {
      if (it->second.confidence > best->second.confidence) best = it;
    }
    return best->first;
  }

  bool operator==(const ConfidenceTable&) const = default;
};

// Non-skipped records with one record per user; a user's later record
// (by timestamp, then by position) replaces an earlier one. Output keeps
// first-appearance order of users.
inline std::vector<AnswerRecord> latest_per_user(
    const std::vector<AnswerRecord>& records) {
  std::vector<AnswerRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto it = index.find(r.user_id);
    if (it == index.end()) {
      index.emplace(r.user_id, out.size());
      out.push_back(r);
    } else if (r.timestamp >= out[it->second].timestamp) {
      out[it->second] = r;
    }
  }
  std::erase_if(out, [](const AnswerRecord& r) { return r.skipped; });
  return out;
}

// c_i = (sum of accuracy over users giving answer i) /
//       (sum of accuracy over all non-skipped respondents).
inline ConfidenceTable compute_confidence(
    const std::vector<AnswerRecord>& records) {
  const auto answered = latest_per_user(records);
  if (answered.empty()) {
    throw EmptyTableError("no non-skipped answers to aggregate");
  }
  std::map<std::string, double> mass;
  ConfidenceTable table;
  double total = 0.0;
  for (const auto& r : answered) {
    if (r.accuracy_at_answer < 0.0) {
      throw DomainError("negative accuracy for user " + r.user_id);
    }
    mass[r.normalized_answer] += r.accuracy_at_answer;
    ++table.entries[r.normalized_answer].respondents;
    total += r.accuracy_at_answer;
  }
  table.total_respondents = answered.size();
  if (total > 0.0) {
    for (auto& [answer, entry] : table.entries) {
      entry.confidence = mass[answer] / total;
    }
  } else {
    table.low_trust = true;
    const double share = 1.0 / static_cast<double>(table.entries.size());
    for (auto& [answer, entry] : table.entries) entry.confidence = share;
  }
  return table;
}

struct RoundWinner {
  std::string answer;
  std::vector<std::string> user_ids;

  bool operator==(const RoundWinner&) const = default;
};

inline RoundWinner resolve_round_winner(
    const ConfidenceTable& table, const std::vector<AnswerRecord>& records) {
  RoundWinner winner{table.top_answer(), {}};
  for (const auto& r : latest_per_user(records)) {
    if (r.normalized_answer == winner.answer) winner.user_ids.push_back(r.user_id);
  }
  return winner;
}

}  // namespace datapop
