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

// Seeded generators for knowledge bases and profile stores, shared by the
// property and acceptance tests.

#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "datapop/kb.hpp"
#include "datapop/profiles.hpp"

namespace datapop::testing {

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len = 8) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -_'\"\\/\n\t\xc3\xa9";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 3);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 17 == 0) {
      s += "\xc3\xa9";  // keep UTF-8 valid
    } else {
      s += alphabet[pick(rng)];
    }
  }
  return s;
}

inline KnowledgeBase random_kb(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  KnowledgeBase kb;
  const std::size_t n_categories = 1 + rng() % 4;
  for (std::size_t i = 0; i < n_categories; ++i) {
    kb.categories.insert("cat" + std::to_string(i));
  }
  const std::size_t n_columns = 1 + rng() % 5;
  for (std::size_t i = 0; i < n_columns; ++i) {
    kb.columns.push_back({"col" + std::to_string(i),
                          static_cast<SlotType>(rng() % 4), unit(rng),
                          static_cast<std::uint32_t>(rng() % 3)});
    kb.templates.push_back({"Q " + random_word(rng) + " {Column Name} of {Entity Name}?",
                            kb.columns.back().name, kb.columns.back().slot_type});
  }
  const std::size_t n_rows = rng() % 12;
  for (std::size_t i = 0; i < n_rows; ++i) {
    Row r;
    r.id = "row" + std::to_string(i);
    r.entity_name = random_word(rng, 16);
    r.category = "cat" + std::to_string(rng() % n_categories);
    for (const auto& c : kb.columns) {
      if (rng() % 3 == 0) continue;  // absent cell
      Cell cell;
      if (rng() % 4 != 0) {
        cell.value = random_word(rng);
        cell.confidence = 0.01 + 0.99 * unit(rng);
      }
      cell.ground_truth = cell.value && rng() % 5 == 0;
      const std::size_t n_candidates = rng() % 4;
      for (std::size_t k = 0; k < n_candidates; ++k) {
        cell.candidates.push_back({random_word(rng), "u" + std::to_string(rng() % 6),
                                   3.0 * unit(rng)});
      }
      r.cells.emplace(c.name, std::move(cell));
    }
    kb.rows.push_back(std::move(r));
  }
  std::sort(kb.rows.begin(), kb.rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });
  return kb;
}

inline ProfileStore random_profiles(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProfileStore store;
  const std::size_t n = rng() % 10;
  for (std::size_t i = 0; i < n; ++i) {
    UserProfile p;
    p.user_id = "user" + std::to_string(i);
    p.display_name = random_word(rng, 12);
    const std::size_t n_interests = rng() % 3;
    for (std::size_t k = 0; k < n_interests; ++k) {
      p.interests.push_back("cat" + std::to_string(k));
    }
    p.accuracy.user_id = p.user_id;
    p.accuracy.probes_answered = rng() % 50;
    p.accuracy.probes_correct = p.accuracy.probes_answered == 0
                                    ? 0
                                    : rng() % (p.accuracy.probes_answered + 1);
    p.accuracy.score = kInitialAccuracy + 5.0 * unit(rng);
    p.lifetime_points = 200.0 * unit(rng);
    for (const auto& rule : default_badge_rules()) {
      if (rng() % 2 == 0) p.badges.push_back(rule.id);
    }
    p.created_at = Timestamp{static_cast<std::int64_t>(rng() % 2'000'000'000'000ULL)};
    store.put(std::move(p));
  }
  return store;
}

}  // namespace datapop::testing
