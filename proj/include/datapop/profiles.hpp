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

// User registry: interests, accuracy, lifetime points and badges.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/json_util.hpp"
#include "datapop/scoring.hpp"

namespace datapop {

struct UserProfile {
  std::string user_id;
  std::string display_name;
  std::vector<std::string> interests;
  UserAccuracy accuracy;
  double lifetime_points = 0.0;
  std::vector<std::string> badges;  // award order
  Timestamp created_at{0};

  bool operator==(const UserProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Interest classification by nearest category centroid.

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> words;
  std::map<std::string, std::vector<double>> centroids;  // category -> centroid
};

namespace detail {

// Lines of "token v1 ... vd"; blank lines and '#' comments are skipped.
inline void read_vectors(std::istream& in, std::size_t& dimension,
                         const std::string& what, auto&& sink) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token) || token.front() == '#') continue;
    std::vector<double> v;
    std::string number;
    while (fields >> number) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(number, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != number.size()) {
        throw ParseError(what + " line " + std::to_string(line_no) +
                         ": bad number '" + number + "'");
      }
      v.push_back(x);
    }
    if (v.empty()) {
      throw ParseError(what + " line " + std::to_string(line_no) +
                       ": no vector components");
    }
    if (dimension == 0) dimension = v.size();
    if (v.size() != dimension) {
      throw ParseError(what + " line " + std::to_string(line_no) +
                       ": expected " + std::to_string(dimension) +
                       " components, got " + std::to_string(v.size()));
    }
    sink(std::move(token), std::move(v));
  }
}

inline std::vector<std::string> interest_words(
    const std::vector<std::string>& phrases) {
  std::vector<std::string> words;
  for (const auto& phrase : phrases) {
    std::istringstream in(fold_text(phrase));
    std::string w;
    while (in >> w) {
      auto keep = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
      auto first = std::find_if(w.begin(), w.end(), keep);
      auto last = std::find_if(w.rbegin(), w.rend(), keep).base();
      if (first < last) words.emplace_back(first, last);
    }
  }
  return words;
}

}  // namespace detail

inline EmbeddingTable load_embeddings(std::istream& words,
                                      std::istream& centroids) {
  EmbeddingTable table;
  detail::read_vectors(words, table.dimension, "embeddings",
                       [&](std::string token, std::vector<double> v) {
                         table.words[std::move(token)] = std::move(v);
                       });
  detail::read_vectors(centroids, table.dimension, "centroids",
                       [&](std::string token, std::vector<double> v) {
                         table.centroids[std::move(token)] = std::move(v);
                       });
  return table;
}

inline EmbeddingTable load_embeddings_files(const std::string& words_path,
                                            const std::string& centroids_path) {
  std::istringstream words(json_util::read_file(words_path));
  std::istringstream centroids(json_util::read_file(centroids_path));
  return load_embeddings(words, centroids);
}

// Averages the embeddings of every known word in `phrases` and returns the
// k categories with the nearest centroids, nearest first. Equal distances
// are ordered by category id.
inline std::vector<std::string> classify_interests(
    const std::vector<std::string>& phrases, const EmbeddingTable& table,
    std::size_t k) {
  if (k == 0) throw DomainError("k must be at least 1");
  auto words = detail::interest_words(phrases);
  // Summing in a canonical order keeps the mean bit-identical under any
  // permutation of the input words.
  std::sort(words.begin(), words.end());
  std::vector<double> mean(table.dimension, 0.0);
  std::size_t known = 0;
  for (const auto& w : words) {
    auto it = table.words.find(w);
    if (it == table.words.end()) continue;
    for (std::size_t i = 0; i < table.dimension; ++i) mean[i] += it->second[i];
    ++known;
  }
  if (known == 0) {
    throw ClassificationError(
        "none of the interest words are known; please describe your "
        "interests again");
  }
  for (double& x : mean) x /= static_cast<double>(known);

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [category, centroid] : table.centroids) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < table.dimension; ++i) {
      const double diff = mean[i] - centroid[i];
      d2 += diff * diff;
    }
    ranked.emplace_back(d2, category);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    out.push_back(ranked[i].second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Badges.

enum class BadgeMetric { kLifetimePoints, kProbesCorrect };

struct BadgeRule {
  std::string id;
  std::string name;
  BadgeMetric metric = BadgeMetric::kLifetimePoints;
  double threshold = 0.0;
};

struct BadgeInfo {
  std::string id;
  std::string name;

  bool operator==(const BadgeInfo&) const = default;
};

inline const std::vector<BadgeRule>& default_badge_rules() {
  static const std::vector<BadgeRule> rules = {
      {"bronze", "Bronze Curator", BadgeMetric::kLifetimePoints, 10},
      {"silver", "Silver Curator", BadgeMetric::kLifetimePoints, 50},
      {"gold", "Gold Curator", BadgeMetric::kLifetimePoints, 100},
      {"scout", "Scout", BadgeMetric::kProbesCorrect, 10},
      {"scholar", "Scholar", BadgeMetric::kProbesCorrect, 50},
  };
  return rules;
}

// Awards every rule whose threshold is met and whose badge is not yet held.
// Returns the newly awarded ids in rule order.
inline std::vector<std::string> award_badges(
    UserProfile& profile,
    const std::vector<BadgeRule>& rules = default_badge_rules()) {
  std::vector<std::string> awarded;
  for (const auto& rule : rules) {
    if (std::find(profile.badges.begin(), profile.badges.end(), rule.id) !=
        profile.badges.end()) {
      continue;
    }
    const double value =
        rule.metric == BadgeMetric::kLifetimePoints
            ? profile.lifetime_points
            : static_cast<double>(profile.accuracy.probes_correct);
    if (value >= rule.threshold) {
      profile.badges.push_back(rule.id);
      awarded.push_back(rule.id);
    }
  }
  return awarded;
}

inline std::vector<BadgeInfo> list_badges(
    const UserProfile& profile,
    const std::vector<BadgeRule>& rules = default_badge_rules()) {
  std::vector<BadgeInfo> out;
  for (const auto& id : profile.badges) {
    auto it = std::find_if(rules.begin(), rules.end(),
                           [&](const BadgeRule& r) { return r.id == id; });
    out.push_back({id, it == rules.end() ? id : it->name});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profile store.

class ProfileStore {
 public:
  const UserProfile* find(const std::string& user_id) const {
    auto it = users_.find(user_id);
    return it == users_.end() ? nullptr : &it->second;
  }

  UserProfile* find(const std::string& user_id) {
    auto it = users_.find(user_id);
    return it == users_.end() ? nullptr : &it->second;
  }

  const UserProfile& at(const std::string& user_id) const {
    if (const auto* p = find(user_id)) return *p;
    throw DomainError("unknown user '" + user_id + "'");
  }

  UserProfile& at(const std::string& user_id) {
    if (auto* p = find(user_id)) return *p;
    throw DomainError("unknown user '" + user_id + "'");
  }

  // Returns the existing profile, or registers a new one with the prior
  // accuracy.
  UserProfile& ensure(const std::string& user_id,
                      const std::string& display_name, Timestamp now) {
    auto [it, inserted] = users_.try_emplace(user_id);
    if (inserted) {
      it->second.user_id = user_id;
      it->second.display_name = display_name.empty() ? user_id : display_name;
      it->second.accuracy.user_id = user_id;
      it->second.created_at = now;
    }
    return it->second;
  }

  void put(UserProfile profile) {
    users_[profile.user_id] = std::move(profile);
  }

  std::size_t size() const { return users_.size(); }
  const std::map<std::string, UserProfile>& users() const { return users_; }

  bool operator==(const ProfileStore&) const = default;

 private:
  std::map<std::string, UserProfile> users_;
};

inline ProfileStore profiles_from_json(const Json& doc) {
  using namespace json_util;
  ProfileStore store;
  const auto& users = as_array(field(doc, "users", "profiles"), "profiles.users");
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::string p = "profiles.users[" + std::to_string(i) + "]";
    const auto& u = users[i];
    UserProfile profile;
    profile.user_id = as_string(field(u, "user_id", p), p + ".user_id");
    profile.display_name =
        as_string(field(u, "display_name", p), p + ".display_name");
    const auto& interests =
        as_array(field(u, "interests", p), p + ".interests");
    for (std::size_t k = 0; k < interests.size(); ++k) {
      profile.interests.push_back(
          as_string(interests[k], p + ".interests[" + std::to_string(k) + "]"));
    }
    const auto& acc = field(u, "accuracy", p);
    const std::string ap = p + ".accuracy";
    profile.accuracy.user_id = profile.user_id;
    profile.accuracy.score = as_number(field(acc, "score", ap), ap + ".score");
    profile.accuracy.probes_answered =
        as_count(field(acc, "probes_answered", ap), ap + ".probes_answered");
    profile.accuracy.probes_correct =
        as_count(field(acc, "probes_correct", ap), ap + ".probes_correct");
    if (profile.accuracy.probes_correct > profile.accuracy.probes_answered) {
      throw ValidationError(ap + ": probes_correct exceeds probes_answered");
    }
    profile.lifetime_points =
        as_number(field(u, "lifetime_points", p), p + ".lifetime_points");
    if (profile.lifetime_points < 0.0) {
      throw ValidationError(p + ".lifetime_points: negative");
    }
    const auto& badges = as_array(field(u, "badges", p), p + ".badges");
    for (std::size_t k = 0; k < badges.size(); ++k) {
      auto id = as_string(badges[k], p + ".badges[" + std::to_string(k) + "]");
      if (std::find(profile.badges.begin(), profile.badges.end(), id) !=
          profile.badges.end()) {
        throw ValidationError(p + ".badges: duplicate '" + id + "'");
      }
      profile.badges.push_back(std::move(id));
    }
    profile.created_at =
        Timestamp{as_int(field(u, "created_at", p), p + ".created_at")};
    if (store.find(profile.user_id) != nullptr) {
      throw ValidationError(p + ".user_id: duplicate '" + profile.user_id + "'");
    }
    store.put(std::move(profile));
  }
  return store;
}

inline ProfileStore load_profiles(std::string_view text) {
  return profiles_from_json(json_util::parse_document(text, "profiles"));
}

inline ProfileStore load_profiles_file(const std::string& path) {
  return load_profiles(json_util::read_file(path));
}

inline std::string save_profiles(const ProfileStore& store) {
  OrderedJson doc;
  doc["users"] = OrderedJson::array();
  for (const auto& [id, u] : store.users()) {
    OrderedJson ju;
    ju["user_id"] = u.user_id;
    ju["display_name"] = u.display_name;
    ju["interests"] = u.interests;
    ju["accuracy"] = {{"score", u.accuracy.score},
                      {"probes_answered", u.accuracy.probes_answered},
                      {"probes_correct", u.accuracy.probes_correct}};
    ju["lifetime_points"] = u.lifetime_points;
    ju["badges"] = u.badges;
    ju["created_at"] = u.created_at.count();
    doc["users"].push_back(std::move(ju));
  }
  return doc.dump(2) + "\n";
}

inline void save_profiles_file(const ProfileStore& store,
                               const std::string& path) {
  json_util::write_file(path, save_profiles(store));
}

}  // namespace datapop
