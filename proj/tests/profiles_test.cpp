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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "datapop/profiles.hpp"
#include "random_fixtures.hpp"

namespace datapop {
namespace {

// Centroids at (0,0) "alpha" and (2,0) "beta"; words on the x axis.
EmbeddingTable toy_table() {
  std::istringstream words(
      "# toy\n"
      "zero 0 0\n"
      "one 1 0\n"
      "two 2 0\n"
      "\n"
      "left -1 0\n");
  std::istringstream centroids("beta 2 0\nalpha 0 0\n");
  return load_embeddings(words, centroids);
}

TEST(LoadEmbeddings, SkipsCommentsAndBlankLines) {
  const auto t = toy_table();
  EXPECT_EQ(t.dimension, 2u);
  EXPECT_EQ(t.words.size(), 4u);
  EXPECT_EQ(t.centroids.size(), 2u);
}

TEST(LoadEmbeddings, DimensionMismatchIsAParseError) {
  std::istringstream words("a 1 2\nb 1 2 3\n");
  std::istringstream centroids("c 0 0\n");
  EXPECT_THROW(load_embeddings(words, centroids), ParseError);
  std::istringstream bad("a 1 x\n");
  std::istringstream none;
  EXPECT_THROW(load_embeddings(bad, none), ParseError);
}

TEST(LoadEmbeddings, FixtureFiles) {
  const std::string dir = std::string(DATAPOP_DATA_DIR) + "/embeddings";
  const auto t = load_embeddings_files(dir + "/words.txt", dir + "/centroids.txt");
  EXPECT_EQ(t.dimension, 16u);
  EXPECT_EQ(classify_interests({"query optimization", "transactions"}, t, 1),
            (std::vector<std::string>{"databases"}));
  EXPECT_EQ(classify_interests({"search ranking relevance"}, t, 1),
            (std::vector<std::string>{"information_retrieval"}));
}

TEST(ClassifyInterests, WordAtCentroid) {
  EXPECT_EQ(classify_interests({"two"}, toy_table(), 1),
            (std::vector<std::string>{"beta"}));
  EXPECT_EQ(classify_interests({"Zero!"}, toy_table(), 2),
            (std::vector<std::string>{"alpha", "beta"}));
}

TEST(ClassifyInterests, SymmetricTieOrderedById) {
  // Mean of "one" is (1,0): distance 1 to both centroids.
  EXPECT_EQ(classify_interests({"one"}, toy_table(), 2),
            (std::vector<std::string>{"alpha", "beta"}));
  // Mean of zero and two is also (1,0).
  EXPECT_EQ(classify_interests({"two zero"}, toy_table(), 2),
            (std::vector<std::string>{"alpha", "beta"}));
}

TEST(ClassifyInterests, UnknownWordsIgnored) {
  EXPECT_EQ(classify_interests({"quasar two nebula"}, toy_table(), 1),
            (std::vector<std::string>{"beta"}));
}

TEST(ClassifyInterests, Errors) {
  EXPECT_THROW(classify_interests({"quasar", "nebula"}, toy_table(), 1),
               ClassificationError);
  EXPECT_THROW(classify_interests({}, toy_table(), 1), ClassificationError);
  EXPECT_THROW(classify_interests({"one"}, toy_table(), 0), DomainError);
}

TEST(ClassifyInterestsProperty, PermutationInvariant) {
  EmbeddingTable t;
  t.dimension = 4;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) {
    vocab.push_back("w" + std::to_string(i));
    t.words[vocab.back()] = {normal(rng), normal(rng), normal(rng), normal(rng)};
  }
  for (int c = 0; c < 6; ++c) {
    t.centroids["c" + std::to_string(c)] = {normal(rng), normal(rng), normal(rng),
                                            normal(rng)};
  }
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> phrases;
    for (int i = 0; i < 5 + trial % 6; ++i) phrases.push_back(vocab[rng() % vocab.size()]);
    const auto expected = classify_interests(phrases, t, 3);
    std::shuffle(phrases.begin(), phrases.end(), rng);
    EXPECT_EQ(classify_interests(phrases, t, 3), expected);
  }
}

UserProfile fresh(const std::string& id = "u") {
  UserProfile p;
  p.user_id = id;
  p.accuracy.user_id = id;
  return p;
}

TEST(AwardBadges, NothingAtStart) {
  auto p = fresh();
  EXPECT_TRUE(award_badges(p).empty());
  EXPECT_TRUE(list_badges(p).empty());
}

TEST(AwardBadges, CrossingSeveralThresholdsAwardsEach) {
  auto p = fresh();
  p.lifetime_points = 55;
  EXPECT_EQ(award_badges(p), (std::vector<std::string>{"bronze", "silver"}));
  EXPECT_TRUE(award_badges(p).empty());
  p.lifetime_points = 100;
  p.accuracy.probes_correct = 10;
  EXPECT_EQ(award_badges(p), (std::vector<std::string>{"gold", "scout"}));
}

TEST(ListBadges, AwardOrderWithNames) {
  auto p = fresh();
  p.lifetime_points = 12;
  award_badges(p);
  ASSERT_EQ(list_badges(p).size(), 1u);
  p.accuracy.probes_correct = 10;
  award_badges(p);
  EXPECT_EQ(list_badges(p), (std::vector<BadgeInfo>{{"bronze", "Bronze Curator"},
                                                    {"scout", "Scout"}}));
}

TEST(AwardBadgesProperty, IdempotentAndDuplicateFree) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = fresh();
    for (int step = 0; step < 20; ++step) {
      p.lifetime_points += static_cast<double>(rng() % 15);
      p.accuracy.probes_correct += rng() % 6;
      award_badges(p);
      EXPECT_TRUE(award_badges(p).empty());
      auto sorted = p.badges;
      std::sort(sorted.begin(), sorted.end());
      EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    }
  }
}

TEST(ProfileStore, EnsureRegistersOnce) {
  ProfileStore store;
  auto& p = store.ensure("alice", "", Timestamp{5});
  EXPECT_EQ(p.display_name, "alice");
  EXPECT_EQ(p.accuracy.score, kInitialAccuracy);
  p.lifetime_points = 3;
  EXPECT_EQ(store.ensure("alice", "Other", Timestamp{9}).lifetime_points, 3);
  EXPECT_EQ(store.at("alice").created_at, Timestamp{5});
  EXPECT_THROW(store.at("bob"), DomainError);
}

TEST(Persistence, SchemaAndRoundTrip) {
  const auto store = load_profiles(R"({"users": [{"user_id": "alice",
      "display_name": "Alice", "interests": ["databases"],
      "accuracy": {"score": 1.3, "probes_answered": 2, "probes_correct": 1},
      "lifetime_points": 12.5, "badges": ["bronze"], "created_at": 1700000000000}]})");
  const auto& a = store.at("alice");
  EXPECT_EQ(a.accuracy.score, 1.3);
  EXPECT_EQ(a.badges, (std::vector<std::string>{"bronze"}));
  EXPECT_EQ(a.created_at, Timestamp{1700000000000});
  EXPECT_EQ(load_profiles(save_profiles(store)), store);
  const std::string text = save_profiles(store);
  EXPECT_LT(text.find("\"user_id\""), text.find("\"display_name\""));
  EXPECT_LT(text.find("\"lifetime_points\""), text.find("\"badges\""));
}

TEST(Persistence, RejectsInconsistentProfiles) {
  EXPECT_THROW(load_profiles(R"({"users": [{"user_id": "a", "display_name": "A",
      "interests": [], "accuracy": {"score": 0.5, "probes_answered": 1,
      "probes_correct": 2}, "lifetime_points": 0, "badges": [], "created_at": 0}]})"),
               ValidationError);
  EXPECT_THROW(load_profiles(R"({"users": [{"user_id": "a", "display_name": "A",
      "interests": [], "accuracy": {"score": 0.5, "probes_answered": 0,
      "probes_correct": 0}, "lifetime_points": 0, "badges": ["x", "x"],
      "created_at": 0}]})"),
               ValidationError);
  EXPECT_THROW(load_profiles(R"({"users": [{"user_id": "a"}]})"), ParseError);
}

TEST(PersistenceProperty, RandomStoresRoundTrip) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto store = testing::random_profiles(seed);
    const std::string text = save_profiles(store);
    const auto back = load_profiles(text);
    EXPECT_EQ(back, store) << seed;
    EXPECT_EQ(save_profiles(back), text);
  }
}

}  // namespace
}  // namespace datapop
