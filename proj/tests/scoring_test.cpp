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

#include "datapop/scoring.hpp"

namespace datapop {
namespace {

AnswerRecord rec(const std::string& user, const std::string& answer, double acc,
                 std::int64_t t = 0) {
  AnswerRecord r;
  r.user_id = user;
  r.query_id = "q";
  r.raw_answer = answer;
  r.normalized_answer = answer;
  r.accuracy_at_answer = acc;
  r.timestamp = Timestamp{t};
  return r;
}

AnswerRecord skipped(const std::string& user, double acc) {
  AnswerRecord r = rec(user, "", acc);
  r.skipped = true;
  return r;
}

TEST(NormalizeAnswer, FoldsText) {
  EXPECT_EQ(normalize_answer("  Full ", SlotType::kText), "full");
  EXPECT_EQ(normalize_answer("Carnegie   Mellon\tUniversity",
                             SlotType::kOrganization),
            "carnegie mellon university");
}

TEST(NormalizeAnswer, Dates) {
  EXPECT_EQ(normalize_answer("2013", SlotType::kDate), "2013");
  EXPECT_EQ(normalize_answer("2013/7", SlotType::kDate), "2013-07");
  EXPECT_EQ(normalize_answer(" 2013-7-4 ", SlotType::kDate), "2013-07-04");
  EXPECT_EQ(normalize_answer("2012.02.29", SlotType::kDate), "2012-02-29");
  EXPECT_THROW(normalize_answer("2013-02-30", SlotType::kDate), NormalizationError);
  EXPECT_THROW(normalize_answer("2013-13", SlotType::kDate), NormalizationError);
  EXPECT_THROW(normalize_answer("last year", SlotType::kDate), NormalizationError);
  EXPECT_THROW(normalize_answer("13", SlotType::kDate), NormalizationError);
}

TEST(NormalizeAnswer, Numbers) {
  EXPECT_EQ(normalize_answer("07.50", SlotType::kNumber), "7.5");
  EXPECT_EQ(normalize_answer("0042", SlotType::kNumber), "42");
  EXPECT_EQ(normalize_answer("10.000", SlotType::kNumber), "10");
  EXPECT_EQ(normalize_answer(".5", SlotType::kNumber), "0.5");
  EXPECT_EQ(normalize_answer("+3", SlotType::kNumber), "3");
  EXPECT_EQ(normalize_answer("-0.0", SlotType::kNumber), "0");
  EXPECT_EQ(normalize_answer("-02.10", SlotType::kNumber), "-2.1");
  EXPECT_THROW(normalize_answer("seven", SlotType::kNumber), NormalizationError);
  EXPECT_THROW(normalize_answer(".", SlotType::kNumber), NormalizationError);
  EXPECT_THROW(normalize_answer("1.2.3", SlotType::kNumber), NormalizationError);
}

TEST(NormalizeAnswer, EmptyIsAnError) {
  EXPECT_THROW(normalize_answer("   ", SlotType::kText), NormalizationError);
}

TEST(NormalizeAnswer, UnparseableFallsBackToDistinctText) {
  const std::string folded = normalize_or_fold(" Seven ", SlotType::kNumber);
  EXPECT_EQ(folded, "seven");
  EXPECT_NE(folded, normalize_answer("7", SlotType::kNumber));
}

TEST(UpdateAccuracy, CorrectAddsDifficulty) {
  UserAccuracy acc{"u", 0.5, 0, 0};
  const auto after = update_accuracy(acc, true, 0.8);
  EXPECT_DOUBLE_EQ(after.score, 1.3);
  EXPECT_EQ(after.probes_answered, 1u);
  EXPECT_EQ(after.probes_correct, 1u);
}

TEST(UpdateAccuracy, IncorrectAddsNothing) {
  const auto after = update_accuracy({"u", 0.5, 0, 0}, false, 0.8);
  EXPECT_EQ(after.score, 0.5);
  EXPECT_EQ(after.probes_answered, 1u);
  EXPECT_EQ(after.probes_correct, 0u);
}

TEST(UpdateAccuracy, ZeroDifficulty) {
  EXPECT_EQ(update_accuracy({"u", 0.5, 0, 0}, true, 0.0).score, 0.5);
}

TEST(UpdateAccuracy, RejectsDifficultyOutsideUnitInterval) {
  EXPECT_THROW(update_accuracy({}, true, 1.5), DomainError);
  EXPECT_THROW(update_accuracy({}, true, -0.1), DomainError);
}

TEST(ComputeConfidence, WorkedExample) {
  const std::vector<AnswerRecord> records = {
      rec("a", "associate", .6), rec("b", "associate", .8),
      rec("c", "full", .5),      rec("d", "full", .7),
      rec("e", "full", .9)};
  const auto table = compute_confidence(records);
  EXPECT_NEAR(table.confidence("associate"), 0.4, 1e-9);
  EXPECT_NEAR(table.confidence("full"), 0.6, 1e-9);
  EXPECT_EQ(table.entries.at("associate").respondents, 2u);
  EXPECT_EQ(table.entries.at("full").respondents, 3u);
  EXPECT_EQ(table.total_respondents, 5u);
  EXPECT_FALSE(table.low_trust);
}

TEST(ComputeConfidence, SingleRespondent) {
  const auto table = compute_confidence({rec("a", "cmu", 0.37)});
  EXPECT_EQ(table.confidence("cmu"), 1.0);
}

TEST(ComputeConfidence, EqualAccuraciesAreVoteFractions) {
  const auto table = compute_confidence(
      {rec("a", "a", 0.5), rec("b", "a", 0.5), rec("c", "b", 0.5)});
  EXPECT_NEAR(table.confidence("a"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(table.confidence("b"), 1.0 / 3.0, 1e-12);
}

TEST(ComputeConfidence, SkipsAreExcluded) {
  const auto table = compute_confidence({rec("a", "x", 0.5), skipped("b", 2.0)});
  EXPECT_EQ(table.entries.size(), 1u);
  EXPECT_EQ(table.confidence("x"), 1.0);
  EXPECT_EQ(table.total_respondents, 1u);
}

TEST(ComputeConfidence, LatestRecordPerUserWins) {
  const auto table = compute_confidence(
      {rec("a", "x", 1.0, 1), rec("b", "y", 1.0, 1), rec("a", "y", 1.0, 2)});
  EXPECT_EQ(table.entries.size(), 1u);
  EXPECT_EQ(table.confidence("y"), 1.0);
}

TEST(ComputeConfidence, AllSkippedIsAnError) {
  EXPECT_THROW(compute_confidence({skipped("a", 1.0)}), EmptyTableError);
  EXPECT_THROW(compute_confidence({}), EmptyTableError);
}

TEST(ComputeConfidence, ZeroWeightsGiveUniformLowTrustTable) {
  const auto table = compute_confidence(
      {rec("a", "x", 0.0), rec("b", "y", 0.0), rec("c", "y", 0.0)});
  EXPECT_TRUE(table.low_trust);
  EXPECT_EQ(table.confidence("x"), 0.5);
  EXPECT_EQ(table.confidence("y"), 0.5);
}

TEST(ResolveRoundWinner, PicksTopAnswer) {
  const std::vector<AnswerRecord> records = {
      rec("a", "associate", .6), rec("b", "associate", .8),
      rec("c", "full", .5),      rec("d", "full", .7),
      rec("e", "full", .9)};
  const auto w = resolve_round_winner(compute_confidence(records), records);
  EXPECT_EQ(w.answer, "full");
  EXPECT_EQ(w.user_ids, (std::vector<std::string>{"c", "d", "e"}));
}

TEST(ResolveRoundWinner, SingleAnswer) {
  const std::vector<AnswerRecord> records = {rec("a", "x", 1), rec("b", "x", 2)};
  const auto w = resolve_round_winner(compute_confidence(records), records);
  EXPECT_EQ(w.answer, "x");
  EXPECT_EQ(w.user_ids.size(), 2u);
}

TEST(ResolveRoundWinner, TieGoesToSmallestAnswer) {
  const std::vector<AnswerRecord> records = {rec("a", "beta", 1.0),
                                             rec("b", "alpha", 1.0)};
  const auto w = resolve_round_winner(compute_confidence(records), records);
  EXPECT_EQ(w.answer, "alpha");
  EXPECT_EQ(w.user_ids, (std::vector<std::string>{"b"}));
}

// Property: adding a respondent to answer i raises c_i and lowers every
// other c_j. A sole answer already sits at 1 and stays there.
TEST(ComputeConfidenceProperty, AddingSupportIsMonotone) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> acc(0.05, 3.0);
  std::uniform_int_distribution<int> answer(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<AnswerRecord> records;
    const int n = 2 + trial % 10;
    for (int u = 0; u < n; ++u) {
      records.push_back(rec("u" + std::to_string(u),
                            std::string(1, static_cast<char>('a' + answer(rng))),
                            acc(rng)));
    }
    const auto before = compute_confidence(records);
    const std::string target = records[trial % n].normalized_answer;
    records.push_back(rec("extra", target, acc(rng)));
    const auto after = compute_confidence(records);
    if (before.entries.size() == 1) {
      EXPECT_EQ(after.confidence(target), 1.0);
    } else {
      EXPECT_GT(after.confidence(target), before.confidence(target));
    }
    for (const auto& [a, e] : before.entries) {
      if (a != target) EXPECT_LT(after.confidence(a), e.confidence);
    }
  }
}

TEST(ComputeConfidenceProperty, RankingIsScaleInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> acc(0.01, 2.0);
  std::uniform_real_distribution<double> lambda(0.01, 100.0);
  std::uniform_int_distribution<int> answer(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<AnswerRecord> records;
    for (int u = 0; u < 1 + trial % 15; ++u) {
      records.push_back(rec("u" + std::to_string(u),
                            std::string(1, static_cast<char>('a' + answer(rng))),
                            acc(rng)));
    }
    auto scaled = records;
    const double l = lambda(rng);
    for (auto& r : scaled) r.accuracy_at_answer *= l;
    const auto t1 = compute_confidence(records);
    const auto t2 = compute_confidence(scaled);
    for (const auto& [a, e] : t1.entries) {
      EXPECT_NEAR(t2.confidence(a), e.confidence, 1e-12);
    }
    EXPECT_EQ(resolve_round_winner(t1, records).answer,
              resolve_round_winner(t2, scaled).answer);
  }
}

}  // namespace
}  // namespace datapop
