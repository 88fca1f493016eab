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

#include "datapop/sim.hpp"

namespace datapop {
namespace {

const std::string kDataDir = DATAPOP_DATA_DIR;

SimPlayer player(double reliability, double skip = 0.0, double drop = 0.0) {
  SimPlayer p;
  p.user_id = "p";
  p.reliability = reliability;
  p.skip_prob = skip;
  p.drop_prob = drop;
  return p;
}

const std::vector<std::string> kDecoys = {"assistant", "associate", "full"};

TEST(SimulateAnswer, PerfectPlayerAlwaysRight) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto a = simulate_answer(player(1.0), "full", kDecoys, SlotType::kText, rng);
    ASSERT_TRUE(std::holds_alternative<AnswerAction>(a));
    EXPECT_EQ(std::get<AnswerAction>(a).text, "full");
  }
}

TEST(SimulateAnswer, ZeroReliabilityAlwaysDecoy) {
  Rng rng(2);
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto a = simulate_answer(player(0.0), "Full", kDecoys, SlotType::kText, rng);
    ASSERT_TRUE(std::holds_alternative<AnswerAction>(a));
    seen.insert(std::get<AnswerAction>(a).text);
  }
  // "full" folds to the truth and is never used as a decoy.
  EXPECT_EQ(seen, (std::set<std::string>{"assistant", "associate"}));
}

TEST(SimulateAnswer, NoUsableDecoy) {
  Rng rng(3);
  const auto a = simulate_answer(player(0.0), "full", {"FULL"}, SlotType::kText, rng);
  EXPECT_EQ(std::get<AnswerAction>(a).text, "unknown");
}

TEST(SimulateAnswer, ReliabilityFrequency) {
  Rng rng(4);
  int correct = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = simulate_answer(player(0.8), "full", kDecoys, SlotType::kText, rng);
    correct += std::get<AnswerAction>(a).text == "full";
  }
  EXPECT_NEAR(correct / 10000.0, 0.8, 0.01);
}

TEST(SimulateAnswer, SkipAndDrop) {
  Rng rng(5);
  int skips = 0;
  int silences = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = simulate_answer(player(1.0, 0.3, 0.1), "full", kDecoys, SlotType::kText, rng);
    skips += std::holds_alternative<SkipAction>(a);
    silences += std::holds_alternative<SilenceAction>(a);
  }
  EXPECT_NEAR(silences / 10000.0, 0.1, 0.01);
  EXPECT_NEAR(skips / 10000.0, 0.9 * 0.3, 0.015);
}

TEST(Fixtures, LoadFromFiles) {
  const auto f = load_fixture_file(kDataDir + "/sim_fixture.json");
  EXPECT_EQ(f.truth.at({"r1", "rank"}), "assistant");
  EXPECT_EQ(f.truth.at({"r2", "affiliation"}), "MIT");  // defaults to stored values
  EXPECT_EQ(f.decoys.at("rank").size(), 3u);
  const auto roster = load_players_file(kDataDir + "/players.json");
  ASSERT_EQ(roster.size(), 4u);
  EXPECT_EQ(roster[0].latency.min, Duration{300});
  EXPECT_EQ(roster[2].latency.max, Duration{1500});
}

TEST(Fixtures, RosterValidation) {
  EXPECT_THROW(players_from_json(Json::parse(R"({"players":[{"user_id":"a","reliability":1.5}]})")),
               ValidationError);
  EXPECT_THROW(players_from_json(Json::parse(
                   R"({"players":[{"user_id":"a","reliability":1,"latency_ms":{"min":5,"max":1}}]})")),
               ValidationError);
  EXPECT_THROW(players_from_json(Json::parse(R"({"players":[{"reliability":1}]})")), ParseError);
}

TEST(SyntheticFixture, Shape) {
  const auto f = make_synthetic_fixture(50, 0.4, 7);
  EXPECT_EQ(f.kb.rows.size(), 50u);
  EXPECT_EQ(f.truth.size(), 200u);
  std::size_t known = 0;
  for (const auto& r : f.kb.rows) known += r.cells.size();
  EXPECT_EQ(known, 120u);
  EXPECT_EQ(save_kb(make_synthetic_fixture(50, 0.4, 7).kb), save_kb(f.kb));
}

// One row whose rank is the only gap; no probes exist.
SimFixture single_gap() {
  SimFixture f;
  f.kb.categories = {"c"};
  f.kb.columns = {{"rank", SlotType::kText, 0.5, 0}};
  f.kb.templates = {{"What is the {Column Name} of {Entity Name}?", "rank", SlotType::kText}};
  f.kb.rows.push_back({"r1", "Jeremy Gibson", "c", {}});
  f.truth[{"r1", "rank"}] = "Associate";
  f.decoys["rank"] = kDecoys;
  return f;
}

SimConfig single_gap_config() {
  SimConfig c;
  c.fixture = single_gap();
  c.roster = {player(1.0), player(1.0)};
  c.roster[0].user_id = "a";
  c.roster[1].user_id = "b";
  c.games = 1;
  c.seed = 11;
  c.session.commit = {0.7, 2};
  return c;
}

TEST(RunSimulation, PerfectPairCommitsTheGap) {
  const auto report = run_simulation(single_gap_config());
  EXPECT_EQ(report.games_played, 1u);
  EXPECT_EQ(report.cells_committed, 1u);
  EXPECT_EQ(report.committed_correct_fraction, 1.0);
  const Cell* cell = report.final_kb.find_cell({"r1", "rank"});
  ASSERT_NE(cell, nullptr);
  EXPECT_EQ(cell->value, "associate");
  EXPECT_EQ(cell->confidence, 1.0);
}

TEST(RunSimulation, SameSeedSameDigest) {
  SimConfig c;
  c.fixture = load_fixture_file(kDataDir + "/sim_fixture.json");
  c.roster = load_players_file(kDataDir + "/players.json");
  c.games = 3;
  c.seed = 5;
  const auto a = run_simulation(c);
  const auto b = run_simulation(c);
  EXPECT_EQ(a.transcript_digest, b.transcript_digest);
  EXPECT_EQ(a.transcript_messages, b.transcript_messages);
  EXPECT_GT(a.transcript_messages, 0u);
  EXPECT_EQ(a.games_played, 3u);
  c.seed = 6;
  EXPECT_NE(run_simulation(c).transcript_digest, a.transcript_digest);
}

TEST(RunSimulation, UnknownCategoryIsAConfigError) {
  SimConfig c = single_gap_config();
  c.categories = {"nope"};
  EXPECT_THROW(run_simulation(c), ConfigError);
}

TEST(RunSimulation, AccuracyTrajectoryReplays) {
  SimConfig c;
  c.fixture = make_synthetic_fixture(20, 0.3, 3, 2);
  c.roster = make_roster(6, 0.7);
  c.games = 6;
  c.seed = 8;
  c.session.query.probe_ratio = 0.5;
  const auto report = run_simulation(c);
  ASSERT_FALSE(report.probe_log.empty());
  std::map<std::string, double> replay;
  for (const auto& p : c.roster) replay[p.user_id] = kInitialAccuracy;
  for (const auto& e : report.probe_log) {
    if (e.correct) replay[e.user_id] += e.difficulty;
  }
  for (const auto& [user, trajectory] : report.accuracy_trajectory) {
    ASSERT_FALSE(trajectory.empty());
    EXPECT_EQ(trajectory.front(), kInitialAccuracy);
    EXPECT_TRUE(std::is_sorted(trajectory.begin(), trajectory.end())) << user;
    EXPECT_DOUBLE_EQ(trajectory.back(), replay.at(user)) << user;
  }
}

TEST(SimReport, Json) {
  const auto j = run_simulation(single_gap_config()).to_json();
  EXPECT_EQ(j.at("games_played"), 1);
  EXPECT_EQ(j.at("committed_correct_fraction"), 1.0);
  EXPECT_EQ(j.at("transcript_digest").get<std::string>().size(), 16u);
}

}  // namespace
}  // namespace datapop
