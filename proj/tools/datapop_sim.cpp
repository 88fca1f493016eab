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

// Plays scripted games against an in-process server on a virtual clock and
// writes a JSON report.

#include <CLI11.hpp>

#include <iostream>

#include "datapop/sim.hpp"

int main(int argc, char** argv) {
  using namespace datapop;
  CLI::App app{"DataPop simulated-client harness"};
  std::string fixture_path;
  std::string players_path;
  std::string out_path;
  std::string kb_out_path;
  SimConfig config;
  app.add_option("--fixture", fixture_path, "KB plus hidden truth and decoys")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--players", players_path, "Player roster")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--games", config.games, "Games to play")->check(CLI::PositiveNumber);
  app.add_option("--seed", config.seed, "Seed for server and clients");
  app.add_option("--out", out_path, "Report path; '-' for stdout")->required();
  app.add_option("--kb-out", kb_out_path, "Also write the final knowledge base here");
  app.add_option("--rounds", config.session.rounds_total, "Rounds per game")
      ->check(CLI::PositiveNumber);
  app.add_option("--probe-ratio", config.session.query.probe_ratio)
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--category", config.categories, "Restrict play to these categories");
  CLI11_PARSE(app, argc, argv);

  try {
    config.fixture = load_fixture_file(fixture_path);
    config.roster = load_players_file(players_path);
    const SimReport report = run_simulation(config);
    const std::string text = report.to_json().dump(2) + "\n";
    if (out_path == "-") {
      std::cout << text;
    } else {
      json_util::write_file(out_path, text);
    }
    if (!kb_out_path.empty()) save_kb_file(report.final_kb, kb_out_path);
    std::cerr << report.games_played << " games, " << report.rounds_played << " rounds, "
              << report.cells_committed << " commits, digest " << report.transcript_digest
              << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
