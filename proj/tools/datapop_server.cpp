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

// Game server: serves newline-delimited JSON on --port and, optionally, the
// same messages as WebSocket text frames on --ws-port.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "datapop/net.hpp"

namespace {

using namespace datapop;

struct Flags {
  std::string kb_path;
  std::string profiles_path;
  std::string address = "127.0.0.1";
  std::uint16_t port = 7878;
  std::optional<std::uint16_t> ws_port;
  std::uint64_t seed = 0;
  std::size_t rounds = 10;
  double probe_ratio = 0.25;
  double gap_threshold = 0.7;
  double commit_threshold = 0.7;
  std::size_t min_commit_users = 3;
  std::int64_t answer_window_s = 120;
  std::size_t min_players = 2;
  std::size_t max_players = 4;
  std::string embeddings_path;
  std::string centroids_path;
  std::int64_t save_interval_s = 30;
};

void add_flags(CLI::App& app, Flags& f) {
  app.set_config("--config", "", "TOML or INI file with flag defaults")
      ->envname("DATAPOP_CONFIG");
  app.add_option("--kb", f.kb_path, "Knowledge base JSON (rewritten on save)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--profiles", f.profiles_path,
                 "Profile store JSON; created if missing")
      ->required();
  app.add_option("--host", f.address, "Listen address");
  app.add_option("--port", f.port, "Line-protocol port (0 picks one)");
  app.add_option("--ws-port", f.ws_port, "WebSocket port for browser clients");
  app.add_option("--seed", f.seed, "Seed for question selection");
  app.add_option("--rounds", f.rounds, "Rounds per game")->check(CLI::PositiveNumber);
  app.add_option("--probe-ratio", f.probe_ratio, "Share of ground-truth probes")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--gap-threshold", f.gap_threshold, "Cells below this confidence are gaps")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--commit-threshold", f.commit_threshold,
                 "Confidence needed to write an answer back")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--min-commit-users", f.min_commit_users,
                 "Distinct answerers needed before a commit");
  app.add_option("--answer-window-s", f.answer_window_s, "Answer window in seconds (max 300)")
      ->check(CLI::PositiveNumber);
  app.add_option("--min-players", f.min_players, "Players needed to start a game")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-players", f.max_players, "Lobby size limit")
      ->check(CLI::PositiveNumber);
  auto* words = app.add_option("--embeddings", f.embeddings_path, "Word vectors for setup_interests")
                    ->check(CLI::ExistingFile);
  auto* centroids = app.add_option("--centroids", f.centroids_path, "Category centroids")
                        ->check(CLI::ExistingFile);
  words->needs(centroids);
  centroids->needs(words);
  app.add_option("--save-interval-s", f.save_interval_s,
                 "How often finished games are flushed to disk")
      ->check(CLI::PositiveNumber);
}

ServerOptions server_options(const Flags& f) {
  ServerOptions o;
  o.seed = f.seed;
  o.session.rounds_total = f.rounds;
  o.session.min_players = f.min_players;
  o.session.max_players = std::max(f.max_players, f.min_players);
  o.session.query.probe_ratio = f.probe_ratio;
  o.session.query.gap_threshold = f.gap_threshold;
  o.session.commit.commit_threshold = f.commit_threshold;
  o.session.commit.min_distinct_users = f.min_commit_users;
  const Duration window = std::chrono::seconds(f.answer_window_s);
  if (window > kAnswerWindowCap) {
    std::cerr << "warning: --answer-window-s clipped to "
              << kAnswerWindowCap.count() / 1000 << "\n";
  }
  o.session.answer_window = std::min(window, kAnswerWindowCap);
  if (!f.embeddings_path.empty()) {
    o.embeddings = load_embeddings_files(f.embeddings_path, f.centroids_path);
  }
  return o;
}

class Persister {
 public:
  Persister(Stores& stores, const Flags& f) : stores_(stores), flags_(f) {}

  void save() {
    save_kb_file(stores_.kb.snapshot(), flags_.kb_path);
    save_profiles_file(stores_.profiles.snapshot(), flags_.profiles_path);
  }

 private:
  Stores& stores_;
  const Flags& flags_;
};

int serve(const Flags& f) {
  ProfileStore profiles;
  if (std::filesystem::exists(f.profiles_path)) profiles = load_profiles_file(f.profiles_path);
  Stores stores(load_kb_file(f.kb_path), std::move(profiles));
  ServerCore core(stores, server_options(f));
  Persister persister(stores, f);

  bool dirty = false;
  core.sessions().on_game_finished([&dirty](const GameSession&) { dirty = true; });

  net::asio::io_context io;
  net::ListenOptions listen;
  listen.address = f.address;
  listen.line_port = f.port;
  listen.ws_port = f.ws_port;
  net::Server server(io, core, listen);
  server.start();

  std::cout << "listening on " << f.address << ":" << server.line_port();
  if (server.ws_port()) std::cout << " (websocket " << *server.ws_port() << ")";
  std::cout << std::endl;

  net::asio::steady_timer flush(io);
  std::function<void()> schedule_flush = [&] {
    flush.expires_after(std::chrono::seconds(f.save_interval_s));
    flush.async_wait([&](net::beast::error_code ec) {
      if (ec) return;
      if (dirty) {
        dirty = false;
        try {
          persister.save();
        } catch (const Error& e) {
          std::cerr << "save failed: " << e.what() << "\n";
        }
      }
      schedule_flush();
    });
  };
  schedule_flush();

  net::asio::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](net::beast::error_code, int) {
    std::cout << "shutting down" << std::endl;
    flush.cancel();
    server.stop();
  });

  io.run();
  persister.save();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DataPop game server"};
  Flags flags;
  add_flags(app, flags);
  CLI11_PARSE(app, argc, argv);
  try {
    return serve(flags);
  } catch (const datapop::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 2;
  }
}
