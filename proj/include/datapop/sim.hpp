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

// Deterministic simulated players.
//
// Simulated clients talk to a ServerCore purely through encoded protocol
// lines over a shared virtual clock. The harness knows the hidden truth for
// every cell; it uses that to pick answers and to grade what the server
// eventually commits. Nothing here mutates server state directly.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/json_util.hpp"
#include "datapop/kb.hpp"
#include "datapop/protocol.hpp"
#include "datapop/query_gen.hpp"
#include "datapop/server_core.hpp"
#include "datapop/session.hpp"

namespace datapop {

struct LatencyModel {
  Duration min{200};
  Duration max{1'500};
};

struct SimPlayer {
  std::string user_id;
  double reliability = 1.0;
  LatencyModel latency;
  double skip_prob = 0.0;
  double drop_prob = 0.0;
};

struct AnswerAction {
  std::string text;
};
struct SkipAction {};
struct SilenceAction {};
using ClientAction = std::variant<AnswerAction, SkipAction, SilenceAction>;

// Silence with drop_prob; otherwise skip with skip_prob; otherwise the true
// answer with probability `reliability`, else a decoy. Decoys equal to the
// truth after normalization are never used.
template <typename URBG>
ClientAction simulate_answer(const SimPlayer& player, const std::string& truth,
                             const std::vector<std::string>& decoys,
                             SlotType slot, URBG& rng) {
  std::bernoulli_distribution drop(std::clamp(player.drop_prob, 0.0, 1.0));
  std::bernoulli_distribution skip(std::clamp(player.skip_prob, 0.0, 1.0));
  std::bernoulli_distribution correct(std::clamp(player.reliability, 0.0, 1.0));
  if (drop(rng)) return SilenceAction{};
  if (skip(rng)) return SkipAction{};
  if (correct(rng)) return AnswerAction{truth};
  const std::string canonical_truth = normalize_or_fold(truth, slot);
  std::vector<const std::string*> wrong;
  for (const auto& d : decoys) {
    if (normalize_or_fold(d, slot) != canonical_truth) wrong.push_back(&d);
  }
  if (wrong.empty()) return AnswerAction{"unknown"};
  return AnswerAction{*wrong[uniform_index(wrong.size(), rng)]};
}

// Knowledge base as the server sees it, plus what only the harness knows.
struct SimFixture {
  KnowledgeBase kb;
  std::map<CellRef, std::string> truth;
  std::map<std::string, std::vector<std::string>> decoys;  // per column
};

inline SimFixture fixture_from_json(const Json& doc) {
  using namespace json_util;
  SimFixture f;
  f.kb = kb_from_json(field(doc, "kb", "fixture"));
  for (const auto& r : f.kb.rows) {
    for (const auto& [column, cell] : r.cells) {
      if (cell.value) f.truth[{r.id, column}] = *cell.value;
    }
  }
  if (doc.contains("truth")) {
    const auto& truth = doc.at("truth");
    if (!truth.is_object()) throw ParseError("fixture.truth: expected object");
    for (const auto& [row, columns] : truth.items()) {
      if (!columns.is_object()) {
        throw ParseError("fixture.truth." + row + ": expected object");
      }
      for (const auto& [column, value] : columns.items()) {
        f.truth[{row, column}] =
            as_string(value, "fixture.truth." + row + "." + column);
      }
    }
  }
  if (doc.contains("decoys")) {
    const auto& decoys = doc.at("decoys");
    if (!decoys.is_object()) throw ParseError("fixture.decoys: expected object");
    for (const auto& [column, list] : decoys.items()) {
      const std::string p = "fixture.decoys." + column;
      for (std::size_t i = 0; i < as_array(list, p).size(); ++i) {
        f.decoys[column].push_back(as_string(list[i], p + "[" + std::to_string(i) + "]"));
      }
    }
  }
  return f;
}

inline SimFixture load_fixture_file(const std::string& path) {
  return fixture_from_json(
      json_util::parse_document(json_util::read_file(path), "fixture"));
}

inline std::vector<SimPlayer> players_from_json(const Json& doc) {
  using namespace json_util;
  std::vector<SimPlayer> out;
  const auto& players = as_array(field(doc, "players", "roster"), "roster.players");
  for (std::size_t i = 0; i < players.size(); ++i) {
    const std::string p = "roster.players[" + std::to_string(i) + "]";
    const auto& j = players[i];
    SimPlayer sp;
    sp.user_id = as_string(field(j, "user_id", p), p + ".user_id");
    sp.reliability = as_number(field(j, "reliability", p), p + ".reliability");
    if (j.contains("skip_prob")) sp.skip_prob = as_number(j.at("skip_prob"), p + ".skip_prob");
    if (j.contains("drop_prob")) sp.drop_prob = as_number(j.at("drop_prob"), p + ".drop_prob");
    if (j.contains("latency_ms")) {
      const auto& l = j.at("latency_ms");
      sp.latency.min = Duration{as_int(field(l, "min", p + ".latency_ms"), p + ".latency_ms.min")};
      sp.latency.max = Duration{as_int(field(l, "max", p + ".latency_ms"), p + ".latency_ms.max")};
    }
    for (double x : {sp.reliability, sp.skip_prob, sp.drop_prob}) {
      if (!(x >= 0.0 && x <= 1.0)) throw ValidationError(p + ": fraction outside [0,1]");
    }
    if (sp.latency.min < Duration{0} || sp.latency.max < sp.latency.min) {
      throw ValidationError(p + ".latency_ms: need 0 <= min <= max");
    }
    out.push_back(std::move(sp));
  }
  return out;
}

inline std::vector<SimPlayer> load_players_file(const std::string& path) {
  return players_from_json(
      json_util::parse_document(json_util::read_file(path), "roster"));
}

// Synthetic people knowledge base: `rows` entities over four typed columns,
// spread across `categories` categories, with `gap_fraction` of the cells
// withheld from the server. Known cells are flagged ground truth.
inline SimFixture make_synthetic_fixture(std::size_t rows, double gap_fraction,
                                         std::uint64_t seed,
                                         std::size_t categories = 5) {
  Rng rng(seed);
  SimFixture f;
  f.kb.columns = {
      {"rank", SlotType::kText, 0.4, 0},
      {"affiliation", SlotType::kOrganization, 0.6, 0},
      {"year_joined", SlotType::kDate, 0.8, 1},
      {"office", SlotType::kNumber, 0.2, 2},
  };
  f.kb.templates = {
      {"What is the {Column Name} of {Entity Name}?", "rank", SlotType::kText},
      {"Which organization is {Entity Name} affiliated with?", "affiliation",
       SlotType::kOrganization},
      {"In what year did {Entity Name} join?", "year_joined", SlotType::kDate},
      {"What is the {Column Name} number of {Entity Name}?", "office",
       SlotType::kNumber},
  };
  const std::vector<std::string> ranks = {"assistant", "associate", "full", "emeritus"};
  const std::vector<std::string> orgs = {"CMU", "MIT", "Stanford", "Berkeley",
                                         "Oklahoma", "Toronto"};
  f.decoys = {
      {"rank", {"assistant", "associate", "full"}},
      {"affiliation", {"CMU", "MIT", "Stanford"}},
      {"year_joined", {"2005", "2011", "2016"}},
      {"office", {"101", "202", "303"}},
  };
  for (std::size_t c = 0; c < categories; ++c) {
    f.kb.categories.insert("cat" + std::to_string(c));
  }
  std::vector<CellRef> cells;
  for (std::size_t i = 0; i < rows; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "p%03zu", i);
    Row r;
    r.id = id;
    r.entity_name = "Person " + std::to_string(i);
    r.category = "cat" + std::to_string(i % categories);
    f.truth[{r.id, "rank"}] = ranks[uniform_index(ranks.size(), rng)];
    f.truth[{r.id, "affiliation"}] = orgs[uniform_index(orgs.size(), rng)];
    f.truth[{r.id, "year_joined"}] =
        std::to_string(std::uniform_int_distribution<int>(1995, 2020)(rng));
    f.truth[{r.id, "office"}] =
        std::to_string(std::uniform_int_distribution<int>(100, 399)(rng));
    for (const auto& col : f.kb.columns) cells.push_back({r.id, col.name});
    f.kb.rows.push_back(std::move(r));
  }
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto gaps = static_cast<std::size_t>(
      gap_fraction * static_cast<double>(cells.size()) + 0.5);
  for (std::size_t i = gaps; i < cells.size(); ++i) {
    Row* r = f.kb.find_row(cells[i].row_id);
    Cell& cell = r->cells[cells[i].column];
    cell.value = normalize_or_fold(f.truth.at(cells[i]),
                                   f.kb.column(cells[i].column).slot_type);
    cell.confidence = 1.0;
    cell.ground_truth = true;
  }
  return f;
}

// Roster with reliabilities spread evenly over [mean - spread, mean + spread].
inline std::vector<SimPlayer> make_roster(std::size_t n, double mean_reliability,
                                          double spread = 0.1,
                                          double skip_prob = 0.05,
                                          double drop_prob = 0.02) {
  std::vector<SimPlayer> roster;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
    SimPlayer p;
    char id[32];
    std::snprintf(id, sizeof id, "u%02zu", i);
    p.user_id = id;
    p.reliability = std::clamp(mean_reliability + spread * t, 0.0, 1.0);
    p.skip_prob = skip_prob;
    p.drop_prob = drop_prob;
    roster.push_back(p);
  }
  return roster;
}

// Client side of one connection: stamps seq numbers and sends encoded lines.
class WireClient {
 public:
  WireClient(ServerCore& server, Timestamp now)
      : server_(&server), id_(server.connect(now)) {}

  ConnectionId id() const { return id_; }

  std::vector<Delivery> send(Message msg, Timestamp now) {
    msg.seq = ++seq_;
    return server_->handle_line(id_, encode_message(msg), now);
  }

 private:
  ServerCore* server_;
  ConnectionId id_;
  std::uint64_t seq_ = 0;
};

// 64-bit FNV-1a, used as an order-sensitive transcript digest.
class TranscriptDigest {
 public:
  void add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
    ++count_;
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
  }
  std::size_t count() const { return count_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::size_t count_ = 0;
};

struct SimConfig {
  SimFixture fixture;
  std::vector<SimPlayer> roster;
  std::size_t games = 1;
  std::uint64_t seed = 0;
  SessionConfig session = compressed_session();
  Duration step{100};
  Timestamp start{1'000'000};
  // Restricts play to these categories; empty means every category.
  std::vector<std::string> categories;

  // Answer window and pauses scaled down for virtual-time runs.
  static SessionConfig compressed_session() {
    SessionConfig s;
    s.answer_window = Duration{2'000};
    s.extension_step = Duration{1'000};
    s.reveal_pause = Duration{500};
    return s;
  }
};

struct ProbeEvent {
  std::string user_id;
  bool correct = false;
  double difficulty = 0.0;
};

struct SimReport {
  std::size_t games_played = 0;
  std::size_t rounds_played = 0;
  std::size_t cells_committed = 0;
  std::size_t committed_correct = 0;
  std::optional<double> committed_correct_fraction;
  // Accuracy reported to each user: on welcome and after each game.
  std::map<std::string, std::vector<double>> accuracy_trajectory;
  std::vector<ProbeEvent> probe_log;  // server-side verdicts, in order
  std::string transcript_digest;
  std::size_t transcript_messages = 0;
  Timestamp finished_at{0};
  KnowledgeBase final_kb;

  Json to_json() const {
    Json j;
    j["games_played"] = games_played;
    j["rounds_played"] = rounds_played;
    j["cells_committed"] = cells_committed;
    j["committed_correct"] = committed_correct;
    j["committed_correct_fraction"] =
        committed_correct_fraction ? Json(*committed_correct_fraction) : Json(nullptr);
    j["accuracy_trajectory"] = accuracy_trajectory;
    j["transcript_digest"] = transcript_digest;
    j["transcript_messages"] = transcript_messages;
    j["virtual_duration_ms"] = finished_at.count();
    return j;
  }
};

class Simulation {
 public:
  explicit Simulation(SimConfig config)
      : config_(std::move(config)),
        stores_(config_.fixture.kb, ProfileStore{}),
        server_(stores_, server_options(config_)) {
    std::seed_seq seq{config_.seed, std::uint64_t{0x5eed}};
    rng_.seed(seq);
    for (const auto& c : config_.categories) {
      if (!config_.fixture.kb.has_category(c)) {
        throw ConfigError("unknown category '" + c + "'");
      }
    }
    playable_ = config_.categories.empty()
                    ? std::vector<std::string>(config_.fixture.kb.categories.begin(),
                                               config_.fixture.kb.categories.end())
                    : config_.categories;
    server_.on_reveal([this](const RevealReport& r) { observe(r); });
  }

  SimReport run() {
    Timestamp now = config_.start;
    for (const auto& p : config_.roster) {
      clients_.push_back(Client{p, WireClient(server_, now), Timestamp{0}, false, {}, {}});
    }
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      Json hello = {{"user_id", clients_[i].player.user_id}};
      send(i, make_message(MessageType::kHello, hello), now);
    }
    const Timestamp limit =
        now + Duration{static_cast<std::int64_t>(config_.games + 1) *
                       static_cast<std::int64_t>(config_.session.rounds_total + 1) *
                       (config_.session.cap() + config_.session.reveal_pause).count() * 4};
    while (games_ended_.size() < config_.games) {
      if (now > limit) throw Error("simulation did not finish in virtual time");
      run_due_actions(now);
      route(server_.tick(now), now);
      for (std::size_t i = 0; i < clients_.size(); ++i) maybe_join(i, now);
      for (std::size_t i = 0; i < clients_.size(); ++i) {
        if (now - clients_[i].last_sent >= Duration{10'000}) {
          send(i, make_message(MessageType::kPing), now);
        }
      }
      now += config_.step;
    }
    // Let final score replies arrive.
    run_due_actions(now);

    report_.games_played = games_ended_.size();
    report_.transcript_digest = digest_.hex();
    report_.transcript_messages = digest_.count();
    report_.finished_at = now - config_.start;
    report_.final_kb = stores_.kb.snapshot();
    grade();
    return report_;
  }

  ServerCore& server() { return server_; }

 private:
  struct Scheduled {
    Timestamp at;
    Message message;
  };

  static ServerOptions server_options(const SimConfig& config) {
    ServerOptions options;
    options.session = config.session;
    options.seed = config.seed;
    return options;
  }

  struct Client {
    SimPlayer player;
    WireClient wire;
    Timestamp last_sent{0};
    bool welcomed = false;
    std::optional<std::string> session_id;
    std::vector<Scheduled> queue;
  };

  void send(std::size_t i, Message msg, Timestamp now) {
    clients_[i].last_sent = now;
    route(clients_[i].wire.send(std::move(msg), now), now);
  }

  void run_due_actions(Timestamp now) {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      auto& q = clients_[i].queue;
      std::vector<Scheduled> due;
      for (auto it = q.begin(); it != q.end();) {
        if (it->at <= now) {
          due.push_back(std::move(*it));
          it = q.erase(it);
        } else {
          ++it;
        }
      }
      for (auto& s : due) send(i, std::move(s.message), now);
    }
  }

  std::optional<std::size_t> client_for(ConnectionId id) const {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      if (clients_[i].wire.id() == id) return i;
    }
    return std::nullopt;
  }

  void route(const std::vector<Delivery>& deliveries, Timestamp now) {
    for (const auto& d : deliveries) {
      const std::string line = encode_message(d.message);
      digest_.add(std::to_string(d.connection) + ":" + line);
      const auto i = client_for(d.connection);
      if (!i) continue;
      receive(*i, decode_message(line, Direction::kServerToClient), now);
    }
  }

  void receive(std::size_t i, const Message& msg, Timestamp now) {
    Client& c = clients_[i];
    const Json& p = msg.payload;
    switch (msg.type) {
      case MessageType::kWelcome:
        c.welcomed = true;
        report_.accuracy_trajectory[c.player.user_id].push_back(
            p.at("accuracy").get<double>());
        break;
      case MessageType::kLobby: {
        c.session_id = *msg.session_id;
        lobbies_[*msg.session_id] = p.at("players").size();
        break;
      }
      case MessageType::kRoundStart:
        lobbies_.erase(*msg.session_id);
        answer_round(i, msg, now);
        break;
      case MessageType::kGameEnd:
        games_ended_.insert(*msg.session_id);
        c.session_id.reset();
        c.queue.clear();
        c.queue.push_back({now, make_message(MessageType::kScoreQuery)});
        break;
      case MessageType::kScore:
        report_.accuracy_trajectory[c.player.user_id].push_back(
            p.at("accuracy").get<double>());
        break;
      case MessageType::kError:
        if (joining_ == i) join_failed_ = p.at("reason").get<std::string>();
        break;
      default:
        break;
    }
  }

  void answer_round(std::size_t i, const Message& msg, Timestamp now) {
    Client& c = clients_[i];
    const std::string text = msg.payload.at("question_text").get<std::string>();
    const SlotType slot =
        parse_slot_type(msg.payload.at("answer_slot").get<std::string>());
    const auto target = locate(text);
    if (!target) throw Error("harness cannot place question '" + text + "'");
    const auto truth_it = config_.fixture.truth.find(*target);
    if (truth_it == config_.fixture.truth.end()) {
      throw ConfigError("fixture has no hidden truth for " + target->row_id + "/" +
                        target->column);
    }
    static const std::vector<std::string> kNoDecoys;
    auto d = config_.fixture.decoys.find(target->column);
    const auto& decoys = d == config_.fixture.decoys.end() ? kNoDecoys : d->second;
    const ClientAction action = simulate_answer(c.player, truth_it->second, decoys, slot, rng_);
    std::uniform_int_distribution<std::int64_t> latency(c.player.latency.min.count(),
                                                        c.player.latency.max.count());
    const Timestamp at = now + Duration{latency(rng_)};
    const std::string question_id = msg.payload.at("question_id").get<std::string>();
    if (const auto* a = std::get_if<AnswerAction>(&action)) {
      c.queue.push_back({at, make_message(MessageType::kAnswer,
                                          {{"question_id", question_id}, {"text", a->text}},
                                          msg.session_id)});
    } else if (std::holds_alternative<SkipAction>(action)) {
      c.queue.push_back({at, make_message(MessageType::kSkip,
                                          {{"question_id", question_id}},
                                          msg.session_id)});
    }
  }

  // Finds the cell a question was generated from by re-instantiating the
  // fixture's templates. Reads the server's knowledge base (never writes it)
  // because {Column Value} depends on current cell values.
  std::optional<CellRef> locate(const std::string& text) {
    return stores_.kb.read([&](const KnowledgeBase& kb) -> std::optional<CellRef> {
      for (const auto& r : kb.rows) {
        for (const auto& t : kb.templates) {
          const Cell* cell = r.find_cell(t.target_column);
          const auto value = cell ? cell->value : std::nullopt;
          if (t.pattern.find("{Column Value}") != std::string::npos && !value) continue;
          if (instantiate_template(t, r, kb.column(t.target_column), value) == text) {
            return CellRef{r.id, t.target_column};
          }
        }
      }
      return std::nullopt;
    });
  }

  void maybe_join(std::size_t i, Timestamp now) {
    Client& c = clients_[i];
    if (!c.welcomed || c.session_id || !c.queue.empty() || playable_.empty()) return;
    // Prefer filling a lobby that is already open.
    std::string category;
    for (const auto& [sid, count] : lobbies_) {
      if (count < config_.session.max_players) {
        category = lobby_category_.at(sid);
        break;
      }
    }
    if (category.empty()) {
      if (sessions_opened_.size() >= config_.games) return;
      category = playable_[uniform_index(playable_.size(), rng_)];
    }
    joining_ = i;
    join_failed_.reset();
    send(i, make_message(MessageType::kJoin, {{"category", category}}), now);
    joining_.reset();
    if (join_failed_) {
      std::erase(playable_, category);
      return;
    }
    if (c.session_id) {
      sessions_opened_.insert(*c.session_id);
      lobby_category_[*c.session_id] = category;
    }
  }

  void observe(const RevealReport& r) {
    ++report_.rounds_played;
    for (const auto& v : r.probe_verdicts) {
      report_.probe_log.push_back({v.user_id, v.correct, v.difficulty});
    }
    if (r.commit && r.commit->committed) committed_.insert(r.target);
  }

  void grade() {
    report_.cells_committed = committed_.size();
    if (committed_.empty()) return;
    std::size_t known = 0;
    for (const auto& ref : committed_) {
      auto truth = config_.fixture.truth.find(ref);
      if (truth == config_.fixture.truth.end()) continue;
      ++known;
      const SlotType slot = report_.final_kb.column(ref.column).slot_type;
      const Cell* cell = report_.final_kb.find_cell(ref);
      if (cell && cell->value &&
          *cell->value == normalize_or_fold(truth->second, slot)) {
        ++report_.committed_correct;
      }
    }
    if (known == committed_.size()) {
      report_.committed_correct_fraction =
          static_cast<double>(report_.committed_correct) /
          static_cast<double>(known);
    }
  }

  SimConfig config_;
  Stores stores_;
  ServerCore server_;
  Rng rng_;
  std::vector<Client> clients_;
  std::vector<std::string> playable_;
  std::map<std::string, std::size_t> lobbies_;  // open lobby -> player count
  std::map<std::string, std::string> lobby_category_;
  std::set<std::string> sessions_opened_;
  std::set<std::string> games_ended_;
  std::set<CellRef> committed_;
  std::optional<std::size_t> joining_;
  std::optional<std::string> join_failed_;
  TranscriptDigest digest_;
  SimReport report_;
};

inline SimReport run_simulation(SimConfig config) {
  return Simulation(std::move(config)).run();
}

}  // namespace datapop
