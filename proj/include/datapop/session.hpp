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

// Synchronized multiplayer game sessions.
//
// A session moves Lobby -> InRound -> Reveal -> (InRound | Finished). Every
// player gets the same question each round. A round closes as soon as all
// players have answered or skipped, or once every remaining player's
// deadline has passed. Closing a round aggregates the answers, scores
// probes, feeds candidates back into the knowledge base and awards round
// points. Time is always passed in, never read from a clock.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/guarded.hpp"
#include "datapop/kb.hpp"
#include "datapop/profiles.hpp"
#include "datapop/query_gen.hpp"
#include "datapop/scoring.hpp"

namespace datapop {

enum class SessionState { kLobby, kInRound, kReveal, kFinished };

inline std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::kLobby: return "Lobby";
    case SessionState::kInRound: return "InRound";
    case SessionState::kReveal: return "Reveal";
    case SessionState::kFinished: return "Finished";
  }
  return "?";
}

inline bool is_allowed_transition(SessionState from, SessionState to) {
  using S = SessionState;
  return (from == S::kLobby && to == S::kInRound) ||
         (from == S::kInRound && to == S::kReveal) ||
         (from == S::kReveal && to == S::kInRound) ||
         (from == S::kReveal && to == S::kFinished);
}

// Hard ceiling on any player's answer window, extensions included.
inline constexpr Duration kAnswerWindowCap{300'000};

struct SessionConfig {
  std::size_t rounds_total = 10;
  std::size_t min_players = 2;
  std::size_t max_players = 4;
  Duration answer_window{120'000};
  Duration window_cap = kAnswerWindowCap;
  Duration extension_step{60'000};
  Duration reveal_pause{5'000};
  double round_points_factor = 10.0;  // winners get factor * difficulty
  QueryConfig query;
  CommitPolicy commit;

  Duration base_window() const {
    return std::min({answer_window, window_cap, kAnswerWindowCap});
  }
  Duration cap() const { return std::min(window_cap, kAnswerWindowCap); }
};

// Knowledge base and profiles shared by every session.
class Stores {
 public:
  Stores(KnowledgeBase kb, ProfileStore profiles)
      : kb(std::move(kb)), profiles(std::move(profiles)) {}

  Guarded<KnowledgeBase> kb;
  Guarded<ProfileStore> profiles;
};

struct Round {
  std::size_t number = 0;  // 1-based
  GeneratedQuery query;
  Timestamp started_at{0};
  Timestamp deadline{0};  // base deadline shared by all players
  std::map<std::string, AnswerRecord> responses;
  std::map<std::string, Duration> extensions;
  std::set<std::string> unanswered;

  Duration extension(const std::string& user) const {
    auto it = extensions.find(user);
    return it == extensions.end() ? Duration{0} : it->second;
  }
  Timestamp deadline_for(const std::string& user) const {
    return deadline + extension(user);
  }
  Duration window_for(const std::string& user) const {
    return deadline_for(user) - started_at;
  }
  bool settled(const std::string& user) const {
    return responses.count(user) > 0 || unanswered.count(user) > 0;
  }
};

struct ProbeVerdict {
  std::string user_id;
  bool correct = false;
  double difficulty = 0.0;
  double accuracy_after = 0.0;
};

struct PlayerAnswer {
  std::string user_id;
  std::optional<std::string> answer;  // nullopt when skipped or silent
};

struct RevealReport {
  std::string session_id;
  std::size_t round = 0;
  std::string question_id;
  std::string question_text;
  std::vector<PlayerAnswer> answers;  // join order
  ConfidenceTable table;              // empty when nobody answered
  std::vector<std::string> winners;
  std::optional<std::string> winning_answer;
  double points_per_winner = 0.0;
  std::vector<std::pair<std::string, double>> points;  // session totals

  // Server-side only; never sent to players.
  CellRef target;
  bool is_probe = false;
  std::vector<ProbeVerdict> probe_verdicts;
  std::optional<CommitOutcome> commit;
};

struct Standing {
  std::string user_id;
  double points = 0.0;
  double accuracy = 0.0;
};

struct FinalReport {
  std::string session_id;
  std::vector<Standing> ranking;  // best first
  std::string winner;
  std::map<std::string, std::vector<std::string>> badges_awarded;
  bool aborted = false;
};

struct RoundStartEvent {
  std::string session_id;
  std::size_t round = 0;
  std::string question_id;
  std::string question_text;
  SlotType answer_slot = SlotType::kText;
  Timestamp deadline{0};
};

struct RevealEvent {
  RevealReport report;
};

struct GameEndEvent {
  FinalReport report;
};

using SessionEvent = std::variant<RoundStartEvent, RevealEvent, GameEndEvent>;

// An event and the players it goes to.
struct Broadcast {
  std::vector<std::string> recipients;
  SessionEvent event;
};

class GameSession {
 public:
  GameSession(std::string id, std::string category, SessionConfig config,
              std::uint64_t seed)
      : id_(std::move(id)),
        category_(std::move(category)),
        config_(std::move(config)),
        seed_(seed),
        rng_(seed) {}

  const std::string& id() const { return id_; }
  const std::string& category() const { return category_; }
  const SessionConfig& config() const { return config_; }
  SessionState state() const { return state_; }
  const std::vector<std::string>& players() const { return players_; }
  std::size_t rounds_played() const { return rounds_played_; }
  std::size_t rounds_total() const { return config_.rounds_total; }
  const std::optional<Round>& round() const { return round_; }
  bool aborted() const { return aborted_; }
  std::uint64_t rng_seed() const { return seed_; }
  const std::vector<std::pair<SessionState, SessionState>>& transitions()
      const {
    return transitions_;
  }

  bool has_player(const std::string& user) const {
    return std::find(players_.begin(), players_.end(), user) != players_.end();
  }

  double points(const std::string& user) const {
    auto it = points_.find(user);
    return it == points_.end() ? 0.0 : it->second;
  }

  bool is_full() const { return players_.size() >= config_.max_players; }

  void add_player(const std::string& user) {
    if (state_ != SessionState::kLobby) {
      throw StateError("session " + id_ + " is no longer accepting players");
    }
    if (has_player(user)) throw ConflictError(user + " already in session");
    if (is_full()) throw ConflictError("session " + id_ + " is full");
    players_.push_back(user);
    points_[user] = 0.0;
  }

  // Lobby only. Returns true when the lobby is now empty.
  bool remove_player(const std::string& user) {
    if (state_ != SessionState::kLobby) {
      throw StateError("players can only leave a session from its lobby");
    }
    std::erase(players_, user);
    points_.erase(user);
    return players_.empty();
  }

  void set_connected(const std::string& user, bool connected, Timestamp now) {
    if (connected) {
      disconnected_since_.erase(user);
    } else {
      disconnected_since_.try_emplace(user, now);
    }
  }

  // Advances time-driven transitions. Calling it twice with the same `now`
  // emits nothing the second time.
  std::vector<SessionEvent> tick(Timestamp now, Stores& stores) {
    std::vector<SessionEvent> events;
    update_abort(now);
    switch (state_) {
      case SessionState::kLobby:
        if (players_.size() >= config_.min_players) {
          events.push_back(start_round(now, stores));
        }
        break;
      case SessionState::kInRound: {
        for (const auto& p : players_) {
          if (!round_->settled(p) && now > round_->deadline_for(p)) {
            round_->unanswered.insert(p);
          }
        }
        if (all_settled()) events.push_back(RevealEvent{conclude_round(now, stores)});
        break;
      }
      case SessionState::kReveal:
        if (now >= reveal_until_) {
          if (rounds_played_ >= config_.rounds_total || aborted_) {
            events.push_back(GameEndEvent{conclude_game(stores)});
          } else {
            try {
              events.push_back(start_round(now, stores));
            } catch (const CategoryExhausted&) {
              events.push_back(GameEndEvent{conclude_game(stores)});
            }
          }
        }
        break;
      case SessionState::kFinished:
        break;
    }
    return events;
  }

  // Records an answer (or a skip). When it is the last outstanding response
  // the round closes immediately and its reveal is returned.
  std::vector<SessionEvent> submit_response(const std::string& user,
                                            const std::optional<std::string>& answer,
                                            bool skip, Timestamp now,
                                            Stores& stores) {
    if (state_ != SessionState::kInRound) throw StateError("round closed");
    require_player(user);
    if (round_->responses.count(user)) {
      throw ConflictError(user + " already responded this round");
    }
    if (round_->unanswered.count(user)) throw StateError("round closed");
    if (now > round_->deadline_for(user)) {
      round_->unanswered.insert(user);
      throw StateError("round closed");
    }
    AnswerRecord record;
    record.user_id = user;
    record.query_id = round_->query.query_id;
    record.timestamp = now;
    record.accuracy_at_answer = stores.profiles.read(
        [&](const ProfileStore& s) { return s.at(user).accuracy.score; });
    if (skip) {
      record.skipped = true;
    } else {
      if (!answer || fold_text(*answer).empty()) {
        throw DomainError("answer text is empty");
      }
      record.raw_answer = *answer;
      record.normalized_answer =
          normalize_or_fold(*answer, round_->query.answer_slot);
    }
    round_->responses.emplace(user, std::move(record));

    std::vector<SessionEvent> events;
    if (all_settled()) events.push_back(RevealEvent{conclude_round(now, stores)});
    return events;
  }

  // Extends the user's deadline by one step, never past the window cap.
  // Returns the new deadline, or nullopt when the cap is already reached.
  std::optional<Timestamp> request_more_time(const std::string& user,
                                             Timestamp now) {
    if (state_ != SessionState::kInRound) {
      throw StateError("no round in progress");
    }
    require_player(user);
    if (round_->settled(user)) throw StateError("already responded");
    if (now > round_->deadline_for(user)) throw StateError("round closed");
    const Duration window = round_->window_for(user);
    const Duration room = config_.cap() - window;
    if (room <= Duration{0}) return std::nullopt;
    round_->extensions[user] =
        round_->extension(user) + std::min(config_.extension_step, room);
    return round_->deadline_for(user);
  }

  RevealReport conclude_round(Timestamp now, Stores& stores) {
    if (state_ != SessionState::kInRound) {
      throw StateError("conclude_round called in state " +
                       std::string(to_string(state_)));
    }
    if (!all_settled()) throw StateError("players still answering");
    const GeneratedQuery& q = round_->query;

    RevealReport report;
    report.session_id = id_;
    report.round = round_->number;
    report.question_id = q.query_id;
    report.question_text = q.question_text;
    report.target = q.target;
    report.is_probe = q.is_probe;

    std::vector<AnswerRecord> records;
    for (const auto& p : players_) {
      auto it = round_->responses.find(p);
      PlayerAnswer pa{p, std::nullopt};
      if (it != round_->responses.end()) {
        records.push_back(it->second);
        if (!it->second.skipped) pa.answer = it->second.normalized_answer;
      }
      report.answers.push_back(std::move(pa));
    }
    const bool any_answer = std::any_of(
        records.begin(), records.end(),
        [](const AnswerRecord& r) { return !r.skipped; });

    if (any_answer) {
      report.table = compute_confidence(records);
      const RoundWinner winner = resolve_round_winner(report.table, records);
      report.winning_answer = winner.answer;
      report.winners = winner.user_ids;
      report.points_per_winner = config_.round_points_factor * q.difficulty;
      for (const auto& w : report.winners) points_[w] += report.points_per_winner;

      if (q.is_probe) {
        stores.profiles.write([&](ProfileStore& s) {
          for (const auto& r : records) {
            if (r.skipped) continue;
            UserProfile& profile = s.at(r.user_id);
            const bool correct = r.normalized_answer == *q.expected_answer;
            profile.accuracy = update_accuracy(profile.accuracy, correct, q.difficulty);
            report.probe_verdicts.push_back(
                {r.user_id, correct, q.difficulty, profile.accuracy.score});
          }
        });
      } else {
        report.commit = stores.kb.write([&](KnowledgeBase& kb) {
          append_candidates(kb, q.target, records);
          const ConfidenceTable pool =
              compute_confidence(pool_records(kb.cell(q.target)));
          return commit_answers(kb, q.target, pool, config_.commit);
        });
      }
    }
    for (const auto& p : players_) report.points.emplace_back(p, points_[p]);

    asked_.insert(q.target);
    ++rounds_played_;
    enter(SessionState::kReveal);
    reveal_until_ = now + config_.reveal_pause;
    return report;
  }

  FinalReport conclude_game(Stores& stores) {
    if (state_ != SessionState::kReveal) {
      throw StateError("conclude_game called in state " +
                       std::string(to_string(state_)));
    }
    FinalReport report;
    report.session_id = id_;
    report.aborted = aborted_;
    stores.profiles.write([&](ProfileStore& s) {
      for (const auto& p : players_) {
        report.ranking.push_back({p, points_[p], s.at(p).accuracy.score});
      }
      // Stable sort keeps join order as the last tie-break.
      std::stable_sort(report.ranking.begin(), report.ranking.end(),
                       [](const Standing& a, const Standing& b) {
                         if (a.points != b.points) return a.points > b.points;
                         return a.accuracy > b.accuracy;
                       });
      for (const auto& p : players_) {
        UserProfile& profile = s.at(p);
        profile.lifetime_points += points_[p];
        report.badges_awarded[p] = award_badges(profile);
      }
    });
    report.winner = report.ranking.empty() ? "" : report.ranking.front().user_id;
    round_.reset();
    enter(SessionState::kFinished);
    return report;
  }

 private:
  void enter(SessionState next) {
    if (!is_allowed_transition(state_, next)) {
      throw StateError("illegal transition " + std::string(to_string(state_)) +
                       " -> " + std::string(to_string(next)));
    }
    transitions_.emplace_back(state_, next);
    state_ = next;
  }

  void require_player(const std::string& user) const {
    if (!has_player(user)) {
      throw DomainError(user + " is not a player in session " + id_);
    }
  }

  bool all_settled() const {
    return std::all_of(players_.begin(), players_.end(),
                       [&](const std::string& p) { return round_->settled(p); });
  }

  void update_abort(Timestamp now) {
    if (state_ == SessionState::kLobby || players_.empty()) return;
    if (disconnected_since_.size() < players_.size()) return;
    Timestamp last{0};
    for (const auto& [user, since] : disconnected_since_) last = std::max(last, since);
    if (now - last > 2 * config_.cap()) aborted_ = true;
  }

  RoundStartEvent start_round(Timestamp now, Stores& stores) {
    const std::size_t number = rounds_played_ + 1;
    GeneratedQuery q = stores.kb.read([&](const KnowledgeBase& kb) {
      return generate_query(kb, category_, rng_, config_.query,
                            id_ + "-q" + std::to_string(number), asked_);
    });
    Round r;
    r.number = number;
    r.query = std::move(q);
    r.started_at = now;
    r.deadline = now + config_.base_window();
    round_ = std::move(r);
    enter(SessionState::kInRound);
    return RoundStartEvent{id_,
                           number,
                           round_->query.query_id,
                           round_->query.question_text,
                           round_->query.answer_slot,
                           round_->deadline};
  }

  std::string id_;
  std::string category_;
  SessionConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  SessionState state_ = SessionState::kLobby;
  std::vector<std::string> players_;  // join order
  std::map<std::string, double> points_;
  std::size_t rounds_played_ = 0;
  std::optional<Round> round_;
  Timestamp reveal_until_{0};
  std::set<CellRef> asked_;
  std::map<std::string, Timestamp> disconnected_since_;
  bool aborted_ = false;
  std::vector<std::pair<SessionState, SessionState>> transitions_;
};

struct JoinResult {
  std::string session_id;
  std::vector<std::string> players;
  bool created = false;
};

// Matchmaking and routing across all sessions. Each session is a serialized
// state machine; this class is not itself thread-safe and is meant to be
// driven from one event loop.
class SessionManager {
 public:
  SessionManager(SessionConfig config, std::uint64_t seed, Stores& stores)
      : config_(std::move(config)), seed_(seed), stores_(stores) {}

  const SessionConfig& config() const { return config_; }
  Stores& stores() { return stores_; }
  std::size_t games_finished() const { return games_finished_; }

  // Places the user in the oldest open lobby for the category, or opens one.
  JoinResult join_game(const std::string& user, const std::string& category,
                       Timestamp now) {
    (void)now;
    const bool known = stores_.profiles.read(
        [&](const ProfileStore& s) { return s.find(user) != nullptr; });
    if (!known) throw DomainError("no profile for user '" + user + "'");
    if (session_of(user) != nullptr) {
      throw ConflictError(user + " is already in a game");
    }
    const bool playable = stores_.kb.read([&](const KnowledgeBase& kb) {
      if (!kb.has_category(category)) {
        throw DomainError("unknown category '" + category + "'");
      }
      return has_questions(kb, category, config_.query);
    });
    if (!playable) {
      throw CategoryExhausted("category '" + category + "' has nothing to ask");
    }
    JoinResult result;
    GameSession* lobby = nullptr;
    for (auto& [id, s] : sessions_) {
      if (s->state() == SessionState::kLobby && s->category() == category &&
          !s->is_full()) {
        lobby = s.get();
        break;
      }
    }
    if (lobby == nullptr) {
      const std::uint64_t n = ++created_;
      std::seed_seq seq{seed_, n};
      std::uint64_t session_seed = 0;
      std::array<std::uint32_t, 2> words{};
      seq.generate(words.begin(), words.end());
      session_seed = (std::uint64_t{words[0]} << 32) | words[1];
      char id[32];
      std::snprintf(id, sizeof id, "s%04llu", static_cast<unsigned long long>(n));
      auto session = std::make_unique<GameSession>(id, category, config_, session_seed);
      lobby = session.get();
      sessions_.emplace(id, std::move(session));
      result.created = true;
    }
    lobby->add_player(user);
    user_session_[user] = lobby->id();
    result.session_id = lobby->id();
    result.players = lobby->players();
    return result;
  }

  GameSession* find(const std::string& session_id) {
    auto it = sessions_.find(session_id);
    return it == sessions_.end() ? nullptr : it->second.get();
  }

  GameSession* session_of(const std::string& user) {
    auto it = user_session_.find(user);
    return it == user_session_.end() ? nullptr : find(it->second);
  }

  // The session `user` plays in with id `session_id`, or a DomainError.
  GameSession& player_session(const std::string& user,
                              const std::string& session_id) {
    GameSession* s = find(session_id);
    if (s == nullptr || !s->has_player(user)) {
      throw DomainError("not a player in session '" + session_id + "'");
    }
    return *s;
  }

  std::vector<Broadcast> submit_response(const std::string& user,
                                         const std::string& session_id,
                                         const std::optional<std::string>& answer,
                                         bool skip, Timestamp now) {
    GameSession& s = player_session(user, session_id);
    return wrap(s, s.submit_response(user, answer, skip, now, stores_));
  }

  std::optional<Timestamp> request_more_time(const std::string& user,
                                             const std::string& session_id,
                                             Timestamp now) {
    return player_session(user, session_id).request_more_time(user, now);
  }

  std::vector<Broadcast> tick(Timestamp now) {
    std::vector<Broadcast> out;
    std::vector<std::string> dissolved;
    for (auto& [id, s] : sessions_) {
      std::vector<SessionEvent> events;
      try {
        events = s->tick(now, stores_);
      } catch (const CategoryExhausted&) {
        // Lobby whose category ran dry before the first round.
        dissolved.push_back(id);
        continue;
      }
      auto wrapped = wrap(*s, std::move(events));
      out.insert(out.end(), std::make_move_iterator(wrapped.begin()),
                 std::make_move_iterator(wrapped.end()));
    }
    for (const auto& id : dissolved) {
      for (const auto& p : sessions_.at(id)->players()) user_session_.erase(p);
      sessions_.erase(id);
    }
    std::erase_if(sessions_, [](const auto& kv) {
      return kv.second->state() == SessionState::kFinished;
    });
    return out;
  }

  // A player left while still in a lobby is removed from it; returns the
  // lobby's remaining players (empty when it was dissolved or not a lobby).
  std::optional<JoinResult> set_connected(const std::string& user,
                                          bool connected, Timestamp now) {
    GameSession* s = session_of(user);
    if (s == nullptr) return std::nullopt;
    if (s->state() == SessionState::kLobby && !connected) {
      user_session_.erase(user);
      const std::string id = s->id();
      JoinResult remaining{id, {}, false};
      if (s->remove_player(user)) {
        sessions_.erase(id);
      } else {
        remaining.players = s->players();
      }
      return remaining;
    }
    s->set_connected(user, connected, now);
    return std::nullopt;
  }

  // Called with each session as its game ends, before it is dropped.
  using FinishedObserver = std::function<void(const GameSession&)>;
  void on_game_finished(FinishedObserver observer) {
    finished_observer_ = std::move(observer);
  }

 private:
  std::vector<Broadcast> wrap(GameSession& s, std::vector<SessionEvent> events) {
    std::vector<Broadcast> out;
    for (auto& e : events) {
      if (std::holds_alternative<GameEndEvent>(e)) {
        for (const auto& p : s.players()) user_session_.erase(p);
        ++games_finished_;
        if (finished_observer_) finished_observer_(s);
      }
      out.push_back({s.players(), std::move(e)});
    }
    return out;
  }

  SessionConfig config_;
  std::uint64_t seed_;
  Stores& stores_;
  std::map<std::string, std::unique_ptr<GameSession>> sessions_;
  std::map<std::string, std::string> user_session_;
  std::uint64_t created_ = 0;
  std::size_t games_finished_ = 0;
  FinishedObserver finished_observer_;
};

}  // namespace datapop
