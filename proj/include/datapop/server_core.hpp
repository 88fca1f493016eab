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

// Transport-independent server: binds connections to users, routes client
// messages into the session manager and turns session events into outbound
// messages. Socket front ends (see net.hpp) and the simulator both drive it
// through connect/handle_line/tick/disconnect.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/profiles.hpp"
#include "datapop/protocol.hpp"
#include "datapop/session.hpp"

namespace datapop {

using ConnectionId = std::uint64_t;

struct ServerOptions {
  SessionConfig session;
  std::uint64_t seed = 0;
  Duration heartbeat_interval{15'000};
  std::size_t missed_heartbeats = 3;
  std::optional<EmbeddingTable> embeddings;
  std::size_t interest_count = 3;  // categories returned by setup_interests
};

// One outbound message addressed to one connection; seq already assigned.
struct Delivery {
  ConnectionId connection = 0;
  Message message;
};

class ServerCore {
 public:
  ServerCore(Stores& stores, ServerOptions options)
      : options_(std::move(options)),
        stores_(stores),
        sessions_(options_.session, options_.seed, stores) {}

  SessionManager& sessions() { return sessions_; }
  Stores& stores() { return stores_; }
  const ServerOptions& options() const { return options_; }

  // Observer for every concluded round, including server-side details that
  // never reach players (probe verdicts, commits).
  void on_reveal(std::function<void(const RevealReport&)> observer) {
    reveal_observer_ = std::move(observer);
  }

  ConnectionId connect(Timestamp now) {
    const ConnectionId id = ++next_connection_;
    connections_[id].last_seen = now;
    return id;
  }

  bool is_open(ConnectionId id) const { return connections_.count(id) > 0; }

  std::optional<std::string> user_of(ConnectionId id) const {
    auto it = connections_.find(id);
    return it == connections_.end() ? std::nullopt : it->second.user;
  }

  // Connections closed by the server since the last call (heartbeat loss).
  std::vector<ConnectionId> take_dropped() { return std::exchange(dropped_, {}); }

  std::vector<Delivery> disconnect(ConnectionId id, Timestamp now) {
    std::vector<Delivery> out;
    auto it = connections_.find(id);
    if (it == connections_.end()) return out;
    const auto user = it->second.user;
    connections_.erase(it);
    if (user && bound_.count(*user) && bound_.at(*user) == id) {
      bound_.erase(*user);
      if (auto remaining = sessions_.set_connected(*user, false, now)) {
        if (!remaining->players.empty()) lobby_update(*remaining, out);
      }
    }
    return out;
  }

  // Decodes and handles one line. Malformed input yields an Error reply on
  // that connection only.
  std::vector<Delivery> handle_line(ConnectionId id, std::string_view line,
                                    Timestamp now) {
    std::vector<Delivery> out;
    if (!is_open(id)) return out;
    connections_.at(id).last_seen = now;
    Message msg;
    try {
      msg = decode_message(line, Direction::kClientToServer);
    } catch (const DecodeError& e) {
      send(id, error(e.what()), out);
      return out;
    }
    auto more = handle_message(id, msg, now);
    out.insert(out.end(), more.begin(), more.end());
    return out;
  }

  std::vector<Delivery> handle_message(ConnectionId id, const Message& msg,
                                       Timestamp now) {
    std::vector<Delivery> out;
    if (!is_open(id)) return out;
    Connection& conn = connections_.at(id);
    conn.last_seen = now;
    if (conn.inbound_seq && msg.seq <= *conn.inbound_seq) {
      send(id, error("seq must strictly increase"), out);
      return out;
    }
    conn.inbound_seq = msg.seq;
    try {
      dispatch(id, msg, now, out);
    } catch (const Error& e) {
      send(id, error(e.what()), out);
    }
    return out;
  }

  std::vector<Delivery> tick(Timestamp now) {
    std::vector<Delivery> out;
    const Duration silence_limit =
        options_.heartbeat_interval * static_cast<std::int64_t>(options_.missed_heartbeats);
    std::vector<ConnectionId> stale;
    for (const auto& [id, c] : connections_) {
      if (now - c.last_seen > silence_limit) stale.push_back(id);
    }
    for (ConnectionId id : stale) {
      auto more = disconnect(id, now);
      out.insert(out.end(), more.begin(), more.end());
      dropped_.push_back(id);
    }
    deliver(sessions_.tick(now), out);
    return out;
  }

 private:
  struct Connection {
    std::optional<std::string> user;
    std::optional<std::uint64_t> inbound_seq;
    std::uint64_t outbound_seq = 0;
    Timestamp last_seen{0};
  };

  static Message error(std::string reason) {
    return make_message(MessageType::kError, {{"reason", std::move(reason)}});
  }

  void send(ConnectionId id, Message msg, std::vector<Delivery>& out) {
    Connection& conn = connections_.at(id);
    msg.seq = ++conn.outbound_seq;
    out.push_back({id, std::move(msg)});
  }

  // Delivers to the user's connection, or queues until they reconnect.
  void send_to_user(const std::string& user, Message msg,
                    std::vector<Delivery>& out) {
    auto it = bound_.find(user);
    if (it == bound_.end()) {
      pending_[user].push_back(std::move(msg));
    } else {
      send(it->second, std::move(msg), out);
    }
  }

  void lobby_update(const JoinResult& lobby, std::vector<Delivery>& out) {
    for (const auto& p : lobby.players) {
      send_to_user(p, make_message(MessageType::kLobby, {{"players", lobby.players}},
                                   lobby.session_id),
                   out);
    }
  }

  const std::string& require_user(ConnectionId id) {
    const auto& user = connections_.at(id).user;
    if (!user) throw StateError("hello required");
    return *user;
  }

  void dispatch(ConnectionId id, const Message& msg, Timestamp now,
                std::vector<Delivery>& out) {
    const Json& p = msg.payload;
    switch (msg.type) {
      case MessageType::kPing:
        send(id, make_message(MessageType::kPong), out);
        return;
      case MessageType::kHello:
        hello(id, p.at("user_id").get<std::string>(),
              p.value("display_name", std::string{}), now, out);
        return;
      default:
        break;
    }
    const std::string user = require_user(id);
    switch (msg.type) {
      case MessageType::kSetupInterests:
        setup_interests(id, user, p.at("phrases").get<std::vector<std::string>>(), out);
        break;
      case MessageType::kJoin: {
        const JoinResult joined =
            sessions_.join_game(user, p.at("category").get<std::string>(), now);
        lobby_update(joined, out);
        break;
      }
      case MessageType::kAnswer:
      case MessageType::kSkip: {
        const std::string& sid = *msg.session_id;
        GameSession& s = sessions_.player_session(user, sid);
        if (s.state() != SessionState::kInRound ||
            s.round()->query.query_id != p.at("question_id").get<std::string>()) {
          throw StateError("round closed");
        }
        const bool skip = msg.type == MessageType::kSkip;
        std::optional<std::string> text;
        if (!skip) text = p.at("text").get<std::string>();
        deliver(sessions_.submit_response(user, sid, text, skip, now), out);
        break;
      }
      case MessageType::kMoreTime: {
        const auto deadline = sessions_.request_more_time(user, *msg.session_id, now);
        if (deadline) {
          send(id, make_message(MessageType::kTimeGrant,
                                {{"deadline_ms", deadline->count()}}),
               out);
        } else {
          send(id, make_message(MessageType::kDenied,
                                {{"reason", "answer window cap reached"}}),
               out);
        }
        break;
      }
      case MessageType::kScoreQuery:
        score(id, user, msg.session_id, out);
        break;
      case MessageType::kBadgeList: {
        Json badges = Json::array();
        stores_.profiles.read([&](const ProfileStore& s) {
          for (const auto& b : list_badges(s.at(user))) {
            badges.push_back({{"id", b.id}, {"name", b.name}});
          }
        });
        send(id, make_message(MessageType::kBadges, {{"badges", badges}}), out);
        break;
      }
      default:
        throw StateError("unexpected message type");
    }
  }

  void hello(ConnectionId id, const std::string& user,
             const std::string& display_name, Timestamp now,
             std::vector<Delivery>& out) {
    if (user.empty()) throw DomainError("user_id must not be empty");
    Connection& conn = connections_.at(id);
    if (conn.user && *conn.user != user) {
      throw ConflictError("connection already bound to " + *conn.user);
    }
    // A second hello for a bound user moves the binding to this connection.
    if (auto old = bound_.find(user); old != bound_.end() && old->second != id) {
      connections_.at(old->second).user.reset();
    }
    conn.user = user;
    bound_[user] = id;
    const auto [accuracy, points] = stores_.profiles.write([&](ProfileStore& s) {
      const UserProfile& profile = s.ensure(user, display_name, now);
      return std::pair{profile.accuracy.score, profile.lifetime_points};
    });
    sessions_.set_connected(user, true, now);
    send(id, make_message(MessageType::kWelcome, {{"user_id", user},
                                                  {"accuracy", accuracy},
                                                  {"lifetime_points", points}}),
         out);
    auto queued = pending_.find(user);
    if (queued != pending_.end()) {
      for (auto& m : queued->second) send(id, std::move(m), out);
      pending_.erase(queued);
    }
  }

  void setup_interests(ConnectionId id, const std::string& user,
                       const std::vector<std::string>& phrases,
                       std::vector<Delivery>& out) {
    if (!options_.embeddings) {
      throw ConfigError("interest classification is not configured");
    }
    std::vector<std::string> categories;
    stores_.kb.read([&](const KnowledgeBase& kb) {
      const auto ranked =
          classify_interests(phrases, *options_.embeddings, kb.categories.size() + 1);
      for (const auto& c : ranked) {
        if (kb.has_category(c) && categories.size() < options_.interest_count) {
          categories.push_back(c);
        }
      }
    });
    stores_.profiles.write([&](ProfileStore& s) { s.at(user).interests = categories; });
    send(id, make_message(MessageType::kInterestsAck, {{"categories", categories}}), out);
  }

  void score(ConnectionId id, const std::string& user,
             const std::optional<std::string>& session_id,
             std::vector<Delivery>& out) {
    const GameSession* s = session_id ? &sessions_.player_session(user, *session_id)
                                      : sessions_.session_of(user);
    const auto [accuracy, lifetime] = stores_.profiles.read([&](const ProfileStore& ps) {
      const UserProfile& profile = ps.at(user);
      return std::pair{profile.accuracy.score, profile.lifetime_points};
    });
    const double points = s != nullptr ? s->points(user) : lifetime;
    send(id, make_message(MessageType::kScore,
                          {{"points", points}, {"accuracy", accuracy}}),
         out);
  }

  void deliver(const std::vector<Broadcast>& broadcasts, std::vector<Delivery>& out) {
    for (const auto& b : broadcasts) {
      const Message msg = std::visit([&](const auto& e) { return to_message(e); }, b.event);
      for (const auto& user : b.recipients) send_to_user(user, msg, out);
    }
  }

  Message to_message(const RoundStartEvent& e) {
    return make_message(MessageType::kRoundStart,
                        {{"round", e.round},
                         {"question_id", e.question_id},
                         {"question_text", e.question_text},
                         {"answer_slot", std::string(to_string(e.answer_slot))},
                         {"deadline_ms", e.deadline.count()}},
                        e.session_id);
  }

  Message to_message(const RevealEvent& e) {
    const RevealReport& r = e.report;
    if (reveal_observer_) reveal_observer_(r);
    Json answers = Json::array();
    for (const auto& a : r.answers) {
      answers.push_back({{"user_id", a.user_id},
                         {"answer", a.answer ? Json(*a.answer) : Json(nullptr)}});
    }
    // Most confident first; the table itself is keyed by answer.
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [answer, entry] : r.table.entries) {
      ranked.emplace_back(answer, entry.confidence);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Json confidence = Json::array();
    for (const auto& [answer, c] : ranked) {
      confidence.push_back({{"answer", answer}, {"c", c}});
    }
    Json points = Json::array();
    for (const auto& [user, total] : r.points) {
      points.push_back({{"user_id", user}, {"total", total}});
    }
    return make_message(MessageType::kReveal,
                        {{"round", r.round},
                         {"answers", answers},
                         {"confidence", confidence},
                         {"winners", r.winners},
                         {"points", points}},
                        r.session_id);
  }

  Message to_message(const GameEndEvent& e) {
    Json ranking = Json::array();
    for (const auto& s : e.report.ranking) {
      ranking.push_back({{"user_id", s.user_id}, {"points", s.points}});
    }
    return make_message(MessageType::kGameEnd,
                        {{"ranking", ranking}, {"winner", e.report.winner}},
                        e.report.session_id);
  }

  ServerOptions options_;
  Stores& stores_;
  SessionManager sessions_;
  std::map<ConnectionId, Connection> connections_;
  std::map<std::string, ConnectionId> bound_;
  std::map<std::string, std::deque<Message>> pending_;
  std::vector<ConnectionId> dropped_;
  ConnectionId next_connection_ = 0;
  std::function<void(const RevealReport&)> reveal_observer_;
};

}  // namespace datapop
