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

// Wire messages. Each message is one JSON object; on a stream socket it is
// written as a single line terminated by '\n', on a browser socket as one
// text frame. Both framings carry identical objects.
//
// Every object has "type" and "seq" (per connection, per direction,
// strictly increasing). Fields are validated against a fixed schema per
// message type; unknown fields are dropped on decode and rejected on encode.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "datapop/error.hpp"
#include "datapop/json_util.hpp"

namespace datapop {

enum class MessageType {
  kHello,
  kWelcome,
  kSetupInterests,
  kInterestsAck,
  kJoin,
  kLobby,
  kRoundStart,
  kAnswer,
  kSkip,
  kMoreTime,
  kTimeGrant,
  kDenied,
  kReveal,
  kScoreQuery,
  kScore,
  kBadgeList,
  kBadges,
  kGameEnd,
  kError,
  kPing,
  kPong,
};

enum class Direction { kClientToServer, kServerToClient };

struct Message {
  MessageType type = MessageType::kPing;
  std::optional<std::string> session_id;
  Json payload = Json::object();  // type-specific fields, minus type/seq/session_id
  std::uint64_t seq = 0;

  bool operator==(const Message&) const = default;
};

namespace wire {

enum class Kind {
  kString,
  kInt,
  kNumber,
  kStringArray,
  kNullableString,
  kObjectArray,
};

struct SubField {
  std::string_view name;
  Kind kind;
};

struct Field {
  std::string_view name;
  Kind kind;
  bool required = true;
  std::vector<SubField> members = {};  // for kObjectArray
};

enum class SessionField { kAbsent, kRequired, kOptional };

struct Schema {
  MessageType type;
  std::string_view tag;
  Direction direction;
  SessionField session = SessionField::kAbsent;
  std::vector<Field> fields = {};
};

inline const std::vector<Schema>& schemas() {
  using enum Kind;
  using D = Direction;
  using S = SessionField;
  using T = MessageType;
  static const std::vector<Schema> table = {
      {T::kHello, "hello", D::kClientToServer, S::kAbsent,
       {{"user_id", kString}, {"display_name", kString, false}}},
      {T::kWelcome, "welcome", D::kServerToClient, S::kAbsent,
       {{"user_id", kString}, {"accuracy", kNumber}, {"lifetime_points", kNumber}}},
      {T::kSetupInterests, "setup_interests", D::kClientToServer, S::kAbsent,
       {{"phrases", kStringArray}}},
      {T::kInterestsAck, "interests_ack", D::kServerToClient, S::kAbsent,
       {{"categories", kStringArray}}},
      {T::kJoin, "join", D::kClientToServer, S::kAbsent, {{"category", kString}}},
      {T::kLobby, "lobby", D::kServerToClient, S::kRequired,
       {{"players", kStringArray}}},
      {T::kRoundStart, "round_start", D::kServerToClient, S::kRequired,
       {{"round", kInt},
        {"question_id", kString},
        {"question_text", kString},
        {"answer_slot", kString},
        {"deadline_ms", kInt}}},
      {T::kAnswer, "answer", D::kClientToServer, S::kRequired,
       {{"question_id", kString}, {"text", kString}}},
      {T::kSkip, "skip", D::kClientToServer, S::kRequired,
       {{"question_id", kString}}},
      {T::kMoreTime, "more_time", D::kClientToServer, S::kRequired},
      {T::kTimeGrant, "time_grant", D::kServerToClient, S::kAbsent,
       {{"deadline_ms", kInt}}},
      {T::kDenied, "denied", D::kServerToClient, S::kAbsent,
       {{"reason", kString}}},
      {T::kReveal, "reveal", D::kServerToClient, S::kRequired,
       {{"round", kInt},
        {"answers", kObjectArray, true,
         {{"user_id", kString}, {"answer", kNullableString}}},
        {"confidence", kObjectArray, true, {{"answer", kString}, {"c", kNumber}}},
        {"winners", kStringArray},
        {"points", kObjectArray, true, {{"user_id", kString}, {"total", kNumber}}}}},
      {T::kScoreQuery, "score", D::kClientToServer, S::kOptional},
      {T::kScore, "score", D::kServerToClient, S::kAbsent,
       {{"points", kNumber}, {"accuracy", kNumber}}},
      {T::kBadgeList, "badges", D::kClientToServer, S::kAbsent},
      {T::kBadges, "badges", D::kServerToClient, S::kAbsent,
       {{"badges", kObjectArray, true, {{"id", kString}, {"name", kString}}}}},
      {T::kGameEnd, "game_end", D::kServerToClient, S::kRequired,
       {{"ranking", kObjectArray, true,
         {{"user_id", kString}, {"points", kNumber}}},
        {"winner", kString}}},
      {T::kError, "error", D::kServerToClient, S::kAbsent, {{"reason", kString}}},
      {T::kPing, "ping", D::kClientToServer},
      {T::kPong, "pong", D::kServerToClient},
  };
  return table;
}

inline const Schema& schema_for(MessageType type) {
  for (const auto& s : schemas()) {
    if (s.type == type) return s;
  }
  throw EncodeError("no schema for message type");
}

inline const Schema* schema_for(std::string_view tag, Direction direction) {
  for (const auto& s : schemas()) {
    if (s.tag == tag && s.direction == direction) return &s;
  }
  return nullptr;
}

inline bool matches(const Json& v, Kind kind) {
  switch (kind) {
    case Kind::kString: return v.is_string();
    case Kind::kInt: return v.is_number_integer();
    case Kind::kNumber: return v.is_number();
    case Kind::kNullableString: return v.is_null() || v.is_string();
    case Kind::kStringArray:
      return v.is_array() &&
             std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); });
    case Kind::kObjectArray: return v.is_array();
  }
  return false;
}

// Copies the schema's fields out of `in`, dropping anything else. Throws
// `Err` naming the first missing or mistyped field.
template <typename Err>
Json extract_fields(const Json& in, const std::vector<Field>& fields,
                    std::string_view tag) {
  Json out = Json::object();
  for (const auto& f : fields) {
    auto it = in.find(f.name);
    const std::string where = std::string(tag) + "." + std::string(f.name);
    if (it == in.end()) {
      if (f.required) throw Err(where + ": missing field");
      continue;
    }
    if (!matches(*it, f.kind)) throw Err(where + ": wrong type");
    if (f.kind != Kind::kObjectArray) {
      out[std::string(f.name)] = *it;
      continue;
    }
    Json items = Json::array();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Json& element = (*it)[i];
      const std::string ew = where + "[" + std::to_string(i) + "]";
      if (!element.is_object()) throw Err(ew + ": expected object");
      Json item = Json::object();
      for (const auto& m : f.members) {
        auto mit = element.find(m.name);
        if (mit == element.end()) {
          throw Err(ew + "." + std::string(m.name) + ": missing field");
        }
        if (!matches(*mit, m.kind)) {
          throw Err(ew + "." + std::string(m.name) + ": wrong type");
        }
        item[std::string(m.name)] = *mit;
      }
      items.push_back(std::move(item));
    }
    out[std::string(f.name)] = std::move(items);
  }
  return out;
}

}  // namespace wire

inline std::string_view type_tag(MessageType type) {
  return wire::schema_for(type).tag;
}

inline Direction direction_of(MessageType type) {
  return wire::schema_for(type).direction;
}

// JSON object for the message, keys in schema order. Throws EncodeError when
// the payload does not match the schema exactly.
inline OrderedJson message_to_json(const Message& msg) {
  const wire::Schema& schema = wire::schema_for(msg.type);
  const std::string tag(schema.tag);
  if (!msg.payload.is_object()) throw EncodeError(tag + ": payload must be an object");
  OrderedJson out;
  out["type"] = tag;
  out["seq"] = msg.seq;
  switch (schema.session) {
    case wire::SessionField::kRequired:
      if (!msg.session_id) throw EncodeError(tag + ".session_id: missing field");
      out["session_id"] = *msg.session_id;
      break;
    case wire::SessionField::kOptional:
      if (msg.session_id) out["session_id"] = *msg.session_id;
      break;
    case wire::SessionField::kAbsent:
      if (msg.session_id) throw EncodeError(tag + ": unexpected session_id");
      break;
  }
  const Json checked = wire::extract_fields<EncodeError>(msg.payload, schema.fields, tag);
  if (checked.size() != msg.payload.size()) {
    throw EncodeError(tag + ": payload has fields outside the schema");
  }
  for (const auto& f : schema.fields) {
    auto it = checked.find(f.name);
    if (it == checked.end()) continue;
    if (f.kind != wire::Kind::kObjectArray) {
      out[std::string(f.name)] = OrderedJson::parse(it->dump());
      continue;
    }
    // Keep member order stable as well.
    OrderedJson items = OrderedJson::array();
    for (const auto& element : *it) {
      OrderedJson item = OrderedJson::object();
      for (const auto& m : f.members) {
        item[std::string(m.name)] = OrderedJson::parse(element.at(m.name).dump());
      }
      items.push_back(std::move(item));
    }
    out[std::string(f.name)] = std::move(items);
  }
  return out;
}

// Single line of UTF-8 JSON terminated by '\n'. JSON escaping guarantees no
// interior newline.
inline std::string encode_message(const Message& msg) {
  try {
    return message_to_json(msg).dump() + "\n";
  } catch (const Json::type_error& e) {
    throw EncodeError(std::string("unencodable payload: ") + e.what());
  }
}

// Same object without the line terminator, for message-per-frame transports.
inline std::string encode_frame(const Message& msg) {
  std::string line = encode_message(msg);
  line.pop_back();
  return line;
}

inline Message message_from_json(const Json& doc, Direction direction) {
  if (!doc.is_object()) throw DecodeError("message must be a JSON object");
  auto type_it = doc.find("type");
  if (type_it == doc.end() || !type_it->is_string()) {
    throw DecodeError("missing field 'type'");
  }
  const std::string tag = type_it->get<std::string>();
  const wire::Schema* schema = wire::schema_for(tag, direction);
  if (schema == nullptr) throw DecodeError("unknown message type '" + tag + "'");

  Message msg;
  msg.type = schema->type;
  auto seq_it = doc.find("seq");
  if (seq_it == doc.end()) throw DecodeError(tag + ".seq: missing field");
  if (!seq_it->is_number_unsigned() && !(seq_it->is_number_integer() &&
                                         seq_it->get<std::int64_t>() >= 0)) {
    throw DecodeError(tag + ".seq: expected non-negative integer");
  }
  msg.seq = seq_it->get<std::uint64_t>();

  auto sid = doc.find("session_id");
  if (schema->session != wire::SessionField::kAbsent && sid != doc.end()) {
    if (!sid->is_string()) throw DecodeError(tag + ".session_id: wrong type");
    msg.session_id = sid->get<std::string>();
  } else if (schema->session == wire::SessionField::kRequired) {
    throw DecodeError(tag + ".session_id: missing field");
  }
  msg.payload = wire::extract_fields<DecodeError>(doc, schema->fields, tag);
  return msg;
}

// Parses one complete line (a trailing '\n' or "\r\n" is allowed).
inline Message decode_message(std::string_view line, Direction direction) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
    line.remove_suffix(1);
  }
  Json doc;
  try {
    doc = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DecodeError(std::string("malformed JSON: ") + e.what());
  }
  return message_from_json(doc, direction);
}

// Convenience constructor.
inline Message make_message(MessageType type, Json payload = Json::object(),
                            std::optional<std::string> session_id = std::nullopt) {
  Message m;
  m.type = type;
  m.payload = std::move(payload);
  m.session_id = std::move(session_id);
  return m;
}

}  // namespace datapop
