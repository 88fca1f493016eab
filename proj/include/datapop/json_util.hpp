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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "datapop/error.hpp"

namespace datapop {

using Json = nlohmann::json;
// Preserves insertion order, so documents are written with keys in a fixed
// order.
using OrderedJson = nlohmann::ordered_json;

namespace json_util {

// Field accessors that report failures with a dotted path to the field.
template <typename J>
const J& field(const J& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(path + "." + std::string(key) + ": missing field");
  }
  return *it;
}

template <typename J>
std::string as_string(const J& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path + ": expected string");
  return v.template get<std::string>();
}

template <typename J>
double as_number(const J& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path + ": expected number");
  return v.template get<double>();
}

template <typename J>
std::int64_t as_int(const J& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path + ": expected integer");
  return v.template get<std::int64_t>();
}

template <typename J>
std::uint64_t as_count(const J& v, const std::string& path) {
  if (!v.is_number_integer() || v.template get<std::int64_t>() < 0) {
    throw ParseError(path + ": expected non-negative integer");
  }
  return v.template get<std::uint64_t>();
}

template <typename J>
bool as_bool(const J& v, const std::string& path) {
  if (!v.is_boolean()) throw ParseError(path + ": expected boolean");
  return v.template get<bool>();
}

template <typename J>
const J& as_array(const J& v, const std::string& path) {
  if (!v.is_array()) throw ParseError(path + ": expected array");
  return v;
}

inline Json parse_document(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Writes through a sibling temp file so readers never see a partial file.
inline void write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp + "'");
    out << contents;
    out.flush();
    if (!out) throw ConfigError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot replace '" + path + "': " + ec.message());
}

}  // namespace json_util
}  // namespace datapop
