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

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "datapop/error.hpp"

namespace datapop {

// Expected kind of answer for a question. Drives normalization.
enum class SlotType { kDate, kNumber, kText, kOrganization };

inline constexpr std::array<std::pair<SlotType, std::string_view>, 4>
    kSlotTypeNames = {{
        {SlotType::kDate, "DATE"},
        {SlotType::kNumber, "NUMBER"},
        {SlotType::kText, "TEXT"},
        {SlotType::kOrganization, "ORGANIZATION"},
    }};

inline std::string_view to_string(SlotType slot) {
  for (const auto& [value, name] : kSlotTypeNames) {
    if (value == slot) return name;
  }
  return "TEXT";
}

inline SlotType parse_slot_type(std::string_view name) {
  for (const auto& [value, text] : kSlotTypeNames) {
    if (text == name) return value;
  }
  throw ParseError("unknown slot_type '" + std::string(name) + "'");
}

// Virtual or wall time, milliseconds since the epoch.
using Timestamp = std::chrono::milliseconds;
using Duration = std::chrono::milliseconds;

// (row id, column name) address of a single knowledge-base cell.
struct CellRef {
  std::string row_id;
  std::string column;

  auto operator<=>(const CellRef&) const = default;
  bool operator==(const CellRef&) const = default;
};

}  // namespace datapop
