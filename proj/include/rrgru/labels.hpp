#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "rrgru/error.hpp"

namespace rrgru {

using LabelId = std::size_t;

// The nine directed relation types plus Other. Directional label ids are
// 2 * relation + direction, direction 0 meaning (e1,e2); Other is 18.
class LabelSet {
 public:
  static constexpr std::size_t kRelations = 9;
  static constexpr std::size_t kDirectional = 2 * kRelations;
  static constexpr std::size_t kLabels = kDirectional + 1;
  static constexpr LabelId kOther = kDirectional;

  static constexpr std::array<std::string_view, kRelations> kRelationNames = {
      "Cause-Effect",       "Component-Whole",   "Content-Container",
      "Entity-Destination", "Entity-Origin",     "Instrument-Agency",
      "Member-Collection",  "Message-Topic",     "Product-Producer"};

  static bool is_other(LabelId id) { return id == kOther; }
  static std::size_t relation_of(LabelId id) {
    check(id);
    return is_other(id) ? kRelations : id / 2;
  }
  // 0 for (e1,e2), 1 for (e2,e1).
  static std::size_t direction_of(LabelId id) {
    check(id);
    return id % 2;
  }
  static LabelId directional(std::size_t relation, std::size_t direction) {
    if (relation >= kRelations || direction > 1)
      throw ContractError("no directional label for relation " + std::to_string(relation));
    return 2 * relation + direction;
  }

  static std::string name(LabelId id) {
    check(id);
    if (is_other(id)) return "Other";
    return std::string(kRelationNames[id / 2]) + (id % 2 == 0 ? "(e1,e2)" : "(e2,e1)");
  }

  static std::optional<LabelId> try_parse(std::string_view s) {
    if (s == "Other") return kOther;
    for (std::size_t r = 0; r < kRelations; ++r) {
      const auto& rel = kRelationNames[r];
      if (s.size() != rel.size() + 7 || s.substr(0, rel.size()) != rel) continue;
      const auto suffix = s.substr(rel.size());
      if (suffix == "(e1,e2)") return 2 * r;
      if (suffix == "(e2,e1)") return 2 * r + 1;
    }
    return std::nullopt;
  }

  static LabelId parse(std::string_view s) {
    if (auto id = try_parse(s)) return *id;
    throw LabelError("unknown relation label '" + std::string(s) + "'");
  }

 private:
  static void check(LabelId id) {
    if (id >= kLabels) throw LabelError("label id " + std::to_string(id) + " out of range");
  }
};

}  // namespace rrgru
