#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "arr/error.hpp"
#include "json.hpp"

namespace arr {

/// Verb/noun/action class spaces. Actions are dense ids in [0, K); the
/// optional UNKNOWN filler class, when present, has id K.
struct ActionVocabulary {
  std::size_t n_verbs = 0;
  std::size_t n_nouns = 0;
  std::vector<std::pair<int, int>> actions;  // action id -> (verb, noun)
  std::optional<int> unknown_id;

  std::size_t num_actions() const { return actions.size(); }
  /// Width of a classifier over this vocabulary (K, or K + 1 with UNKNOWN).
  std::size_t size() const { return actions.size() + (unknown_id ? 1 : 0); }
  bool has_pairs() const { return n_verbs > 0 && n_nouns > 0; }
  bool is_unknown(int a) const { return unknown_id && a == *unknown_id; }

  int verb_of(int a) const { return actions.at(static_cast<std::size_t>(a)).first; }
  int noun_of(int a) const { return actions.at(static_cast<std::size_t>(a)).second; }

  ActionVocabulary with_unknown() const {
    ActionVocabulary v = *this;
    v.unknown_id = static_cast<int>(actions.size());
    return v;
  }

  void validate() const {
    for (std::size_t a = 0; a < actions.size(); ++a) {
      const auto [verb, noun] = actions[a];
      if (verb < 0 || static_cast<std::size_t>(verb) >= n_verbs || noun < 0 ||
          static_cast<std::size_t>(noun) >= n_nouns) {
        throw DataError("vocabulary: action " + std::to_string(a) + " has (verb, noun) outside declared ranges");
      }
    }
    if (unknown_id && *unknown_id != static_cast<int>(actions.size())) {
      throw DataError("vocabulary: unknown_id must equal the number of actions");
    }
  }

  /// K actions laid out on a verb x noun grid: action a = (a % V, a / V).
  static ActionVocabulary grid(std::size_t K) {
    ActionVocabulary v;
    if (K == 0) return v;
    std::size_t verbs = 1;
    while (verbs * verbs < K) ++verbs;
    v.n_verbs = verbs;
    v.n_nouns = (K + verbs - 1) / verbs;
    for (std::size_t a = 0; a < K; ++a) v.actions.emplace_back(static_cast<int>(a % verbs), static_cast<int>(a / verbs));
    return v;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["n_verbs"] = n_verbs;
    j["n_nouns"] = n_nouns;
    j["actions"] = actions;
    j["unknown_id"] = unknown_id ? nlohmann::json(*unknown_id) : nlohmann::json(nullptr);
    return j;
  }

  static ActionVocabulary from_json(const nlohmann::json& j) {
    ActionVocabulary v;
    v.n_verbs = j.at("n_verbs").get<std::size_t>();
    v.n_nouns = j.at("n_nouns").get<std::size_t>();
    v.actions = j.at("actions").get<std::vector<std::pair<int, int>>>();
    if (j.contains("unknown_id") && !j.at("unknown_id").is_null()) v.unknown_id = j.at("unknown_id").get<int>();
    v.validate();
    return v;
  }

  friend bool operator==(const ActionVocabulary&, const ActionVocabulary&) = default;
};

}  // namespace arr
