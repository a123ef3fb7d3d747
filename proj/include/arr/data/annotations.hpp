#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "arr/data/vocabulary.hpp"
#include "arr/error.hpp"

namespace arr {

struct AnnotationRecord {
  std::string video_id;
  double start_s = 0.0;
  double stop_s = 0.0;
  int verb_id = 0;
  int noun_id = 0;
  int action_id = 0;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct AnnotationSet {
  std::vector<AnnotationRecord> records;  // sorted by (video_id, start_s)
  ActionVocabulary vocab;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

template <class N>
N parse_number(const std::string& field, const std::string& column, std::size_t line) {
  N value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<N>) {
    // from_chars for floating point is incomplete in some toolchains.
    char* end = nullptr;
    value = static_cast<N>(std::strtod(field.c_str(), &end));
    res.ptr = end;
    res.ec = (end == field.c_str() || field.empty()) ? std::errc::invalid_argument : std::errc{};
  } else {
    res = std::from_chars(first, last, value);
  }
  if (res.ec != std::errc{} || res.ptr != last) {
    throw DataError("line " + std::to_string(line) + ": column " + column + " has invalid value '" + field + "'");
  }
  return value;
}

}  // namespace detail

/// Reads an annotation CSV with header columns video_id,start_s,stop_s,
/// verb_id,noun_id and optional action_id. Without action_id, dense ids are
/// assigned to the sorted distinct (verb, noun) pairs.
inline AnnotationSet parse_annotations(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  AnnotationSet out;
  if (!std::getline(in, line)) return out;
  ++line_no;
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"video_id", "start_s", "stop_s", "verb_id", "noun_id"}) {
    if (!col.count(required)) throw DataError(std::string("annotation header is missing column ") + required);
  }
  const bool has_action = col.count("action_id") > 0;

  std::vector<AnnotationRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(f.size()));
    }
    AnnotationRecord r;
    r.video_id = f[col["video_id"]];
    if (r.video_id.empty()) throw DataError("line " + std::to_string(line_no) + ": empty video_id");
    r.start_s = detail::parse_number<double>(f[col["start_s"]], "start_s", line_no);
    r.stop_s = detail::parse_number<double>(f[col["stop_s"]], "stop_s", line_no);
    r.verb_id = detail::parse_number<int>(f[col["verb_id"]], "verb_id", line_no);
    r.noun_id = detail::parse_number<int>(f[col["noun_id"]], "noun_id", line_no);
    r.action_id = has_action ? detail::parse_number<int>(f[col["action_id"]], "action_id", line_no) : -1;
    if (!(r.start_s < r.stop_s)) {
      throw DataError("line " + std::to_string(line_no) + ": start_s must be < stop_s");
    }
    if (r.verb_id < 0 || r.noun_id < 0 || (has_action && r.action_id < 0)) {
      throw DataError("line " + std::to_string(line_no) + ": negative class id");
    }
    records.push_back(std::move(r));
  }

  ActionVocabulary& vocab = out.vocab;
  for (const auto& r : records) {
    vocab.n_verbs = std::max(vocab.n_verbs, static_cast<std::size_t>(r.verb_id) + 1);
    vocab.n_nouns = std::max(vocab.n_nouns, static_cast<std::size_t>(r.noun_id) + 1);
  }
  if (has_action) {
    std::map<int, std::pair<int, int>> seen;
    for (const auto& r : records) {
      auto [it, inserted] = seen.emplace(r.action_id, std::make_pair(r.verb_id, r.noun_id));
      if (!inserted && it->second != std::make_pair(r.verb_id, r.noun_id)) {
        throw DataError("action_id " + std::to_string(r.action_id) + " maps to more than one (verb, noun) pair");
      }
    }
    int expected = 0;
    for (const auto& [id, pair] : seen) {
      if (id != expected++) throw DataError("action ids are not dense in [0, K)");
      vocab.actions.push_back(pair);
    }
  } else {
    std::map<std::pair<int, int>, int> ids;
    for (const auto& r : records) ids.emplace(std::make_pair(r.verb_id, r.noun_id), 0);
    int next = 0;
    for (auto& [pair, id] : ids) {
      id = next++;
      vocab.actions.push_back(pair);
    }
    for (auto& r : records) r.action_id = ids.at({r.verb_id, r.noun_id});
  }

  std::stable_sort(records.begin(), records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    return a.start_s < b.start_s;
  });
  out.records = std::move(records);
  return out;
}

inline AnnotationSet parse_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path.string());
  return parse_annotations(in);
}

inline void write_annotations(std::ostream& out, const std::vector<AnnotationRecord>& records) {
  out << "video_id,start_s,stop_s,verb_id,noun_id,action_id\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.video_id << ',' << r.start_s << ',' << r.stop_s << ',' << r.verb_id << ',' << r.noun_id << ','
        << r.action_id << '\n';
  }
}

}  // namespace arr
