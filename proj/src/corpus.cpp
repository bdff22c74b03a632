#include "madsa/text/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace madsa::text {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string where(std::size_t line, const std::string& field) {
  std::string out = line ? "line " + std::to_string(line) : std::string("record");
  if (!field.empty()) out += ", field '" + field + "'";
  return out;
}

const json& require(const json& obj, const char* key, const std::string& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(line, path + key, "missing field");
  return *it;
}

std::string require_string(const json& v, const std::string& field, std::size_t line) {
  if (!v.is_string()) throw ValidationError(line, field, "expected a string");
  return v.get<std::string>();
}

int require_score(const json& v, const std::string& field, std::size_t line) {
  if (!v.is_number_integer()) throw ValidationError(line, field, "expected an integer score");
  const auto s = v.get<long long>();
  if (s < 0 || s > kMaxItemScore) throw ValidationError(line, field, "score out of range");
  return static_cast<int>(s);
}

}  // namespace

ValidationError::ValidationError(std::size_t line, std::string field, const std::string& message)
    : std::runtime_error(where(line, field) + ": " + message), line_(line), field_(std::move(field)) {}

ordered_json to_json(const Dialogue& d) {
  ordered_json turns = ordered_json::array();
  for (const auto& t : d.turns) {
    ordered_json jt;
    jt["speaker"] = speaker_name(t.speaker);
    jt["text"] = t.text;
    if (t.emotion) jt["emotion"] = emotion_name(*t.emotion);
    jt["phq_item"] = t.phq_item ? ordered_json(aspect_name(*t.phq_item)) : ordered_json(nullptr);
    jt["phq_score"] = t.phq_score ? ordered_json(*t.phq_score) : ordered_json(nullptr);
    turns.push_back(std::move(jt));
  }
  ordered_json scores;
  for (Aspect a : kAspects) scores[std::string(aspect_name(a))] = d.aspect_scores[aspect_index(a)];
  ordered_json j;
  j["id"] = d.id;
  j["turns"] = std::move(turns);
  j["aspect_scores"] = std::move(scores);
  return j;
}

Dialogue dialogue_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw ValidationError(line, "", "expected a JSON object");
  Dialogue d;
  d.id = require_string(require(j, "id", "", line), "id", line);

  const json& turns = require(j, "turns", "", line);
  if (!turns.is_array()) throw ValidationError(line, "turns", "expected an array");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const std::string base = "turns[" + std::to_string(i) + "].";
    const json& jt = turns[i];
    if (!jt.is_object()) throw ValidationError(line, base, "expected an object");
    Turn t;
    const std::string speaker = require_string(require(jt, "speaker", base, line), base + "speaker", line);
    if (speaker == "user") {
      t.speaker = Speaker::User;
    } else if (speaker == "system") {
      t.speaker = Speaker::System;
    } else {
      throw ValidationError(line, base + "speaker", "unknown speaker '" + speaker + "'");
    }
    t.text = require_string(require(jt, "text", base, line), base + "text", line);
    if (auto it = jt.find("emotion"); it != jt.end() && !it->is_null()) {
      const std::string e = require_string(*it, base + "emotion", line);
      if (e == "positive") {
        t.emotion = Emotion::Positive;
      } else if (e == "negative") {
        t.emotion = Emotion::Negative;
      } else {
        throw ValidationError(line, base + "emotion", "unknown emotion '" + e + "'");
      }
    }
    if (auto it = jt.find("phq_item"); it != jt.end() && !it->is_null()) {
      const std::string name = require_string(*it, base + "phq_item", line);
      t.phq_item = parse_aspect(name);
      if (!t.phq_item) throw ValidationError(line, base + "phq_item", "unknown aspect '" + name + "'");
    }
    if (auto it = jt.find("phq_score"); it != jt.end() && !it->is_null()) {
      t.phq_score = require_score(*it, base + "phq_score", line);
    }
    d.turns.push_back(std::move(t));
  }

  const json& scores = require(j, "aspect_scores", "", line);
  if (!scores.is_object()) throw ValidationError(line, "aspect_scores", "expected an object");
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (!parse_aspect(it.key())) throw ValidationError(line, "aspect_scores." + it.key(), "unknown aspect");
  }
  for (Aspect a : kAspects) {
    const std::string key(aspect_name(a));
    auto it = scores.find(key);
    if (it == scores.end()) throw ValidationError(line, "aspect_scores." + key, "missing aspect key");
    d.aspect_scores[aspect_index(a)] = require_score(*it, "aspect_scores." + key, line);
  }
  validate(d, line);
  return d;
}

void validate(const Dialogue& d, std::size_t line) {
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const Turn& t = d.turns[i];
    const std::string base = "turns[" + std::to_string(i) + "].";
    if (t.speaker == Speaker::User && !t.emotion) {
      throw ValidationError(line, base + "emotion", "user turn without emotion label");
    }
    if (t.speaker == Speaker::System && t.emotion) {
      throw ValidationError(line, base + "emotion", "emotion is only allowed on user turns");
    }
    if (t.phq_item.has_value() != t.phq_score.has_value()) {
      throw ValidationError(line, base + "phq_score", "phq_score must be present exactly when phq_item is");
    }
    if (t.phq_score && (*t.phq_score < 0 || *t.phq_score > kMaxItemScore)) {
      throw ValidationError(line, base + "phq_score", "score out of range");
    }
  }
  for (Aspect a : kAspects) {
    const int s = d.aspect_scores[aspect_index(a)];
    if (s < 0 || s > kMaxItemScore) {
      throw ValidationError(line, "aspect_scores." + std::string(aspect_name(a)), "score out of range");
    }
  }
}

std::string to_jsonl_line(const Dialogue& d) {
  validate(d);
  return to_json(d).dump();
}

void write_jsonl(std::ostream& out, const std::vector<Dialogue>& dialogues) {
  for (const auto& d : dialogues) out << to_jsonl_line(d) << '\n';
}

std::vector<Dialogue> read_jsonl(std::istream& in) {
  std::vector<Dialogue> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(line, "", std::string("malformed JSON: ") + e.what());
    }
    out.push_back(dialogue_from_json(j, line));
  }
  return out;
}

void save_jsonl(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_jsonl(out, dialogues);
}

std::vector<Dialogue> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_jsonl(in);
}

}  // namespace madsa::text
