#include "madsa/text/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <stdexcept>

namespace madsa {

namespace {
constexpr std::array<std::string_view, kAspectCount> kAspectNames = {
    "interest", "mood", "sleep", "appetite", "fatigue", "self_esteem", "concentration", "moving"};
constexpr std::array<std::string_view, kAspectCount> kAspectLabels = {
    "Interest", "Mood", "Sleep", "Appetite", "Fatigue", "Self-esteem", "Concentration", "Moving"};
}  // namespace

std::string_view aspect_name(Aspect a) { return kAspectNames[aspect_index(a)]; }
std::string_view aspect_label(Aspect a) { return kAspectLabels[aspect_index(a)]; }

std::optional<Aspect> parse_aspect(std::string_view name) {
  for (Aspect a : kAspects) {
    if (aspect_name(a) == name) return a;
  }
  return std::nullopt;
}

std::string_view speaker_name(Speaker s) { return s == Speaker::User ? "user" : "system"; }
std::string_view emotion_name(Emotion e) { return e == Emotion::Positive ? "positive" : "negative"; }

}  // namespace madsa

namespace madsa::text {

namespace {

bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':': case '\'': case '"':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::unordered_map<std::string, int> count_tokens(std::span<const std::string> texts) {
  std::unordered_map<std::string, int> counts;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) ++counts[tok];
  }
  return counts;
}

Vocabulary from_counts(const std::unordered_map<std::string, int>& counts, int min_count) {
  std::vector<std::pair<std::string, int>> kept;
  const auto& reserved = reserved_tokens();
  for (const auto& [tok, n] : counts) {
    if (n < min_count) continue;
    if (std::find(reserved.begin(), reserved.end(), tok) != reserved.end()) continue;
    kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = reserved;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary::from_tokens(std::move(tokens));
}

std::vector<int> wrap(std::vector<int> content, std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("max_len must leave room for bos and eos");
  const std::size_t keep = std::min(content.size(), max_len - 2);
  std::vector<int> out;
  out.reserve(keep + 2);
  out.push_back(kBos);
  out.insert(out.end(), content.end() - static_cast<std::ptrdiff_t>(keep), content.end());
  out.push_back(kEos);
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {"<pad>", "<unk>",     "<bos>",    "<eos>",
                                                     "<sep>", "<emo_pos>", "<emo_neg>"};
  return kReserved;
}

Vocabulary Vocabulary::build(std::span<const Dialogue> corpus, int min_count) {
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> texts;
  for (const auto& d : corpus) {
    for (const auto& t : d.turns) texts.push_back(t.text);
  }
  return from_counts(count_tokens(texts), min_count);
}

Vocabulary Vocabulary::build_from_texts(std::span<const std::string> texts, int min_count) {
  if (texts.empty()) throw std::invalid_argument("cannot build a vocabulary from no text");
  return from_counts(count_tokens(texts), min_count);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw std::invalid_argument("vocabulary must start with the reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) {
    if (!v.ids_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token: " + tokens[i]);
    }
    if (std::find(reserved.begin(), reserved.end(), tokens[i]) != reserved.end()) {
      throw std::invalid_argument("reserved token listed twice: " + tokens[i]);
    }
  }
  v.tokens_ = std::move(tokens);
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_json() const { return nlohmann::json{{"tokens", tokens_}}.dump(); }

Vocabulary Vocabulary::from_json(std::string_view json) {
  auto j = nlohmann::json::parse(json);
  return from_tokens(j.at("tokens").get<std::vector<std::string>>());
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<int> token_ids(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(vocab.id(tok));
  return ids;
}

std::vector<int> encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  return wrap(token_ids(text, vocab), max_len);
}

std::vector<int> encode_history(std::span<const std::string> turns, const Vocabulary& vocab, std::size_t max_len) {
  const std::size_t begin = turns.size() > kHistoryWindow ? turns.size() - kHistoryWindow : 0;
  std::vector<int> content;
  for (std::size_t i = begin; i < turns.size(); ++i) {
    if (i != begin) content.push_back(kSep);
    auto ids = token_ids(turns[i], vocab);
    content.insert(content.end(), ids.begin(), ids.end());
  }
  return wrap(std::move(content), max_len);
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::vector<std::string> toks;
  for (int id : ids) {
    if (id == kEos) break;
    if (id < kReservedCount && id != kUnk) continue;
    toks.push_back(vocab.token(id));
  }
  return join_tokens(toks);
}

}  // namespace madsa::text
