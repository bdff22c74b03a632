#include "madsa/synthesis/similarity.hpp"

#include "madsa/tensor/rng.hpp"
#include "madsa/text/vocabulary.hpp"

#include <set>
#include <stdexcept>

namespace madsa::synthesis {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_punctuation(const std::string& tok) {
  return tok.size() == 1 && std::string_view(".,!?;:'\"").find(tok[0]) != std::string_view::npos;
}

// Function words carry no topic and would otherwise dominate the overlap.
bool is_stopword(const std::string& tok) {
  static const std::set<std::string, std::less<>> words = {
      "a",    "about", "after", "all",  "am",   "an",    "and",  "any",  "are",   "as",   "at",   "be",
      "been", "but",   "by",    "can",  "could", "did",  "do",   "for",  "from",  "had",  "has",  "have",
      "how",  "i",     "if",    "in",   "is",   "it",    "just", "me",   "my",    "not",  "of",   "on",
      "or",   "our",   "s",     "so",   "some", "such",  "t",    "that", "the",   "them", "then", "there",
      "this", "to",    "too",   "us",   "very", "was",   "we",   "were", "what",  "when", "with", "you",
      "your", "yourself", "over", "often", "last", "two", "weeks", "bothered", "than", "more", "lot", "being"};
  return words.count(tok) > 0;
}

}  // namespace

HashedEncoder::HashedEncoder(Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw ConfigError("hashed encoder needs a positive dimension");
}

Vec HashedEncoder::token_vector(std::string_view token) const {
  Rng rng(fnv1a(token) ^ seed_);
  Vec v(dim_);
  for (Index i = 0; i < dim_; ++i) v(i) = rng.normal();
  return v;
}

Matrix<double> HashedEncoder::states(std::span<const std::string> turns) const {
  std::vector<Vec> rows;
  for (const auto& turn : turns) {
    for (const auto& tok : text::tokenize(turn)) {
      if (!is_punctuation(tok) && !is_stopword(tok)) rows.push_back(token_vector(tok));
    }
  }
  if (rows.empty()) return Matrix<double>::Zero(1, dim_);
  Matrix<double> out(static_cast<Index>(rows.size()), dim_);
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = rows[r].transpose();
  return out;
}

Vec embed_context(std::span<const std::string> history, const TextEncoder& encoder) {
  if (history.empty()) throw std::invalid_argument("embed_context: empty history");
  const std::size_t begin = history.size() > kHistoryWindow ? history.size() - kHistoryWindow : 0;
  const Matrix<double> s = encoder.states(history.subspan(begin));
  return s.colwise().mean().transpose();
}

Vec embed_text(const std::string& text, const TextEncoder& encoder) {
  return embed_context(std::span<const std::string>(&text, 1), encoder);
}

double cosine(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionError("cosine: vectors differ in size");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -1.0;
  return a.dot(b) / (na * nb);
}

std::string_view candidate_kind_name(CandidateKind k) { return k == CandidateKind::Phq ? "phq" : "generated"; }

Selection select_response(const Vec& context, std::span<const Candidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_response: no candidates");
  Selection sel;
  sel.similarities.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.vector.size() != context.size()) {
      throw DimensionError("select_response: candidate vector has " + std::to_string(c.vector.size()) +
                           " dims, context has " + std::to_string(context.size()));
    }
    sel.similarities.push_back(cosine(context, c.vector));
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (sel.similarities[i] > sel.similarities[sel.index]) sel.index = i;
  }
  return sel;
}

}  // namespace madsa::synthesis
