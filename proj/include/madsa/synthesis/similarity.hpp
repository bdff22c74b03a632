#pragma once

#include "madsa/tensor/tensor.hpp"
#include "madsa/text/dialogue.hpp"

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace madsa::synthesis {

using Vec = Eigen::VectorXd;

// Anything that turns a (window-truncated) run of turns into per-token hidden
// states, one row per position.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Matrix<double> states(std::span<const std::string> turns) const = 0;
  virtual Index dim() const = 0;
};

// Parameter-free encoder: every content token (punctuation and function
// words are skipped) maps to a fixed
// pseudo-random Gaussian vector derived from its hash and the seed. Mean
// pooling of these states makes similarity track shared vocabulary.
class HashedEncoder : public TextEncoder {
 public:
  explicit HashedEncoder(Index dim = 64, std::uint64_t seed = 0);
  Matrix<double> states(std::span<const std::string> turns) const override;
  Index dim() const override { return dim_; }

  Vec token_vector(std::string_view token) const;

 private:
  Index dim_;
  std::uint64_t seed_;
};

// Mean of the encoder states over the last kHistoryWindow turns.
Vec embed_context(std::span<const std::string> history, const TextEncoder& encoder);

// A single text pooled the same way as a one-turn history.
Vec embed_text(const std::string& text, const TextEncoder& encoder);

// Cosine similarity; -1 when either vector has zero norm.
double cosine(const Vec& a, const Vec& b);

enum class CandidateKind { Phq, Generated };
std::string_view candidate_kind_name(CandidateKind k);

struct Candidate {
  std::string text;
  Vec vector;
  CandidateKind kind = CandidateKind::Generated;
  std::optional<Aspect> item;  // set for Phq candidates
};

struct Selection {
  std::size_t index = 0;
  std::vector<double> similarities;
};

// Argmax of cosine similarity to the context; the lowest index wins ties.
Selection select_response(const Vec& context, std::span<const Candidate> candidates);

}  // namespace madsa::synthesis
