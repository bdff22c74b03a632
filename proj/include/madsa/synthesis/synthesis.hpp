#pragma once

#include "madsa/synthesis/phq_bank.hpp"
#include "madsa/synthesis/similarity.hpp"
#include "madsa/synthesis/urg.hpp"
#include "madsa/text/dialogue.hpp"

#include <array>
#include <cstdint>
#include <json.hpp>
#include <span>
#include <vector>

namespace madsa::synthesis {

struct SynthesisConfig {
  std::uint64_t seed = 42;
  int n_dialogues = 100;
  double negative_fraction = 0.4;
  // Relative weights of item scores 0..3 when labels are drawn.
  std::array<double, kMaxItemScore + 1> score_weights{1, 1, 1, 1};
  // Off: the seed corpus passes through untouched.
  bool gate_enabled = true;
  // Off: only PHQ questions compete at a negative turn (test hook).
  bool include_original = true;

  void validate() const;
  // Keys present in j override base.
  static SynthesisConfig from_json(const nlohmann::json& j, SynthesisConfig base);
  nlohmann::ordered_json to_json() const;
};

// Template-driven open-domain dialogues of 4-10 turns, user first, strictly
// alternating, every user turn labelled negative with probability
// negative_fraction. The eight aspect labels are drawn here, before any
// synthesis, from score_weights. Dialogue i uses rng stream stream_seed(seed, i).
std::vector<Dialogue> generate_seed_corpus(const SynthesisConfig& config);

struct SynthesisStats {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::size_t user_turns = 0;
  std::size_t negative_turns = 0;
  std::array<std::size_t, kAspectCount> injections{};
  // dialogue labels per aspect and score
  std::array<std::array<std::size_t, kMaxItemScore + 1>, kAspectCount> score_histogram{};

  std::size_t total_injections() const;
  nlohmann::ordered_json to_json() const;
  bool operator==(const SynthesisStats&) const = default;
};

// An injection is a system turn tagged with a PHQ item.
SynthesisStats corpus_stats(std::span<const Dialogue> dialogues);

struct SynthesisResult {
  std::vector<Dialogue> dialogues;
  SynthesisStats stats;
};

// At each negative user turn followed by a system turn, the original system
// response competes with the not-yet-asked PHQ questions by cosine similarity
// to the history. When a question wins, the system turn becomes the question,
// followed by a generated user answer for the dialogue's label on that
// aspect, followed by the original system response. Both injected turns carry
// phq_item and phq_score.
SynthesisResult synthesize_corpus(std::span<const Dialogue> seed_corpus, const PhqBank& bank,
                                  const UserResponseGenerator& urg, const TextEncoder& encoder,
                                  const SynthesisConfig& config);

// Emotion label given to a generated PHQ answer.
Emotion answer_emotion(int score);

}  // namespace madsa::synthesis
