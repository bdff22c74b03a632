#pragma once

#include "madsa/model/seq2seq.hpp"
#include "madsa/synthesis/phq_bank.hpp"
#include "madsa/synthesis/similarity.hpp"
#include "madsa/text/dialogue.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace madsa::dialogue {

using synthesis::CandidateKind;
using synthesis::Vec;

inline constexpr char kDialoguePrefix[] = "dialogue";
inline constexpr std::size_t kMaxResponseTokens = 64;

struct DialogueConfig {
  model::Seq2SeqDims dims{0, 32, 64};  // vocab is filled in from the corpus
  model::TrainConfig train{10, 16, 1e-5, 0.01, 1};
  int min_count = 1;
};

// Encoder-decoder whose decoded sequence is the emotion token of the last
// user turn followed by the system response. Its encoder doubles as the text
// encoder for similarity and for the assessor.
class DialogueModel : public synthesis::TextEncoder {
 public:
  explicit DialogueModel(model::TextModel m);

  static DialogueModel untrained(std::span<const Dialogue> corpus, const DialogueConfig& config);

  // One example per system turn that directly follows a user turn.
  static std::vector<model::Example> examples(std::span<const Dialogue> corpus, const text::Vocabulary& vocab);

  std::vector<int> source_ids(std::span<const std::string> history) const;

  // Encoder states of the window-truncated history (bos ... eos).
  Matrix<double> states(std::span<const std::string> turns) const override;
  Index dim() const override { return model_.net.dims().hidden; }

  // Encoder states of a single turn's tokens, no markers: one row per token.
  Matrix<double> turn_states(const std::string& text) const;

  model::TextModel& model() { return model_; }
  const model::TextModel& model() const { return model_; }
  const text::Vocabulary& vocab() const { return model_.vocab; }

  void save(const std::filesystem::path& checkpoint) const { model::save_text_model(model_, checkpoint); }
  static DialogueModel load(const std::filesystem::path& checkpoint);

 private:
  model::TextModel model_;
};

DialogueModel train_dialogue_model(std::span<const Dialogue> corpus, const DialogueConfig& config,
                                   const std::function<void(int, double)>& on_epoch = {});

struct EmotionPrediction {
  Emotion emotion = Emotion::Positive;
  double probability = 0.5;
};

// Renormalized over the two emotion logits; a tie is positive.
EmotionPrediction emotion_from_logits(double positive_logit, double negative_logit);

EmotionPrediction classify_emotion(const DialogueModel& m, std::span<const std::string> history);

struct Response {
  std::string text;
  bool truncated = false;
};

// Greedy decode after the predicted emotion token.
Response generate_response(const DialogueModel& m, std::span<const std::string> history,
                           std::size_t max_len = kMaxResponseTokens);

// Mean-pooled encoder states of a non-empty text, pooled like a context.
Vec embed_candidate(const DialogueModel& m, const std::string& text);

// PHQ items already asked in one conversation.
struct PhqState {
  std::array<bool, kAspectCount> asked{};

  std::vector<Aspect> unasked() const;
  bool exhausted() const { return unasked().empty(); }
};

struct GateCandidate {
  std::string text;
  CandidateKind kind = CandidateKind::Generated;
  std::optional<Aspect> item;
  double similarity = 0;
};

// induced holds exactly when the predicted emotion is negative and the
// selected candidate is a PHQ question.
struct GateDecision {
  Emotion predicted_emotion = Emotion::Positive;
  double emotion_probability = 0.5;
  std::vector<GateCandidate> candidates;
  std::size_t selected = 0;
  bool induced = false;

  nlohmann::ordered_json to_json() const;
  static GateDecision from_json(const nlohmann::json& j);
};

// Test hooks. forced_emotion replaces the classifier; candidate_vector, when
// it returns a vector, replaces the model embedding of that candidate text.
struct GateHooks {
  std::optional<Emotion> forced_emotion;
  std::function<std::optional<Vec>(const std::string& text)> candidate_vector;
};

struct Induced {
  Response response;
  GateDecision gate;
};

// Positive emotion, or negative with every PHQ item asked: the generated
// response. Negative otherwise: the generated response competes with the
// unasked PHQ questions by cosine similarity to the history; a winning
// question is returned verbatim and marked asked.
Induced induce_response(const DialogueModel& m, const synthesis::PhqBank& bank, std::span<const std::string> history,
                        PhqState& state, const GateHooks& hooks = {});

}  // namespace madsa::dialogue
