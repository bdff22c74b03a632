#pragma once

#include "madsa/model/seq2seq.hpp"
#include "madsa/synthesis/phq_bank.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace madsa::synthesis {

inline constexpr std::size_t kMaxAnswerTokens = 64;
inline constexpr char kUrgPrefix[] = "urg";

struct UrgConfig {
  model::Seq2SeqDims dims{0, 32, 64};  // vocab is filled in from the bank
  int epochs = 200;
  int batch = 16;
  double lr = 3e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
};

struct UserResponse {
  std::string text;
  bool truncated = false;
};

// Encoder-decoder mapping "question <sep> <score_s> <variant_k>" to the k-th
// anticipated answer for score s. The variant token lets one model reproduce
// several distinct answers for the same question and score.
class UserResponseGenerator {
 public:
  explicit UserResponseGenerator(model::TextModel m);

  // Untrained generator with the vocabulary of the bank.
  static UserResponseGenerator untrained(const PhqBank& bank, const UrgConfig& config);

  static std::vector<model::Example> examples(const PhqBank& bank, const text::Vocabulary& vocab);

  // Picks a variant with rng, then decodes greedily.
  UserResponse respond(const PhqItem& item, int score, Rng& rng) const;
  UserResponse respond_variant(const PhqItem& item, int score, std::size_t variant) const;

  std::vector<int> source_ids(const PhqItem& item, int score, std::size_t variant) const;
  std::size_t variants() const { return variants_; }

  model::TextModel& model() { return model_; }
  const model::TextModel& model() const { return model_; }

  void save(const std::filesystem::path& checkpoint) const { model::save_text_model(model_, checkpoint); }
  static UserResponseGenerator load(const std::filesystem::path& checkpoint);

 private:
  model::TextModel model_;
  std::size_t variants_ = 0;
};

// Trains on every (item, score, variant) of the bank with the NLL objective.
UserResponseGenerator train_urg(const PhqBank& bank, const UrgConfig& config,
                                const std::function<void(int, double)>& on_epoch = {});

}  // namespace madsa::synthesis
