#pragma once

#include "madsa/dialogue/dialogue_model.hpp"
#include "madsa/tensor.hpp"
#include "madsa/tensor/checkpoint.hpp"
#include "madsa/text/dialogue.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace madsa::assessor {

using Mat = Matrix<double>;

inline constexpr char kAssessorPrefix[] = "assessor";

// Frozen encoder states of one dialogue: one matrix per turn, one row per token.
using DialogueEmbedding = std::vector<Mat>;

DialogueEmbedding embed_dialogue(const dialogue::DialogueModel& encoder, std::span<const Turn> turns);

struct LabeledEmbedding {
  DialogueEmbedding turns;
  AspectScores labels{};
};

std::vector<LabeledEmbedding> embed_corpus(const dialogue::DialogueModel& encoder, std::span<const Dialogue> corpus);

struct AssessorDims {
  int input = 64;  // encoder hidden size
  int kernel = 5;
  int filters = 100;
  int heads = 2;  // filters must divide evenly
  int lstm = 100;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  bool operator==(const AssessorDims&) const = default;
};

struct AssessorConfig {
  AssessorDims dims;
  int epochs = 20;
  int batch = 4;
  double lr = 2e-3;
  double weight_decay = 0.01;
  double dropout = 0.3;
  std::uint64_t seed = 1;
};

// raw in (0, 1), scaled = 3 raw, scores = scaled rounded half up.
struct ScoreVector {
  std::array<double, kAspectCount> raw{};
  std::array<double, kAspectCount> scaled{};
  AspectScores scores{};

  static ScoreVector from_raw(const std::array<double, kAspectCount>& raw);
};

// Half-up rounding of a scaled score, clamped to 0..3.
int round_score(double scaled);

// Hierarchical scorer. Shared turn encoder: zero-pad to the kernel width,
// valid conv1d + ReLU, attention pooling. Then for each of the eight items
// its own multi-head self-attention over the turn vectors, LSTM, attention
// pooling and a sigmoid head.
class Assessor {
 public:
  Assessor(AssessorDims dims, std::uint64_t seed);

  static Assessor from_checkpoint(const Checkpoint& ckpt);
  static Assessor load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const AssessorDims& dims() const { return dims_; }
  ParameterSet<double>& params() { return params_; }
  const ParameterSet<double>& params() const { return params_; }

  // Parameters bound to one tape, trainable or frozen.
  struct Bound;
  Bound bind(Tape<double>& tape, bool trainable) const;

  // 1 x filters turn vector from a turn's token states.
  Var<double> turn_vector(const Bound& w, const Mat& tokens) const;
  // n x lstm hidden sequence of one item over the n x filters turn matrix.
  Var<double> item_hidden(const Bound& w, const Var<double>& turns, Aspect item) const;
  // 1 x 8 raw scores. Dropout at `rate` is applied only when rng is given.
  Var<double> forward(const Bound& w, const DialogueEmbedding& dialogue, Rng* rng = nullptr, double rate = 0.0) const;

  // MSE between raw scores and labels / 3 over a batch, all parameters trainable.
  Var<double> loss(Tape<double>& tape, std::span<const LabeledEmbedding> batch, Rng* rng = nullptr,
                   double rate = 0.0) const;

  ScoreVector predict(const DialogueEmbedding& dialogue) const;

  // Per-epoch mean training loss. Throws NumericError on a non-finite loss.
  std::vector<double> train(std::span<const LabeledEmbedding> data, const AssessorConfig& config,
                            const std::function<void(int, double)>& on_epoch = {});

  static std::string param_name(std::optional<Aspect> item, const std::string& layer, const std::string& param);

 private:
  AssessorDims dims_;
  mutable ParameterSet<double> params_;
};

struct Assessor::Bound {
  Var<double> conv_kernel;
  Var<double> conv_bias;
  AttentionPoolWeights<double> turn_pool;
  struct Item {
    std::vector<Var<double>> query, key, value;
    Var<double> output;
    LstmWeights<double> lstm;
    AttentionPoolWeights<double> pool;
    Var<double> score_weight;
    Var<double> score_bias;
  };
  std::array<Item, kAspectCount> items;
};

struct AssessmentReport {
  ScoreVector scores;
  int total = 0;
  bool depressed = false;

  static AssessmentReport from_scores(const ScoreVector& s);
  nlohmann::ordered_json to_json() const;
  static AssessmentReport from_json(const nlohmann::json& j);
};

AssessmentReport assess(const Assessor& model, const dialogue::DialogueModel& encoder, std::span<const Turn> turns);

// Trains a fresh assessor; embeddings are computed once since the encoder is frozen.
Assessor train_assessor(std::span<const Dialogue> corpus, const dialogue::DialogueModel& encoder,
                        const AssessorConfig& config, const std::function<void(int, double)>& on_epoch = {});

}  // namespace madsa::assessor
