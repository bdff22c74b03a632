#pragma once

#include "madsa/tensor.hpp"
#include "madsa/tensor/checkpoint.hpp"
#include "madsa/text/vocabulary.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace madsa::model {

using Mat = Matrix<double>;

struct Seq2SeqDims {
  int vocab = 0;
  int embed = 32;
  int hidden = 64;
};

// Source ids are fully wrapped (bos ... eos). Target ids are what the decoder
// must emit, ending with eos; the decoder input is bos followed by the target
// shifted right.
struct Example {
  std::vector<int> source;
  std::vector<int> target;
};

struct TrainConfig {
  int epochs = 10;
  int batch = 16;
  double lr = 1e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
};

struct Decoded {
  std::vector<int> ids;  // excludes the forced prefix and the final eos
  bool truncated = false;
};

// Embedding, one-layer LSTM encoder, LSTM decoder started from the final
// encoder state, dot-product attention over the encoder states, then
// tanh([s; ctx] Wc + bc) Wo + bo. Parameter names start with the prefix.
class Seq2Seq {
 public:
  Seq2Seq(std::string prefix, Seq2SeqDims dims, std::uint64_t seed);

  // Dimensions are read off the tensor shapes under the prefix.
  static Seq2Seq from_checkpoint(std::string prefix, const Checkpoint& ckpt);

  const std::string& prefix() const { return prefix_; }
  const Seq2SeqDims& dims() const { return dims_; }
  ParameterSet<double>& params() { return params_; }
  const ParameterSet<double>& params() const { return params_; }

  // Token logits (target length x vocab) under teacher forcing.
  Var<double> logits(Tape<double>& tape, std::span<const int> source, std::span<const int> target);

  // Mean per-token NLL over one or more examples, recorded on tape.
  Var<double> loss(Tape<double>& tape, std::span<const Example> batch);

  // Per-epoch mean token NLL. Throws NumericError on a non-finite loss or
  // gradient, leaving the parameters of the last good step.
  std::vector<double> train(std::span<const Example> data, const TrainConfig& config,
                            const std::function<void(int epoch, double loss)>& on_epoch = {});

  double mean_nll(std::span<const Example> data);

  // Encoder hidden states, one row per source id. No gradient is recorded.
  Mat encoder_states(std::span<const int> source) const;

  // Logits of the first decoder step after feeding `prefix` (1 x vocab).
  Mat next_logits(std::span<const int> source, std::span<const int> prefix) const;

  // Greedy decode after the forced prefix, stopping at eos or max_len ids.
  Decoded greedy(std::span<const int> source, std::size_t max_len, std::span<const int> prefix = {}) const;

 private:
  struct Weights;
  Weights bind(Tape<double>& tape, bool trainable) const;

  std::string prefix_;
  Seq2SeqDims dims_;
  mutable ParameterSet<double> params_;
};

// A sequence model together with the vocabulary its ids refer to. On disk the
// checkpoint sits at `path` and the vocabulary at vocab_path(path).
struct TextModel {
  text::Vocabulary vocab;
  Seq2Seq net;
};

std::filesystem::path vocab_path(const std::filesystem::path& checkpoint);
void save_text_model(const TextModel& m, const std::filesystem::path& checkpoint);
TextModel load_text_model(const std::filesystem::path& checkpoint, const std::string& prefix);

}  // namespace madsa::model
