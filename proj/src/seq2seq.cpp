#include "madsa/model/seq2seq.hpp"

#include "madsa/text/vocabulary.hpp"

#include <cmath>
#include <numeric>

namespace madsa::model {

struct Seq2Seq::Weights {
  Var<double> embedding;
  LstmWeights<double> encoder;
  LstmWeights<double> decoder;
  Var<double> combine_w;
  Var<double> combine_b;
  Var<double> output_w;
  Var<double> output_b;
};

namespace {

void add_lstm(ParameterSet<double>& p, const std::string& name, Index in, Index units, Rng& rng) {
  init_glorot(p.add(name + ".input", {in, 4 * units}), rng, in, 4 * units);
  init_glorot(p.add(name + ".recurrent", {units, 4 * units}), rng, units, 4 * units);
  auto& b = p.add(name + ".bias", {4 * units});
  b.value().setZero();
  // forget gate starts open
  b.value().middleCols(units, units).setOnes();
}

LstmWeights<double> bind_lstm(Tape<double>& tape, ParameterSet<double>& p, const std::string& name, bool trainable) {
  auto get = [&](const char* leaf) {
    auto& t = p.at(name + leaf);
    return trainable ? tape.param(t) : tape.frozen(t);
  };
  return {get(".input"), get(".recurrent"), get(".bias")};
}

Var<double> project(const Var<double>& states, const Var<double>& memory, const Var<double>& cw,
                    const Var<double>& cb, const Var<double>& ow, const Var<double>& ob) {
  Var<double> ctx = scaled_dot_attention(states, memory, memory);
  Var<double> combined = tanh(add_row(matmul(concat_cols<double>({states, ctx}), cw), cb));
  return add_row(matmul(combined, ow), ob);
}

void check_ids(std::span<const int> ids, int vocab, const char* what) {
  if (ids.empty()) throw DimensionError(std::string("seq2seq: empty ") + what);
  for (int id : ids) {
    if (id < 0 || id >= vocab) throw std::out_of_range(std::string("seq2seq: token id out of range in ") + what);
  }
}

}  // namespace

Seq2Seq::Seq2Seq(std::string prefix, Seq2SeqDims dims, std::uint64_t seed) : prefix_(std::move(prefix)), dims_(dims) {
  if (dims.vocab < text::kReservedCount || dims.embed < 1 || dims.hidden < 1) {
    throw ConfigError("seq2seq: invalid dimensions");
  }
  Rng rng(seed);
  const Index V = dims.vocab, E = dims.embed, H = dims.hidden;
  init_uniform(params_.add(prefix_ + ".embedding", {V, E}), rng, 0.1);
  add_lstm(params_, prefix_ + ".encoder", E, H, rng);
  add_lstm(params_, prefix_ + ".decoder", E, H, rng);
  init_glorot(params_.add(prefix_ + ".combine.weight", {2 * H, H}), rng, 2 * H, H);
  params_.add(prefix_ + ".combine.bias", {H}).value().setZero();
  // small output weights keep the untrained distribution close to uniform
  init_uniform(params_.add(prefix_ + ".output.weight", {H, V}), rng, 0.01);
  params_.add(prefix_ + ".output.bias", {V}).value().setZero();
}

Seq2Seq Seq2Seq::from_checkpoint(std::string prefix, const Checkpoint& ckpt) {
  const NamedTensor* emb = ckpt.find(prefix + ".embedding");
  const NamedTensor* rec = ckpt.find(prefix + ".encoder.recurrent");
  if (!emb || !rec || emb->dims.size() != 2 || rec->dims.size() != 2) {
    throw CheckpointError("checkpoint has no '" + prefix + "' sequence model");
  }
  Seq2SeqDims dims{static_cast<int>(emb->dims[0]), static_cast<int>(emb->dims[1]), static_cast<int>(rec->dims[0])};
  Seq2Seq model(std::move(prefix), dims, 0);
  load_parameters(model.params_, ckpt);
  return model;
}

Seq2Seq::Weights Seq2Seq::bind(Tape<double>& tape, bool trainable) const {
  auto get = [&](const std::string& leaf) {
    auto& t = params_.at(prefix_ + leaf);
    return trainable ? tape.param(t) : tape.frozen(t);
  };
  Weights w;
  w.embedding = get(".embedding");
  w.encoder = bind_lstm(tape, params_, prefix_ + ".encoder", trainable);
  w.decoder = bind_lstm(tape, params_, prefix_ + ".decoder", trainable);
  w.combine_w = get(".combine.weight");
  w.combine_b = get(".combine.bias");
  w.output_w = get(".output.weight");
  w.output_b = get(".output.bias");
  return w;
}

Var<double> Seq2Seq::logits(Tape<double>& tape, std::span<const int> source, std::span<const int> target) {
  check_ids(source, dims_.vocab, "source");
  check_ids(target, dims_.vocab, "target");
  const Weights w = bind(tape, true);
  auto enc = lstm_sequence(gather_rows(w.embedding, source), lstm_zero_state(tape, dims_.hidden), w.encoder);
  std::vector<int> dec_in;
  dec_in.reserve(target.size());
  dec_in.push_back(text::kBos);
  dec_in.insert(dec_in.end(), target.begin(), target.end() - 1);
  auto dec = lstm_sequence(gather_rows(w.embedding, std::span<const int>(dec_in)), enc.last, w.decoder);
  return project(dec.hidden, enc.hidden, w.combine_w, w.combine_b, w.output_w, w.output_b);
}

Var<double> Seq2Seq::loss(Tape<double>& tape, std::span<const Example> batch) {
  if (batch.empty()) throw DimensionError("seq2seq: empty batch");
  std::vector<Var<double>> parts;
  std::vector<int> targets;
  for (const auto& ex : batch) {
    parts.push_back(logits(tape, ex.source, ex.target));
    targets.insert(targets.end(), ex.target.begin(), ex.target.end());
  }
  return nll_loss(parts.size() == 1 ? parts.front() : concat_rows(parts), std::span<const int>(targets));
}

std::vector<double> Seq2Seq::train(std::span<const Example> data, const TrainConfig& config,
                                   const std::function<void(int, double)>& on_epoch) {
  if (data.empty()) throw ConfigError("seq2seq: no training examples");
  if (config.epochs < 1 || config.batch < 1) throw ConfigError("seq2seq: epochs and batch must be positive");
  AdamW<double> opt(params_, {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  Tape<double> tape;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double weighted = 0;
    double tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<Example> batch;
      double n = 0;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(data[order[k]]);
        n += static_cast<double>(data[order[k]].target.size());
      }
      tape.clear();
      params_.zero_grad();
      Var<double> l = loss(tape, batch);
      const double lv = l.value()(0, 0);
      if (!std::isfinite(lv)) {
        throw NumericError(prefix_ + ": non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(l);
      opt.step();
      weighted += lv * n;
      tokens += n;
    }
    tape.clear();
    history.push_back(weighted / tokens);
    if (on_epoch) on_epoch(epoch, history.back());
  }
  params_.round_to_float();
  return history;
}

double Seq2Seq::mean_nll(std::span<const Example> data) {
  if (data.empty()) throw ConfigError("seq2seq: no examples");
  double weighted = 0;
  double tokens = 0;
  for (const auto& ex : data) {
    Tape<double> tape;
    Var<double> l = loss(tape, std::span<const Example>(&ex, 1));
    weighted += l.value()(0, 0) * static_cast<double>(ex.target.size());
    tokens += static_cast<double>(ex.target.size());
  }
  return weighted / tokens;
}

Mat Seq2Seq::encoder_states(std::span<const int> source) const {
  check_ids(source, dims_.vocab, "source");
  Tape<double> tape;
  const Weights w = bind(tape, false);
  return lstm_sequence(gather_rows(w.embedding, source), lstm_zero_state(tape, dims_.hidden), w.encoder).hidden.value();
}

namespace {

// Runs the decoder one token at a time. Forced tokens are fed first; then
// greedy choices until eos or the budget is spent.
struct Stepper {
  Tape<double>& tape;
  const Var<double>& embedding;
  const LstmWeights<double>& decoder;
  std::function<Var<double>(const Var<double>&)> head;
  LstmState<double> state;

  Mat feed(int token) {
    const int ids[1] = {token};
    state = lstm_step(gather_rows(embedding, std::span<const int>(ids, 1)), state, decoder);
    return head(state.h).value();
  }
};

int argmax(const Mat& row) {
  Index best = 0;
  row.row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

Mat Seq2Seq::next_logits(std::span<const int> source, std::span<const int> prefix) const {
  check_ids(source, dims_.vocab, "source");
  Tape<double> tape;
  const Weights w = bind(tape, false);
  auto enc = lstm_sequence(gather_rows(w.embedding, source), lstm_zero_state(tape, dims_.hidden), w.encoder);
  Stepper s{tape, w.embedding, w.decoder,
            [&](const Var<double>& h) { return project(h, enc.hidden, w.combine_w, w.combine_b, w.output_w, w.output_b); },
            enc.last};
  Mat out = s.feed(text::kBos);
  for (int t : prefix) out = s.feed(t);
  return out;
}

Decoded Seq2Seq::greedy(std::span<const int> source, std::size_t max_len, std::span<const int> prefix) const {
  check_ids(source, dims_.vocab, "source");
  Tape<double> tape;
  const Weights w = bind(tape, false);
  auto enc = lstm_sequence(gather_rows(w.embedding, source), lstm_zero_state(tape, dims_.hidden), w.encoder);
  Stepper s{tape, w.embedding, w.decoder,
            [&](const Var<double>& h) { return project(h, enc.hidden, w.combine_w, w.combine_b, w.output_w, w.output_b); },
            enc.last};
  Mat logits = s.feed(text::kBos);
  for (int t : prefix) logits = s.feed(t);
  Decoded out;
  while (true) {
    const int next = argmax(logits);
    if (next == text::kEos) return out;
    if (out.ids.size() >= max_len) {
      out.truncated = true;
      return out;
    }
    out.ids.push_back(next);
    logits = s.feed(next);
  }
}

std::filesystem::path vocab_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".vocab.json");
}

void save_text_model(const TextModel& m, const std::filesystem::path& checkpoint) {
  if (m.vocab.size() != m.net.dims().vocab) throw ConfigError("vocabulary size does not match the model");
  write_checkpoint(checkpoint, to_checkpoint(m.net.params()));
  m.vocab.save(vocab_path(checkpoint));
}

TextModel load_text_model(const std::filesystem::path& checkpoint, const std::string& prefix) {
  auto net = Seq2Seq::from_checkpoint(prefix, read_checkpoint(checkpoint));
  auto vocab = text::Vocabulary::load(vocab_path(checkpoint));
  if (vocab.size() != net.dims().vocab) {
    throw CheckpointError("vocabulary " + vocab_path(checkpoint).string() + " has " + std::to_string(vocab.size()) +
                          " entries, model expects " + std::to_string(net.dims().vocab));
  }
  return {std::move(vocab), std::move(net)};
}

}  // namespace madsa::model
