#include "madsa/assessor/assessor.hpp"

#include "madsa/metrics.hpp"

#include <cmath>
#include <numeric>

namespace madsa::assessor {

DialogueEmbedding embed_dialogue(const dialogue::DialogueModel& encoder, std::span<const Turn> turns) {
  if (turns.empty()) throw std::invalid_argument("embed_dialogue: empty dialogue");
  DialogueEmbedding out;
  out.reserve(turns.size());
  for (const auto& t : turns) out.push_back(encoder.turn_states(t.text));
  return out;
}

std::vector<LabeledEmbedding> embed_corpus(const dialogue::DialogueModel& encoder, std::span<const Dialogue> corpus) {
  std::vector<LabeledEmbedding> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) {
    try {
      out.push_back({embed_dialogue(encoder, d.turns), d.aspect_scores});
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("dialogue " + d.id + ": " + e.what());
    }
  }
  return out;
}

void AssessorDims::validate() const {
  if (input < 1 || kernel < 1 || filters < 1 || heads < 1 || lstm < 1) {
    throw ConfigError("assessor dimensions must be positive");
  }
  if (filters % heads != 0) throw ConfigError("assessor: filters must be divisible by heads");
}

nlohmann::ordered_json AssessorDims::to_json() const {
  return {{"input", input}, {"kernel", kernel}, {"filters", filters}, {"heads", heads}, {"lstm", lstm}};
}

int round_score(double scaled) {
  const double r = std::floor(scaled + 0.5);
  return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(kMaxItemScore)));
}

ScoreVector ScoreVector::from_raw(const std::array<double, kAspectCount>& raw) {
  ScoreVector s;
  s.raw = raw;
  for (std::size_t k = 0; k < kAspectCount; ++k) {
    s.scaled[k] = kMaxItemScore * raw[k];
    s.scores[k] = round_score(s.scaled[k]);
  }
  return s;
}

std::string Assessor::param_name(std::optional<Aspect> item, const std::string& layer, const std::string& param) {
  return std::string(kAssessorPrefix) + "." + (item ? std::string(aspect_name(*item)) : std::string("turn")) + "." +
         layer + "." + param;
}

namespace {

void add_pool(ParameterSet<double>& p, std::optional<Aspect> item, Index d, Rng& rng) {
  init_glorot(p.add(Assessor::param_name(item, "pool", "proj"), {d, d}), rng, d, d);
  p.add(Assessor::param_name(item, "pool", "bias"), {d}).value().setZero();
  init_glorot(p.add(Assessor::param_name(item, "pool", "query"), {d, 1}), rng, d, 1);
}

}  // namespace

Assessor::Assessor(AssessorDims dims, std::uint64_t seed) : dims_(dims) {
  dims_.validate();
  Rng rng(seed);
  const Index d = dims.input, k = dims.kernel, F = dims.filters, U = dims.lstm;
  const Index hd = F / dims.heads;
  init_glorot(params_.add(param_name(std::nullopt, "conv", "kernel"), {k, d, F}), rng, k * d, F);
  params_.add(param_name(std::nullopt, "conv", "bias"), {F}).value().setZero();
  add_pool(params_, std::nullopt, F, rng);
  for (Aspect a : kAspects) {
    for (int j = 0; j < dims.heads; ++j) {
      for (const char* role : {"query", "key", "value"}) {
        init_glorot(params_.add(param_name(a, "attention", role + std::to_string(j)), {F, hd}), rng, F, hd);
      }
    }
    init_glorot(params_.add(param_name(a, "attention", "output"), {hd * dims.heads, F}), rng, hd * dims.heads, F);
    init_glorot(params_.add(param_name(a, "lstm", "input"), {F, 4 * U}), rng, F, 4 * U);
    init_glorot(params_.add(param_name(a, "lstm", "recurrent"), {U, 4 * U}), rng, U, 4 * U);
    auto& b = params_.add(param_name(a, "lstm", "bias"), {4 * U});
    b.value().setZero();
    b.value().middleCols(U, U).setOnes();
    add_pool(params_, a, U, rng);
    init_glorot(params_.add(param_name(a, "score", "weight"), {U, 1}), rng, U, 1);
    params_.add(param_name(a, "score", "bias"), {1}).value().setZero();
  }
}

Assessor Assessor::from_checkpoint(const Checkpoint& ckpt) {
  const NamedTensor* kernel = ckpt.find(param_name(std::nullopt, "conv", "kernel"));
  const NamedTensor* rec = ckpt.find(param_name(kAspects[0], "lstm", "recurrent"));
  if (!kernel || !rec || kernel->dims.size() != 3 || rec->dims.size() != 2) {
    throw CheckpointError("checkpoint has no assessor");
  }
  AssessorDims dims;
  dims.kernel = static_cast<int>(kernel->dims[0]);
  dims.input = static_cast<int>(kernel->dims[1]);
  dims.filters = static_cast<int>(kernel->dims[2]);
  dims.lstm = static_cast<int>(rec->dims[0]);
  dims.heads = 0;
  while (ckpt.find(param_name(kAspects[0], "attention", "query" + std::to_string(dims.heads)))) ++dims.heads;
  if (dims.heads == 0) throw CheckpointError("assessor checkpoint has no attention heads");
  Assessor m(dims, 0);
  load_parameters(m.params_, ckpt);
  return m;
}

Assessor Assessor::load(const std::filesystem::path& path) { return from_checkpoint(read_checkpoint(path)); }

void Assessor::save(const std::filesystem::path& path) const { write_checkpoint(path, to_checkpoint(params_)); }

Assessor::Bound Assessor::bind(Tape<double>& tape, bool trainable) const {
  auto get = [&](std::optional<Aspect> item, const std::string& layer, const std::string& param) {
    auto& t = params_.at(param_name(item, layer, param));
    return trainable ? tape.param(t) : tape.frozen(t);
  };
  auto pool = [&](std::optional<Aspect> item) {
    return AttentionPoolWeights<double>{get(item, "pool", "proj"), get(item, "pool", "bias"),
                                        get(item, "pool", "query")};
  };
  Bound w;
  w.conv_kernel = get(std::nullopt, "conv", "kernel");
  w.conv_bias = get(std::nullopt, "conv", "bias");
  w.turn_pool = pool(std::nullopt);
  for (Aspect a : kAspects) {
    auto& it = w.items[aspect_index(a)];
    for (int j = 0; j < dims_.heads; ++j) {
      it.query.push_back(get(a, "attention", "query" + std::to_string(j)));
      it.key.push_back(get(a, "attention", "key" + std::to_string(j)));
      it.value.push_back(get(a, "attention", "value" + std::to_string(j)));
    }
    it.output = get(a, "attention", "output");
    it.lstm = {get(a, "lstm", "input"), get(a, "lstm", "recurrent"), get(a, "lstm", "bias")};
    it.pool = pool(a);
    it.score_weight = get(a, "score", "weight");
    it.score_bias = get(a, "score", "bias");
  }
  return w;
}

Var<double> Assessor::turn_vector(const Bound& w, const Mat& tokens) const {
  if (tokens.rows() == 0) throw DimensionError("assessor: empty turn");
  if (tokens.cols() != dims_.input) {
    throw DimensionError("assessor: turn embedding width " + std::to_string(tokens.cols()) + ", expected " +
                         std::to_string(dims_.input));
  }
  Tape<double>& tape = *w.conv_kernel.tape();
  Var<double> x;
  if (tokens.rows() < dims_.kernel) {
    Mat padded = Mat::Zero(dims_.kernel, tokens.cols());
    padded.topRows(tokens.rows()) = tokens;
    x = tape.constant(std::move(padded));
  } else {
    x = tape.constant(tokens);
  }
  Var<double> c = relu(conv1d(x, w.conv_kernel, w.conv_bias, dims_.kernel));
  return attention_pool(c, w.turn_pool).pooled;
}

Var<double> Assessor::item_hidden(const Bound& w, const Var<double>& turns, Aspect item) const {
  if (turns.cols() != dims_.filters) throw DimensionError("assessor: turn matrix width mismatch");
  const auto& it = w.items[aspect_index(item)];
  std::vector<Var<double>> heads;
  heads.reserve(it.query.size());
  for (std::size_t j = 0; j < it.query.size(); ++j) {
    heads.push_back(
        scaled_dot_attention(matmul(turns, it.query[j]), matmul(turns, it.key[j]), matmul(turns, it.value[j])));
  }
  Var<double> m = matmul(heads.size() == 1 ? heads.front() : concat_cols(heads), it.output);
  return lstm_sequence(m, lstm_zero_state(*turns.tape(), dims_.lstm), it.lstm).hidden;
}

Var<double> Assessor::forward(const Bound& w, const DialogueEmbedding& dialogue, Rng* rng, double rate) const {
  if (dialogue.empty()) throw DimensionError("assessor: empty dialogue");
  const bool training = rng != nullptr;
  Rng unused(0);
  Rng& r = rng ? *rng : unused;
  std::vector<Var<double>> rows;
  rows.reserve(dialogue.size());
  for (const auto& t : dialogue) rows.push_back(turn_vector(w, t));
  Var<double> T = dropout(rows.size() == 1 ? rows.front() : concat_rows(rows), rate, training, r);
  std::vector<Var<double>> raw;
  raw.reserve(kAspectCount);
  for (Aspect a : kAspects) {
    const auto& it = w.items[aspect_index(a)];
    Var<double> pooled = dropout(attention_pool(item_hidden(w, T, a), it.pool).pooled, rate, training, r);
    raw.push_back(sigmoid(add(matmul(pooled, it.score_weight), it.score_bias)));
  }
  return concat_cols(raw);
}

Var<double> Assessor::loss(Tape<double>& tape, std::span<const LabeledEmbedding> batch, Rng* rng, double rate) const {
  if (batch.empty()) throw DimensionError("assessor: empty batch");
  const Bound w = bind(tape, true);
  std::vector<Var<double>> preds;
  Mat target(static_cast<Index>(batch.size()), static_cast<Index>(kAspectCount));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    preds.push_back(forward(w, batch[b].turns, rng, rate));
    for (std::size_t k = 0; k < kAspectCount; ++k) {
      target(static_cast<Index>(b), static_cast<Index>(k)) = batch[b].labels[k] / static_cast<double>(kMaxItemScore);
    }
  }
  return mse_loss(preds.size() == 1 ? preds.front() : concat_rows(preds), target);
}

ScoreVector Assessor::predict(const DialogueEmbedding& dialogue) const {
  Tape<double> tape;
  const Bound w = bind(tape, false);
  const Mat raw = forward(w, dialogue).value();
  std::array<double, kAspectCount> r{};
  for (std::size_t k = 0; k < kAspectCount; ++k) r[k] = raw(0, static_cast<Index>(k));
  return ScoreVector::from_raw(r);
}

std::vector<double> Assessor::train(std::span<const LabeledEmbedding> data, const AssessorConfig& config,
                                    const std::function<void(int, double)>& on_epoch) {
  if (data.empty()) throw ConfigError("assessor: no training dialogues");
  if (config.epochs < 1 || config.batch < 1) throw ConfigError("assessor: epochs and batch must be positive");
  for (const auto& d : data) {
    for (int s : d.labels) {
      if (s < 0 || s > kMaxItemScore) throw ConfigError("assessor: label outside 0-3");
    }
  }
  AdamW<double> opt(params_, {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng order_rng(config.seed);
  Rng drop_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  Tape<double> tape;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double weighted = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<LabeledEmbedding> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      tape.clear();
      params_.zero_grad();
      Var<double> l = loss(tape, batch, &drop_rng, config.dropout);
      const double lv = l.value()(0, 0);
      if (!std::isfinite(lv)) throw NumericError("assessor: non-finite loss at epoch " + std::to_string(epoch));
      tape.backward(l);
      opt.step();
      weighted += lv * static_cast<double>(end - start);
    }
    tape.clear();
    history.push_back(weighted / static_cast<double>(data.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  params_.round_to_float();
  return history;
}

AssessmentReport AssessmentReport::from_scores(const ScoreVector& s) {
  AssessmentReport r;
  r.scores = s;
  r.total = std::accumulate(s.scores.begin(), s.scores.end(), 0);
  r.depressed = metrics::detect_depression(s.scores);
  return r;
}

nlohmann::ordered_json AssessmentReport::to_json() const {
  nlohmann::ordered_json j;
  j["raw"] = scores.raw;
  j["scaled"] = scores.scaled;
  j["scores"] = scores.scores;
  j["total"] = total;
  j["depressed"] = depressed;
  return j;
}

AssessmentReport AssessmentReport::from_json(const nlohmann::json& j) {
  AssessmentReport r;
  r.scores.raw = j.at("raw").get<std::array<double, kAspectCount>>();
  r.scores.scaled = j.at("scaled").get<std::array<double, kAspectCount>>();
  r.scores.scores = j.at("scores").get<AspectScores>();
  r.total = j.at("total").get<int>();
  r.depressed = j.at("depressed").get<bool>();
  return r;
}

AssessmentReport assess(const Assessor& model, const dialogue::DialogueModel& encoder, std::span<const Turn> turns) {
  return AssessmentReport::from_scores(model.predict(embed_dialogue(encoder, turns)));
}

Assessor train_assessor(std::span<const Dialogue> corpus, const dialogue::DialogueModel& encoder,
                        const AssessorConfig& config, const std::function<void(int, double)>& on_epoch) {
  AssessorDims dims = config.dims;
  dims.input = encoder.dim();
  Assessor m(dims, config.seed);
  const auto data = embed_corpus(encoder, corpus);
  m.train(data, config, on_epoch);
  return m;
}

}  // namespace madsa::assessor
