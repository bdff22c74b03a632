#include "madsa/dialogue/dialogue_model.hpp"

#include <cmath>
#include <stdexcept>

namespace madsa::dialogue {

DialogueModel::DialogueModel(model::TextModel m) : model_(std::move(m)) {
  if (model_.vocab.size() != model_.net.dims().vocab) throw ConfigError("dialogue model: vocabulary size mismatch");
}

DialogueModel DialogueModel::untrained(std::span<const Dialogue> corpus, const DialogueConfig& config) {
  auto vocab = text::Vocabulary::build(corpus, config.min_count);
  model::Seq2SeqDims dims = config.dims;
  dims.vocab = vocab.size();
  model::Seq2Seq net(kDialoguePrefix, dims, config.train.seed);
  return DialogueModel(model::TextModel{std::move(vocab), std::move(net)});
}

std::vector<model::Example> DialogueModel::examples(std::span<const Dialogue> corpus, const text::Vocabulary& vocab) {
  std::vector<model::Example> out;
  for (const auto& d : corpus) {
    for (std::size_t i = 1; i < d.turns.size(); ++i) {
      const Turn& user = d.turns[i - 1];
      if (d.turns[i].speaker != Speaker::System || user.speaker != Speaker::User) continue;
      if (!user.emotion) throw std::invalid_argument("dialogue " + d.id + ": user turn without emotion label");
      const auto history = turn_texts(history_window(d.turns, i));
      std::vector<int> target = {*user.emotion == Emotion::Negative ? text::kEmoNeg : text::kEmoPos};
      for (int id : text::token_ids(d.turns[i].text, vocab)) target.push_back(id);
      target.push_back(text::kEos);
      out.push_back({text::encode_history(history, vocab), std::move(target)});
    }
  }
  return out;
}

std::vector<int> DialogueModel::source_ids(std::span<const std::string> history) const {
  if (history.empty()) throw std::invalid_argument("dialogue model: empty history");
  return text::encode_history(history, model_.vocab);
}

Matrix<double> DialogueModel::states(std::span<const std::string> turns) const {
  return model_.net.encoder_states(source_ids(turns));
}

Matrix<double> DialogueModel::turn_states(const std::string& text) const {
  const auto ids = text::token_ids(text, model_.vocab);
  if (ids.empty()) throw std::invalid_argument("dialogue model: turn has no tokens");
  return model_.net.encoder_states(ids);
}

DialogueModel DialogueModel::load(const std::filesystem::path& checkpoint) {
  return DialogueModel(model::load_text_model(checkpoint, kDialoguePrefix));
}

DialogueModel train_dialogue_model(std::span<const Dialogue> corpus, const DialogueConfig& config,
                                   const std::function<void(int, double)>& on_epoch) {
  auto m = DialogueModel::untrained(corpus, config);
  const auto data = DialogueModel::examples(corpus, m.vocab());
  if (data.empty()) throw std::invalid_argument("dialogue corpus has no user/system exchanges");
  m.model().net.train(data, config.train, on_epoch);
  return m;
}

EmotionPrediction emotion_from_logits(double positive_logit, double negative_logit) {
  // p(negative) = sigmoid(neg - pos)
  const double p_neg = 1.0 / (1.0 + std::exp(positive_logit - negative_logit));
  if (negative_logit > positive_logit) return {Emotion::Negative, p_neg};
  return {Emotion::Positive, 1.0 - p_neg};
}

EmotionPrediction classify_emotion(const DialogueModel& m, std::span<const std::string> history) {
  const Matrix<double> logits = m.model().net.next_logits(m.source_ids(history), {});
  return emotion_from_logits(logits(0, text::kEmoPos), logits(0, text::kEmoNeg));
}

namespace {

int emotion_token(Emotion e) { return e == Emotion::Negative ? text::kEmoNeg : text::kEmoPos; }

Response decode_after(const DialogueModel& m, std::span<const std::string> history, Emotion e, std::size_t max_len) {
  const int prefix[1] = {emotion_token(e)};
  const auto d = m.model().net.greedy(m.source_ids(history), max_len, std::span<const int>(prefix, 1));
  return {text::decode(d.ids, m.vocab()), d.truncated};
}

Vec pooled(const DialogueModel& m, const std::string& text) {
  const std::string one[1] = {text};
  return m.states(std::span<const std::string>(one, 1)).colwise().mean().transpose();
}

}  // namespace

Response generate_response(const DialogueModel& m, std::span<const std::string> history, std::size_t max_len) {
  return decode_after(m, history, classify_emotion(m, history).emotion, max_len);
}

Vec embed_candidate(const DialogueModel& m, const std::string& text) {
  if (text::tokenize(text).empty()) throw std::invalid_argument("embed_candidate: empty text");
  return pooled(m, text);
}

std::vector<Aspect> PhqState::unasked() const {
  std::vector<Aspect> out;
  for (Aspect a : kAspects) {
    if (!asked[aspect_index(a)]) out.push_back(a);
  }
  return out;
}

nlohmann::ordered_json GateDecision::to_json() const {
  nlohmann::ordered_json j;
  j["predicted_emotion"] = emotion_name(predicted_emotion);
  j["emotion_probability"] = emotion_probability;
  nlohmann::ordered_json cands = nlohmann::ordered_json::array();
  for (const auto& c : candidates) {
    nlohmann::ordered_json e;
    e["text"] = c.text;
    e["kind"] = synthesis::candidate_kind_name(c.kind);
    e["phq_item"] = c.item ? nlohmann::ordered_json(aspect_name(*c.item)) : nlohmann::ordered_json(nullptr);
    e["similarity"] = c.similarity;
    cands.push_back(std::move(e));
  }
  j["candidates"] = std::move(cands);
  j["selected"] = selected;
  j["induced"] = induced;
  return j;
}

GateDecision GateDecision::from_json(const nlohmann::json& j) {
  GateDecision g;
  g.predicted_emotion = j.at("predicted_emotion").get<std::string>() == "negative" ? Emotion::Negative
                                                                                  : Emotion::Positive;
  g.emotion_probability = j.at("emotion_probability").get<double>();
  for (const auto& e : j.at("candidates")) {
    GateCandidate c;
    c.text = e.at("text").get<std::string>();
    c.kind = e.at("kind").get<std::string>() == "phq" ? CandidateKind::Phq : CandidateKind::Generated;
    if (!e.at("phq_item").is_null()) c.item = parse_aspect(e.at("phq_item").get<std::string>());
    c.similarity = e.at("similarity").get<double>();
    g.candidates.push_back(std::move(c));
  }
  g.selected = j.at("selected").get<std::size_t>();
  g.induced = j.at("induced").get<bool>();
  return g;
}

Induced induce_response(const DialogueModel& m, const synthesis::PhqBank& bank, std::span<const std::string> history,
                        PhqState& state, const GateHooks& hooks) {
  if (history.empty()) throw std::invalid_argument("induce_response: empty history");
  EmotionPrediction emo = classify_emotion(m, history);
  if (hooks.forced_emotion) emo = {*hooks.forced_emotion, 1.0};
  Induced out;
  out.gate.predicted_emotion = emo.emotion;
  out.gate.emotion_probability = emo.probability;
  out.response = decode_after(m, history, emo.emotion, kMaxResponseTokens);

  auto vector_for = [&](const std::string& text) {
    if (hooks.candidate_vector) {
      if (auto v = hooks.candidate_vector(text)) return *v;
    }
    return pooled(m, text);
  };
  const Vec context = synthesis::embed_context(history, m);

  std::vector<synthesis::Candidate> cands;
  cands.push_back({out.response.text, vector_for(out.response.text), CandidateKind::Generated, std::nullopt});
  if (emo.emotion == Emotion::Negative) {
    for (Aspect a : state.unasked()) {
      const auto& q = bank.item(a).question;
      cands.push_back({q, vector_for(q), CandidateKind::Phq, a});
    }
  }
  const auto sel = synthesis::select_response(context, cands);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    out.gate.candidates.push_back({cands[i].text, cands[i].kind, cands[i].item, sel.similarities[i]});
  }
  out.gate.selected = sel.index;
  const auto& win = cands[sel.index];
  if (win.kind == CandidateKind::Phq) {
    out.gate.induced = true;
    state.asked[aspect_index(*win.item)] = true;
    out.response = {win.text, false};
  }
  return out;
}

}  // namespace madsa::dialogue
