#include "madsa/dialogue/dialogue_model.hpp"

#include <doctest.h>

#include <filesystem>

using namespace madsa;
using namespace madsa::dialogue;

namespace {

const synthesis::PhqBank& bank() {
  static const auto b = synthesis::PhqBank::load(std::filesystem::path(MADSA_DATA_DIR) / "phq8_bank.json");
  return b;
}

Turn user(std::string text, Emotion e) { return {Speaker::User, std::move(text), e, std::nullopt, std::nullopt}; }
Turn sys(std::string text) { return {Speaker::System, std::move(text), std::nullopt, std::nullopt, std::nullopt}; }

std::vector<Dialogue> toy_corpus() {
  return {
      {"d0", {user("i got a new puppy today", Emotion::Positive), sys("that is wonderful news"),
              user("he is very cute", Emotion::Positive), sys("enjoy your time together")}, {}},
      {"d1", {user("i failed my exam again", Emotion::Negative), sys("i am sorry to hear that"),
              user("i feel hopeless", Emotion::Negative), sys("you can talk to me")}, {}},
  };
}

// Memorizes the toy corpus once per process.
const DialogueModel& toy_model() {
  static const DialogueModel m = [] {
    DialogueConfig c;
    c.dims = {0, 12, 24};
    c.train = {150, 4, 1e-2, 0.0, 3};
    return train_dialogue_model(toy_corpus(), c);
  }();
  return m;
}

std::vector<std::string> history_before(const Dialogue& d, std::size_t i) {
  return turn_texts(history_window(d.turns, i));
}

}  // namespace

TEST_CASE("emotion from logits") {
  auto tie = emotion_from_logits(0.3, 0.3);
  CHECK(tie.emotion == Emotion::Positive);
  CHECK(tie.probability == doctest::Approx(0.5));
  auto neg = emotion_from_logits(-20.0, 20.0);
  CHECK(neg.emotion == Emotion::Negative);
  CHECK(neg.probability == doctest::Approx(1.0).epsilon(1e-12));
  auto pos = emotion_from_logits(std::log(3.0), 0.0);
  CHECK(pos.emotion == Emotion::Positive);
  CHECK(pos.probability == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("training examples put the emotion token first") {
  const auto corpus = toy_corpus();
  auto vocab = text::Vocabulary::build(corpus, 1);
  const auto ex = DialogueModel::examples(corpus, vocab);
  REQUIRE(ex.size() == 4);
  CHECK(ex[0].target.front() == text::kEmoPos);
  CHECK(ex[2].target.front() == text::kEmoNeg);
  for (const auto& e : ex) CHECK(e.target.back() == text::kEos);
  CHECK(ex[1].source == text::encode_history(history_before(corpus[0], 3), vocab));

  auto bad = corpus;
  bad[0].turns[0].emotion.reset();
  CHECK_THROWS_AS(DialogueModel::examples(bad, vocab), std::invalid_argument);
}

TEST_CASE("a memorized model reproduces emotions and responses") {
  const auto& m = toy_model();
  for (const auto& d : toy_corpus()) {
    for (std::size_t i = 1; i < d.turns.size(); i += 2) {
      const auto h = history_before(d, i);
      const auto e = classify_emotion(m, h);
      CHECK(e.emotion == *d.turns[i - 1].emotion);
      CHECK(e.probability > 0.9);
      const auto r = generate_response(m, h);
      CHECK_FALSE(r.truncated);
      CHECK(text::tokenize(r.text) == text::tokenize(d.turns[i].text));
    }
  }
}

TEST_CASE("encoder views") {
  const auto& m = toy_model();
  CHECK(m.dim() == 24);
  CHECK(m.turn_states("puppy").rows() == 1);
  CHECK(m.turn_states("he is very cute").rows() == 4);
  CHECK(m.turn_states("he is very cute").cols() == 24);
  CHECK_THROWS_AS(m.turn_states(""), std::invalid_argument);
  CHECK(embed_candidate(m, "you can talk to me").size() == 24);
  CHECK_THROWS_AS(embed_candidate(m, "   "), std::invalid_argument);
}

TEST_CASE("positive emotion yields the generated response") {
  const auto& m = toy_model();
  const auto d = toy_corpus()[0];
  const auto h = history_before(d, 1);
  PhqState state;
  const auto out = induce_response(m, bank(), h, state);
  CHECK(out.gate.predicted_emotion == Emotion::Positive);
  CHECK_FALSE(out.gate.induced);
  REQUIRE(out.gate.candidates.size() == 1);
  CHECK(out.gate.candidates[0].kind == CandidateKind::Generated);
  CHECK(out.response.text == generate_response(m, h).text);
  CHECK(state.unasked().size() == kAspectCount);
}

TEST_CASE("negative emotion with a rigged candidate induces that item") {
  const auto& m = toy_model();
  const auto h = history_before(toy_corpus()[1], 1);
  const Vec ctx = synthesis::embed_context(h, m);
  GateHooks hooks;
  hooks.forced_emotion = Emotion::Negative;
  hooks.candidate_vector = [&](const std::string& t) -> std::optional<Vec> {
    if (t == bank().item(Aspect::Appetite).question) return ctx;
    return -ctx;
  };
  PhqState state;
  const auto out = induce_response(m, bank(), h, state, hooks);
  CHECK(out.gate.induced);
  CHECK(out.response.text == bank().item(Aspect::Appetite).question);
  CHECK(out.gate.candidates.size() == 1 + kAspectCount);
  CHECK(out.gate.candidates[out.gate.selected].item == Aspect::Appetite);
  CHECK(out.gate.candidates[out.gate.selected].similarity == doctest::Approx(1.0));
  CHECK(state.asked[aspect_index(Aspect::Appetite)]);
  CHECK(state.unasked().size() == kAspectCount - 1);

  // Appetite is no longer offered.
  const auto again = induce_response(m, bank(), h, state, hooks);
  CHECK(again.gate.candidates.size() == kAspectCount);
  CHECK_FALSE(again.gate.induced);
}

TEST_CASE("items are never repeated and an exhausted pool falls back to generation") {
  const auto& m = toy_model();
  const auto h = history_before(toy_corpus()[1], 3);
  const Vec ctx = synthesis::embed_context(h, m);
  GateHooks hooks;
  hooks.forced_emotion = Emotion::Negative;
  hooks.candidate_vector = [&](const std::string& t) -> std::optional<Vec> {
    if (bank().question_aspect(t)) return ctx;
    return -ctx;
  };
  PhqState state;
  for (Aspect a : kAspects) {
    const auto out = induce_response(m, bank(), h, state, hooks);
    REQUIRE(out.gate.induced);
    // equal similarities: the first unasked item wins
    CHECK(out.gate.candidates[out.gate.selected].item == a);
  }
  CHECK(state.exhausted());
  const auto out = induce_response(m, bank(), h, state, hooks);
  CHECK(out.gate.predicted_emotion == Emotion::Negative);
  CHECK_FALSE(out.gate.induced);
  CHECK(out.gate.candidates.size() == 1);
  CHECK_FALSE(bank().question_aspect(out.response.text).has_value());
}

TEST_CASE("gate decision json round-trips") {
  const auto& m = toy_model();
  const auto h = history_before(toy_corpus()[1], 1);
  GateHooks hooks;
  hooks.forced_emotion = Emotion::Negative;
  PhqState state;
  const auto out = induce_response(m, bank(), h, state, hooks);
  const auto j = out.gate.to_json();
  CHECK(j["predicted_emotion"] == "negative");
  CHECK(j["candidates"].size() == out.gate.candidates.size());
  const auto back = GateDecision::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.to_json() == j);
  CHECK(back.induced == (out.gate.candidates[out.gate.selected].kind == CandidateKind::Phq));
}

TEST_CASE("dialogue checkpoint round-trip") {
  const auto& m = toy_model();
  const auto path = std::filesystem::temp_directory_path() / "madsa_test_dialogue.ckpt";
  m.save(path);
  const auto back = DialogueModel::load(path);
  const auto h = history_before(toy_corpus()[0], 3);
  CHECK(generate_response(back, h).text == generate_response(m, h).text);
  CHECK((back.states(h) - m.states(h)).norm() == 0.0);
  std::filesystem::remove(path);
  std::filesystem::remove(model::vocab_path(path));
  CHECK_THROWS(DialogueModel::load(path));
}

TEST_CASE("empty history is rejected") {
  PhqState state;
  CHECK_THROWS_AS(classify_emotion(toy_model(), {}), std::invalid_argument);
  CHECK_THROWS_AS(induce_response(toy_model(), bank(), {}, state), std::invalid_argument);
}
