#include "madsa/synthesis/synthesis.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace madsa;
using namespace madsa::synthesis;

namespace {

const PhqBank& bank() {
  static const PhqBank b = PhqBank::load(std::filesystem::path(MADSA_DATA_DIR) / "phq8_bank.json");
  return b;
}

// Small untrained generator; synthesis structure does not depend on answer quality.
const UserResponseGenerator& toy_urg() {
  static const UserResponseGenerator g = [] {
    UrgConfig c;
    c.dims = {0, 8, 8};
    return UserResponseGenerator::untrained(bank(), c);
  }();
  return g;
}

Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

// One row per turn: [turn length, 1].
struct LengthEncoder : TextEncoder {
  Matrix<double> states(std::span<const std::string> turns) const override {
    Matrix<double> m(static_cast<Index>(turns.size()), 2);
    for (std::size_t i = 0; i < turns.size(); ++i) {
      m(static_cast<Index>(i), 0) = static_cast<double>(turns[i].size());
      m(static_cast<Index>(i), 1) = 1.0;
    }
    return m;
  }
  Index dim() const override { return 2; }
};

Turn user(std::string text, Emotion e) { return {Speaker::User, std::move(text), e, std::nullopt, std::nullopt}; }
Turn sys(std::string text) { return {Speaker::System, std::move(text), std::nullopt, std::nullopt, std::nullopt}; }

}  // namespace

TEST_CASE("phq bank covers every aspect with three answers per score") {
  const auto& b = bank();
  CHECK(b.max_templates() == 3);
  for (Aspect a : kAspects) {
    const auto& it = b.item(a);
    CHECK(it.aspect == a);
    CHECK(it.question.rfind("Over the last two weeks, how often have you been bothered by ", 0) == 0);
    for (const auto& level : it.answers) CHECK(level.size() >= kMinTemplates);
    CHECK(b.question_aspect(it.question) == a);
  }
  CHECK_FALSE(b.question_aspect("how are you?").has_value());
  CHECK(PhqBank::from_json(b.to_json()).to_json() == b.to_json());
}

TEST_CASE("phq bank rejects malformed input") {
  CHECK_THROWS_WITH_AS(PhqBank::load("/nonexistent/bank.json"), doctest::Contains("phq bank not found"), PhqBankError);
  auto j = nlohmann::json::parse(bank().to_json().dump());
  auto short_bank = j;
  short_bank.erase(short_bank.begin());
  CHECK_THROWS_AS(PhqBank::from_json(short_bank), PhqBankError);
  auto thin = j;
  thin[0]["answers"]["2"].erase(thin[0]["answers"]["2"].begin());
  CHECK_THROWS_AS(PhqBank::from_json(thin), PhqBankError);
}

TEST_CASE("select_response picks the most similar candidate") {
  const Vec ctx = vec2(1, 0);
  std::vector<Candidate> c = {{"a", vec2(1, 1), CandidateKind::Generated, std::nullopt},
                              {"b", vec2(0, 1), CandidateKind::Phq, Aspect::Sleep}};
  auto s = select_response(ctx, c);
  CHECK(s.index == 0);
  CHECK(s.similarities[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(s.similarities[1] == doctest::Approx(0.0));

  c[1].vector = vec2(3, 0);
  CHECK(select_response(ctx, c).index == 1);

  SUBCASE("ties go to the lowest index") {
    c[1].vector = vec2(2, 2);
    CHECK(select_response(ctx, c).index == 0);
  }
  SUBCASE("zero vectors score -1") {
    c[0].vector = vec2(0, 0);
    c[1].vector = vec2(-1, 0);
    auto z = select_response(ctx, c);
    CHECK(z.similarities[0] == -1.0);
    CHECK(z.similarities[1] == doctest::Approx(-1.0));
    CHECK(z.index == 0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(select_response(ctx, std::span<const Candidate>()), std::invalid_argument);
    c[1].vector = Vec::Ones(3);
    CHECK_THROWS_AS(select_response(ctx, c), DimensionError);
  }
}

TEST_CASE("embed_context averages the last seven turns") {
  LengthEncoder enc;
  std::vector<std::string> turns;
  for (int i = 1; i <= 9; ++i) turns.push_back(std::string(static_cast<std::size_t>(i), 'x'));
  const Vec v = embed_context(turns, enc);
  // lengths 3..9
  CHECK(v(0) == doctest::Approx(6.0));
  CHECK(v(1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(embed_context({}, enc), std::invalid_argument);

  HashedEncoder h(16, 3);
  const std::vector<std::string> tail(turns.end() - 7, turns.end());
  CHECK((embed_context(turns, h) - embed_context(tail, h)).norm() < 1e-12);
}

TEST_CASE("hashed encoder ignores function words and is deterministic") {
  HashedEncoder h(32, 5);
  CHECK((h.token_vector("sleep") - HashedEncoder(32, 5).token_vector("sleep")).norm() == 0.0);
  CHECK((h.token_vector("sleep") - HashedEncoder(32, 6).token_vector("sleep")).norm() > 0.0);
  const std::string one[1] = {"the and of ,"};
  const auto st = h.states(one);
  CHECK(st.rows() == 1);
  CHECK(st.norm() == 0.0);
  CHECK(cosine(embed_text("trouble sleeping at night", h), embed_text("sleeping trouble", h)) >
        cosine(embed_text("trouble sleeping at night", h), embed_text("poor appetite", h)));
}

TEST_CASE("corpus statistics") {
  CHECK(corpus_stats({}) == SynthesisStats{});
  Dialogue a{"a", {user("hi", Emotion::Positive), sys("hello")}, {}};
  Dialogue b{"b",
             {user("sad", Emotion::Negative),
              {Speaker::System, "q", std::nullopt, Aspect::Sleep, 2},
              {Speaker::User, "ans", Emotion::Negative, Aspect::Sleep, 2},
              sys("ok")},
             {0, 0, 2, 0, 0, 0, 0, 0}};
  const std::vector<Dialogue> corpus = {a, b};
  const auto s = corpus_stats(corpus);
  CHECK(s.dialogues == 2);
  CHECK(s.turns == 6);
  CHECK(s.user_turns == 3);
  CHECK(s.negative_turns == 2);
  CHECK(s.total_injections() == 1);
  CHECK(s.injections[aspect_index(Aspect::Sleep)] == 1);
  CHECK(s.score_histogram[aspect_index(Aspect::Sleep)][2] == 1);
  CHECK(s.score_histogram[aspect_index(Aspect::Sleep)][0] == 1);
  CHECK(s.score_histogram[aspect_index(Aspect::Mood)][0] == 2);
}

TEST_CASE("seed corpus shape") {
  SynthesisConfig c;
  c.n_dialogues = 50;
  const auto corpus = generate_seed_corpus(c);
  REQUIRE(corpus.size() == 50);
  CHECK(corpus[7].id == "dlg-00007");
  for (const auto& d : corpus) {
    CHECK(d.turns.size() >= 4);
    CHECK(d.turns.size() <= 10);
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      CHECK(d.turns[i].speaker == (i % 2 == 0 ? Speaker::User : Speaker::System));
      CHECK(d.turns[i].emotion.has_value() == (i % 2 == 0));
    }
    for (int s : d.aspect_scores) CHECK((s >= 0 && s <= 3));
  }
  CHECK(generate_seed_corpus(c) == corpus);

  // Small seeds must not yield permutations of one another.
  SynthesisConfig other = c;
  other.seed = c.seed ^ 5;
  auto joined = [](const Dialogue& d) {
    std::string s;
    for (const auto& t : d.turns) s += t.text + "\n";
    return s;
  };
  std::set<std::string> texts;
  for (const auto& d : corpus) texts.insert(joined(d));
  for (const auto& d : generate_seed_corpus(other)) CHECK(texts.count(joined(d)) == 0);
}

TEST_CASE("synthesis without negative turns returns the input") {
  SynthesisConfig c;
  c.n_dialogues = 20;
  c.negative_fraction = 0.0;
  const auto seed = generate_seed_corpus(c);
  HashedEncoder enc;
  const auto r = synthesize_corpus(seed, bank(), toy_urg(), enc, c);
  CHECK(r.dialogues == seed);
  CHECK(r.stats.total_injections() == 0);
}

TEST_CASE("disabled gate copies the seed corpus") {
  SynthesisConfig c;
  c.n_dialogues = 20;
  c.gate_enabled = false;
  const auto seed = generate_seed_corpus(c);
  HashedEncoder enc;
  CHECK(synthesize_corpus(seed, bank(), toy_urg(), enc, c).dialogues == seed);
}

TEST_CASE("injections follow the question, answer, original layout") {
  SynthesisConfig c;
  c.n_dialogues = 60;
  c.negative_fraction = 1.0;
  c.include_original = false;
  const auto seed = generate_seed_corpus(c);
  HashedEncoder enc;
  const auto r = synthesize_corpus(seed, bank(), toy_urg(), enc, c);
  REQUIRE(r.dialogues.size() == seed.size());
  CHECK(r.stats == corpus_stats(r.dialogues));
  for (std::size_t k = 0; k < seed.size(); ++k) {
    const auto& in = seed[k];
    const auto& out = r.dialogues[k];
    CHECK(out.id == in.id);
    CHECK(out.aspect_scores == in.aspect_scores);
    // every user turn is negative and followed by a system turn except maybe the last
    std::size_t expected = 0;
    for (std::size_t i = 0; i + 1 < in.turns.size(); ++i) {
      if (in.turns[i].speaker == Speaker::User) ++expected;
    }
    expected = std::min<std::size_t>(expected, kAspectCount);
    std::set<Aspect> asked;
    std::size_t j = 0;
    std::size_t injected = 0;
    for (std::size_t i = 0; i < in.turns.size(); ++i, ++j) {
      REQUIRE(j < out.turns.size());
      CHECK(out.turns[j] == in.turns[i]);
      if (in.turns[i].speaker != Speaker::User || i + 1 >= in.turns.size()) continue;
      if (asked.size() == kAspectCount) continue;
      const Turn& q = out.turns[j + 1];
      const Turn& ans = out.turns[j + 2];
      REQUIRE(q.phq_item.has_value());
      CHECK(q.speaker == Speaker::System);
      CHECK(q.text == bank().item(*q.phq_item).question);
      CHECK(asked.insert(*q.phq_item).second);
      const int score = in.aspect_scores[aspect_index(*q.phq_item)];
      CHECK(q.phq_score == score);
      CHECK(ans.speaker == Speaker::User);
      CHECK(ans.phq_item == q.phq_item);
      CHECK(ans.phq_score == score);
      CHECK(ans.emotion == answer_emotion(score));
      j += 2;
      ++injected;
    }
    CHECK(j == out.turns.size());
    CHECK(injected == expected);
  }
}

TEST_CASE("synthesis is deterministic in the seed") {
  SynthesisConfig c;
  c.n_dialogues = 30;
  const auto seed = generate_seed_corpus(c);
  HashedEncoder enc;
  const auto a = synthesize_corpus(seed, bank(), toy_urg(), enc, c);
  const auto b = synthesize_corpus(seed, bank(), toy_urg(), enc, c);
  CHECK(a.dialogues == b.dialogues);
  CHECK(a.stats == b.stats);
}

TEST_CASE("synthesis config") {
  SynthesisConfig c;
  CHECK_NOTHROW(c.validate());
  auto round = SynthesisConfig::from_json(nlohmann::json::parse(c.to_json().dump()), SynthesisConfig{});
  CHECK(round.to_json() == c.to_json());
  auto j = nlohmann::json::parse(R"({"n_dialogues": 7, "negative_fraction": 0.5})");
  auto d = SynthesisConfig::from_json(j, c);
  CHECK(d.n_dialogues == 7);
  CHECK(d.negative_fraction == 0.5);
  CHECK(d.seed == c.seed);
  c.negative_fraction = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.negative_fraction = 0.5;
  c.score_weights = {0, 0, 0, 0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("answer emotion and score validation") {
  CHECK(answer_emotion(0) == Emotion::Positive);
  CHECK(answer_emotion(1) == Emotion::Positive);
  CHECK(answer_emotion(2) == Emotion::Negative);
  CHECK(answer_emotion(3) == Emotion::Negative);
  CHECK_THROWS_AS(answer_emotion(4), std::invalid_argument);
  CHECK_THROWS_AS(toy_urg().respond_variant(bank().item(Aspect::Sleep), 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(toy_urg().respond_variant(bank().item(Aspect::Sleep), -1, 0), std::invalid_argument);
}

TEST_CASE("user response generator learns and round-trips") {
  UrgConfig c;
  c.dims = {0, 16, 32};
  c.epochs = 60;
  std::vector<double> losses;
  auto g = train_urg(bank(), c, [&](int, double l) { losses.push_back(l); });
  REQUIRE(losses.size() == 60);
  CHECK(losses.back() < 0.5 * losses.front());
  CHECK(g.variants() == 3);
  Rng rng(4);
  const auto r = g.respond(bank().item(Aspect::Appetite), 1, rng);
  CHECK(r.text.size() > 0);

  const auto path = std::filesystem::temp_directory_path() / "madsa_test_urg.ckpt";
  g.save(path);
  const auto back = UserResponseGenerator::load(path);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.respond_variant(bank().item(Aspect::Fatigue), 2, k).text ==
          g.respond_variant(bank().item(Aspect::Fatigue), 2, k).text);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(model::vocab_path(path));
}
