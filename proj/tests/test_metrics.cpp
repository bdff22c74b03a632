#include <doctest.h>

#include "madsa/metrics.hpp"

#include <array>
#include <chrono>
#include <fstream>
#include <json.hpp>

using namespace madsa;
using namespace madsa::metrics;

namespace {

nlohmann::json load_fixture(const std::string& name) {
  std::ifstream in(std::string(MADSA_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

Dialogue labelled(const std::string& id, const AspectScores& scores) {
  Dialogue d;
  d.id = id;
  d.aspect_scores = scores;
  return d;
}

}  // namespace

TEST_CASE("qwk hand cases") {
  CHECK(qwk(std::vector<int>{0, 1, 2, 3}, std::vector<int>{0, 1, 2, 3}, 4) == 1.0);
  CHECK(qwk(std::vector<int>{0, 0, 0}, std::vector<int>{3, 3, 3}, 4) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(qwk(std::vector<int>{0, 1, 2}, std::vector<int>{1, 1, 2}, 4) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(qwk(std::vector<int>{2, 2}, std::vector<int>{2, 2}, 4) == 1.0);

  CHECK_THROWS_AS(qwk(std::vector<int>{0, 1}, std::vector<int>{0}, 4), ValidationError);
  CHECK_THROWS_AS(qwk(std::vector<int>{0, 4}, std::vector<int>{0, 1}, 4), ValidationError);
  CHECK_THROWS_AS(qwk(std::vector<int>{}, std::vector<int>{}, 4), ValidationError);
  CHECK_THROWS_AS(qwk(std::vector<int>{0}, std::vector<int>{0}, 1), ValidationError);
}

TEST_CASE("qwk matches the brute-force oracle") {
  const auto fx = load_fixture("qwk_oracle.json");
  REQUIRE(fx["cases"].size() == 1000);
  double worst = 0;
  for (const auto& c : fx["cases"]) {
    const auto y = c["y"].get<std::vector<int>>();
    const auto p = c["y_hat"].get<std::vector<int>>();
    const int r = c["R"].get<int>();
    const double k = qwk(y, p, r);
    worst = std::max(worst, std::abs(k - c["K"].get<double>()));
    CHECK(k <= 1.0 + 1e-12);
    CHECK(qwk(p, y, r) == doctest::Approx(k).epsilon(1e-12));
    std::vector<int> ry;
    std::vector<int> rp;
    for (int v : y) ry.push_back(r - 1 - v);
    for (int v : p) rp.push_back(r - 1 - v);
    CHECK(qwk(ry, rp, r) == doctest::Approx(k).epsilon(1e-12));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("bleu") {
  using L = std::vector<TokenList>;
  CHECK(bleu(L{{"a", "b"}, {"c"}}, L{{"a", "b"}, {"c"}}, 1) == 1.0);
  CHECK(bleu(L{{"a", "b"}, {"c"}}, L{{"a", "b"}, {"c"}}, 2) == doctest::Approx(1.0).epsilon(1e-15));
  const double zero_overlap = bleu(L{{"x", "y"}}, L{{"a", "b"}}, 1);
  CHECK(zero_overlap <= 1.0 / (2.0 * 2.0));
  CHECK(bleu(L{{"a", "b", "c"}}, L{{"a", "b", "d"}}, 2) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(bleu(L{}, L{}, 1), ValidationError);
  CHECK_THROWS_AS(bleu(L{{"a"}}, L{}, 1), ValidationError);

  const auto fx = load_fixture("bleu_oracle.json");
  REQUIRE(fx["corpora"].size() == 500);
  double worst = 0;
  for (const auto& c : fx["corpora"]) {
    const auto cands = c["candidates"].get<L>();
    const auto refs = c["references"].get<L>();
    const double b1 = bleu(cands, refs, 1);
    const double b2 = bleu(cands, refs, 2);
    CHECK(b1 >= 0.0);
    CHECK(b1 <= 1.0);
    CHECK(b2 >= 0.0);
    CHECK(b2 <= 1.0);
    worst = std::max({worst, std::abs(b1 - c["bleu1"].get<double>()), std::abs(b2 - c["bleu2"].get<double>())});
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("detect_depression") {
  CHECK(detect_depression(std::vector<int>{2, 2, 2, 2, 1, 1, 0, 0}));
  CHECK_FALSE(detect_depression(std::vector<int>{2, 2, 2, 1, 1, 1, 0, 0}));
  CHECK_FALSE(detect_depression(std::vector<int>(8, 0)));
  CHECK_THROWS_AS(detect_depression(std::vector<int>(7, 0)), ValidationError);
  CHECK_THROWS_AS(detect_depression(std::vector<int>{0, 0, 0, 0, 0, 0, 0, 4}), ValidationError);

  const auto start = std::chrono::steady_clock::now();
  int violations = 0;
  std::array<int, 8> v{};
  for (int code = 0; code < 65536; ++code) {
    int sum = 0;
    for (int k = 0, c = code; k < 8; ++k, c /= 4) {
      v[k] = c % 4;
      sum += v[k];
    }
    const bool flag = detect_depression(v);
    if (flag != (sum >= 10)) ++violations;
    for (int k = 0; k < 8; ++k) {
      if (v[k] == 3) continue;
      auto up = v;
      ++up[k];
      if (flag && !detect_depression(up)) ++violations;
    }
  }
  CHECK(violations == 0);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("evaluate_assessment") {
  const auto fx = load_fixture("qwk_oracle.json")["assessment"];
  std::vector<Dialogue> gold;
  std::map<std::string, AspectScores> pred;
  for (const auto& d : fx["dialogues"]) {
    AspectScores g{};
    AspectScores p{};
    for (Aspect a : kAspects) {
      g[aspect_index(a)] = d["gold"][std::string(aspect_name(a))].get<int>();
      p[aspect_index(a)] = d["pred"][std::string(aspect_name(a))].get<int>();
    }
    gold.push_back(labelled(d["id"].get<std::string>(), g));
    pred[d["id"].get<std::string>()] = p;
  }
  const auto table = evaluate_assessment(pred, gold);
  double sum = 0;
  for (Aspect a : kAspects) {
    CHECK(std::abs(table.qwk[aspect_index(a)] - fx["qwk"][std::string(aspect_name(a))].get<double>()) < 1e-10);
    sum += table.qwk[aspect_index(a)];
  }
  CHECK(table.average == doctest::Approx(sum / 8).epsilon(1e-15));

  SUBCASE("perfect predictions") {
    std::map<std::string, AspectScores> exact;
    for (const auto& d : gold) exact[d.id] = d.aspect_scores;
    const auto t = evaluate_assessment(exact, gold);
    for (double k : t.qwk) CHECK(k == 1.0);
    CHECK(t.average == 1.0);
    const auto j = t.to_json();
    CHECK(j["qwk"].size() == 8);
    CHECK(j["average"].get<double>() == 1.0);
    CHECK(t.render().find("Self-esteem") != std::string::npos);

    SUBCASE("one shuffled aspect") {
      auto shuffled = exact;
      int i = 0;
      for (auto& [id, s] : shuffled) s[2] = (s[2] + 1 + (i++ % 3)) % 4;
      const auto ts = evaluate_assessment(shuffled, gold);
      for (std::size_t k = 0; k < 8; ++k) {
        if (k == 2) CHECK(ts.qwk[k] < 1.0);
        else CHECK(ts.qwk[k] == 1.0);
      }
    }
  }
  SUBCASE("id mismatch lists the missing ids") {
    auto partial = pred;
    partial.erase("eval-007");
    try {
      evaluate_assessment(partial, gold);
      FAIL("expected mismatch");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("eval-007") != std::string::npos);
    }
  }
}

TEST_CASE("evaluate_generation") {
  Dialogue d;
  d.id = "g";
  d.turns = {{Speaker::User, "i feel low", Emotion::Negative, {}, {}},
             {Speaker::System, "sorry to hear that .", {}, {}, {}},
             {Speaker::User, "thanks", Emotion::Positive, {}, {}},
             {Speaker::System, "any time", {}, {}, {}}};
  std::vector<Dialogue> corpus = {d};
  auto oracle = [&](std::span<const Turn> h) {
    for (std::size_t i = 0; i + 1 < d.turns.size(); ++i) {
      if (d.turns[i].text == h.back().text) return d.turns[i + 1].text;
    }
    return std::string();
  };
  const auto s = evaluate_generation(oracle, corpus);
  CHECK(s.pairs == 2);
  CHECK(s.bleu1 == 1.0);
  CHECK(s.bleu2 == doctest::Approx(1.0).epsilon(1e-15));
  const auto again = evaluate_generation(oracle, corpus);
  CHECK(again.bleu1 == s.bleu1);
  CHECK(again.bleu2 == s.bleu2);
}
