#include <doctest.h>

#include "madsa/model/seq2seq.hpp"
#include "madsa/text/vocabulary.hpp"

#include <cmath>
#include <sstream>

using namespace madsa;
using namespace madsa::model;

namespace {

std::vector<Example> toy_examples() {
  // ids 7.. are ordinary tokens
  return {{{2, 7, 8, 3}, {9, 10, 3}},
          {{2, 8, 7, 3}, {10, 9, 11, 3}},
          {{2, 11, 3}, {7, 3}},
          {{2, 9, 9, 10, 3}, {8, 8, 3}}};
}

}  // namespace

TEST_CASE("untrained loss is close to ln V") {
  Seq2Seq m("s", {40, 8, 12}, 3);
  const auto data = toy_examples();
  CHECK(m.mean_nll(data) == doctest::Approx(std::log(40.0)).epsilon(0.01));
}

TEST_CASE("full sequence loss gradients") {
  Seq2Seq m("s", {12, 3, 4}, 5);
  // O(1) weights keep every gradient well above finite-difference noise
  Rng rng(11);
  for (auto& e : m.params().entries()) init_uniform(e.tensor, rng, 0.6);
  const auto data = toy_examples();
  for (auto& e : m.params().entries()) {
    INFO(e.name);
    auto r = gradient_check<double>([&](Tape<double>& t) { return m.loss(t, data); }, e.tensor, 1e-5);
    CHECK(r.reliable);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("memorizes a toy set") {
  Seq2Seq m("s", {12, 16, 24}, 7);
  const auto data = toy_examples();
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch = 2;
  cfg.lr = 1e-2;
  auto hist = m.train(data, cfg);
  REQUIRE(hist.size() == 300);
  CHECK(hist.back() < hist.front());
  CHECK(m.mean_nll(data) < 0.05);
  for (const auto& ex : data) {
    auto d = m.greedy(ex.source, 10);
    std::vector<int> expect(ex.target.begin(), ex.target.end() - 1);
    CHECK(d.ids == expect);
    CHECK_FALSE(d.truncated);
    CHECK(m.greedy(ex.source, 10).ids == d.ids);
  }
  auto cut = m.greedy(data[1].source, 1);
  CHECK(cut.ids.size() == 1);
  CHECK(cut.truncated);
  CHECK(m.greedy(data[1].source, 10, std::vector<int>{10}).ids == std::vector<int>{9, 11});

  SUBCASE("checkpoint round trip") {
    std::stringstream a;
    write_checkpoint(a, to_checkpoint(m.params()));
    auto loaded = Seq2Seq::from_checkpoint("s", read_checkpoint(a));
    std::stringstream b;
    write_checkpoint(b, to_checkpoint(loaded.params()));
    CHECK(a.str() == b.str());
    CHECK(loaded.dims().hidden == 24);
    for (const auto& ex : data) {
      CHECK(loaded.next_logits(ex.source, {}) == m.next_logits(ex.source, {}));
      CHECK(loaded.encoder_states(ex.source) == m.encoder_states(ex.source));
    }
  }
}

TEST_CASE("input validation") {
  Seq2Seq m("s", {12, 3, 4}, 5);
  CHECK_THROWS_AS(m.encoder_states(std::vector<int>{}), DimensionError);
  CHECK_THROWS_AS(m.encoder_states(std::vector<int>{2, 99}), std::out_of_range);
  CHECK_THROWS_AS(Seq2Seq("s", {3, 3, 4}, 1), ConfigError);
  CHECK(m.encoder_states(std::vector<int>{2, 7, 3}).rows() == 3);
  CHECK(m.encoder_states(std::vector<int>{2, 7, 3}).cols() == 4);
}
