#pragma once

#include "madsa/text/dialogue.hpp"

#include <array>
#include <functional>
#include <json.hpp>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace madsa::metrics {

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Quadratic weighted kappa between targets y and predictions y_hat, both in
// [0, R-1]. The expected matrix is the outer product of the two histograms
// scaled to the same total as the observed matrix. When both sequences are
// the same constant the weighted expectation vanishes and K is defined as 1.
double qwk(std::span<const int> y, std::span<const int> y_hat, int num_scores);

using TokenList = std::vector<std::string>;

// Corpus BLEU over n-gram orders 1..max_order with one reference per
// candidate: clipped n-gram precisions combined by geometric mean, times the
// brevity penalty. An order with no matches uses 1 / (2 * candidate tokens)
// as its precision.
double bleu(std::span<const TokenList> candidates, std::span<const TokenList> references, int max_order);

inline constexpr int kDepressionThreshold = 10;

// PHQ-8 rule: a total of ten or more indicates depression.
bool detect_depression(std::span<const int> scores);

struct EvalTable {
  std::array<double, kAspectCount> qwk{};
  double average = 0;

  std::string render() const;
  nlohmann::ordered_json to_json() const;
};

EvalTable make_table(const std::array<double, kAspectCount>& per_aspect);

// Per-aspect QWK (R = 4) of predictions keyed by dialogue id against the gold
// corpus. Every gold id needs a prediction and vice versa.
EvalTable evaluate_assessment(const std::map<std::string, AspectScores>& predictions, std::span<const Dialogue> gold);

struct GenerationScores {
  double bleu1 = 0;
  double bleu2 = 0;
  std::size_t pairs = 0;
};

// Response generator: history ending at a user turn -> system response.
using ResponseFn = std::function<std::string(std::span<const Turn> history)>;

// Scores the generator's response at every user turn that is followed by a
// system turn against that system turn.
GenerationScores evaluate_generation(const ResponseFn& respond, std::span<const Dialogue> corpus);

}  // namespace madsa::metrics
