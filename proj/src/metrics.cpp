#include "madsa/metrics.hpp"

#include "madsa/text/vocabulary.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace madsa::metrics {

double qwk(std::span<const int> y, std::span<const int> y_hat, int num_scores) {
  if (num_scores < 2) throw ValidationError("qwk needs at least two possible scores");
  if (y.size() != y_hat.size()) {
    throw ValidationError("qwk: " + std::to_string(y.size()) + " targets vs " + std::to_string(y_hat.size()) +
                          " predictions");
  }
  if (y.empty()) throw ValidationError("qwk: empty input");
  const auto R = static_cast<std::size_t>(num_scores);
  std::vector<double> observed(R * R, 0.0);
  std::vector<double> hist_y(R, 0.0);
  std::vector<double> hist_p(R, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_scores || y_hat[i] < 0 || y_hat[i] >= num_scores) {
      throw ValidationError("qwk: score outside [0, " + std::to_string(num_scores - 1) + "] at index " +
                            std::to_string(i));
    }
    observed[static_cast<std::size_t>(y[i]) * R + static_cast<std::size_t>(y_hat[i])] += 1.0;
    hist_y[static_cast<std::size_t>(y[i])] += 1.0;
    hist_p[static_cast<std::size_t>(y_hat[i])] += 1.0;
  }
  const double n = static_cast<double>(y.size());
  const double denom_w = static_cast<double>((num_scores - 1) * (num_scores - 1));
  double wo = 0.0;
  double we = 0.0;
  for (std::size_t a = 0; a < R; ++a) {
    for (std::size_t b = 0; b < R; ++b) {
      const double d = static_cast<double>(a) - static_cast<double>(b);
      const double w = d * d / denom_w;
      wo += w * observed[a * R + b];
      we += w * hist_y[a] * hist_p[b] / n;
    }
  }
  if (we == 0.0) return 1.0;
  return 1.0 - wo / we;
}

double bleu(std::span<const TokenList> candidates, std::span<const TokenList> references, int max_order) {
  if (candidates.size() != references.size()) throw ValidationError("bleu: candidate and reference counts differ");
  if (candidates.empty()) throw ValidationError("bleu: empty corpus");
  if (max_order < 1) throw ValidationError("bleu: order must be at least 1");

  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  std::vector<double> matches(static_cast<std::size_t>(max_order), 0.0);
  std::vector<double> totals(static_cast<std::size_t>(max_order), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& ref = references[i];
    cand_len += cand.size();
    ref_len += ref.size();
    for (int n = 1; n <= max_order; ++n) {
      std::map<std::vector<std::string>, int> ref_counts;
      for (std::size_t k = 0; k + n <= ref.size(); ++k) ++ref_counts[{ref.begin() + k, ref.begin() + k + n}];
      std::map<std::vector<std::string>, int> cand_counts;
      for (std::size_t k = 0; k + n <= cand.size(); ++k) ++cand_counts[{cand.begin() + k, cand.begin() + k + n}];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  if (cand_len == 0) return 0.0;
  const double c = static_cast<double>(cand_len);
  const double r = static_cast<double>(ref_len);
  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    const double p = matches[n] > 0 ? matches[n] / totals[n] : 1.0 / (2.0 * c);
    log_sum += std::log(p);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_order);
}

bool detect_depression(std::span<const int> scores) {
  if (scores.size() != kAspectCount) {
    throw ValidationError("detect_depression needs 8 item scores, got " + std::to_string(scores.size()));
  }
  int total = 0;
  for (int s : scores) {
    if (s < 0 || s > kMaxItemScore) throw ValidationError("item score out of range: " + std::to_string(s));
    total += s;
  }
  return total >= kDepressionThreshold;
}

EvalTable make_table(const std::array<double, kAspectCount>& per_aspect) {
  EvalTable t;
  t.qwk = per_aspect;
  double sum = 0;
  for (double v : per_aspect) sum += v;
  t.average = sum / static_cast<double>(kAspectCount);
  return t;
}

std::string EvalTable::render() const {
  std::string header;
  std::string values;
  char buf[64];
  for (Aspect a : kAspects) {
    const std::string label(aspect_label(a));
    const int width = static_cast<int>(std::max<std::size_t>(label.size(), 5));
    std::snprintf(buf, sizeof buf, "%*s ", width, label.c_str());
    header += buf;
    std::snprintf(buf, sizeof buf, "%*.3f ", width, qwk[aspect_index(a)]);
    values += buf;
  }
  std::snprintf(buf, sizeof buf, "| %7s", "Average");
  header += buf;
  std::snprintf(buf, sizeof buf, "| %7.3f", average);
  values += buf;
  return header + "\n" + values + "\n";
}

nlohmann::ordered_json EvalTable::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per;
  for (Aspect a : kAspects) per[std::string(aspect_name(a))] = qwk[aspect_index(a)];
  j["qwk"] = std::move(per);
  j["average"] = average;
  return j;
}

EvalTable evaluate_assessment(const std::map<std::string, AspectScores>& predictions, std::span<const Dialogue> gold) {
  std::vector<std::string> missing;
  std::set<std::string> gold_ids;
  for (const auto& d : gold) {
    gold_ids.insert(d.id);
    if (!predictions.count(d.id)) missing.push_back(d.id);
  }
  for (const auto& [id, scores] : predictions) {
    if (!gold_ids.count(id)) missing.push_back(id + " (no gold)");
  }
  if (!missing.empty()) {
    std::string msg = "prediction/gold id mismatch:";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  if (gold.empty()) throw ValidationError("evaluate_assessment: empty gold corpus");
  std::array<double, kAspectCount> per{};
  for (Aspect a : kAspects) {
    const std::size_t k = aspect_index(a);
    std::vector<int> y;
    std::vector<int> p;
    for (const auto& d : gold) {
      y.push_back(d.aspect_scores[k]);
      p.push_back(predictions.at(d.id)[k]);
    }
    per[k] = qwk(y, p, kMaxItemScore + 1);
  }
  return make_table(per);
}

GenerationScores evaluate_generation(const ResponseFn& respond, std::span<const Dialogue> corpus) {
  std::vector<TokenList> cands;
  std::vector<TokenList> refs;
  for (const auto& d : corpus) {
    for (std::size_t i = 0; i + 1 < d.turns.size(); ++i) {
      if (d.turns[i].speaker != Speaker::User || d.turns[i + 1].speaker != Speaker::System) continue;
      std::span<const Turn> history = history_window(d.turns, i + 1);
      cands.push_back(text::tokenize(respond(history)));
      refs.push_back(text::tokenize(d.turns[i + 1].text));
    }
  }
  if (cands.empty()) throw ValidationError("evaluate_generation: no user/system pairs in corpus");
  GenerationScores out;
  out.bleu1 = bleu(cands, refs, 1);
  out.bleu2 = bleu(cands, refs, 2);
  out.pairs = cands.size();
  return out;
}

}  // namespace madsa::metrics
