// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: madsa_acceptance <data_dir> <fixture_dir> [criterion...]

#include "madsa/assessor/assessor.hpp"
#include "madsa/metrics.hpp"
#include "madsa/model/seq2seq.hpp"
#include "madsa/synthesis/synthesis.hpp"
#include "madsa/text/corpus.hpp"
#include "madsa/text/vocabulary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace madsa;

namespace {

// Every threshold the run checks against.
constexpr double kGradTol = 1e-4;
constexpr double kOpEps = 1e-6;
// Whole-model losses have parameter gradients down to 1e-9; a smaller step
// would be dominated by rounding noise on those entries.
constexpr double kModelEps = 1e-4;
constexpr double kGradSeconds = 120;
constexpr double kOracleTol = 1e-10;
constexpr double kDetectSeconds = 10;
constexpr int kSynthDialogues = 500;
constexpr int kFuzzSessions = 1000;
constexpr double kMemNll = 0.05;
constexpr double kMemBleu1 = 0.95;
constexpr double kMemQwk = 0.9;
constexpr int kMemAssessorEpochs = 20;
constexpr double kMemSeconds = 600;
constexpr double kAblationMargin = -0.02;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string());
  return nlohmann::json::parse(in);
}

struct Context {
  std::filesystem::path data;
  std::filesystem::path fixtures;
  std::filesystem::path scratch;

  const synthesis::PhqBank& bank() {
    if (!bank_) bank_ = synthesis::PhqBank::load(data / "phq8_bank.json");
    return *bank_;
  }

  std::optional<synthesis::PhqBank> bank_;
  // Set by the memorization run and reused by the gate and checkpoint checks.
  std::vector<Dialogue> mem_corpus;
  std::optional<dialogue::DialogueModel> mem_dialogue;
  std::optional<assessor::Assessor> mem_assessor;
};

// ---- gradients -------------------------------------------------------------

using Fn = std::function<Var<double>(Tape<double>&)>;

struct GradTally {
  double worst = 0;
  int checks = 0;
  bool reliable = true;
  std::string worst_name;

  void add(const std::string& name, const Fn& f, Tensor<double>& p) {
    const auto r = gradient_check(f, p, kOpEps);
    add(name, r);
  }
  void add(const std::string& name, const GradientCheckResult<double>& r) {
    ++checks;
    reliable = reliable && r.reliable;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  }
};

Tensor<double> random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Tensor<double> t(std::move(shape));
  init_uniform(t, rng, bound);
  return t;
}

Outcome gradient_suite(Context&) {
  const auto t0 = Clock::now();
  GradTally g;
  Rng rng(2024);
  auto x = random_tensor({4, 3}, rng);
  auto y = random_tensor({4, 3}, rng);
  auto m = random_tensor({3, 5}, rng);
  auto row_bias = random_tensor({3}, rng);
  // Weighted sum so that every output element carries a distinct gradient.
  auto mix = [](Tape<double>& t, Var<double> v) {
    Matrix<double> w(v.rows(), v.cols());
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = std::sin(1.0 + static_cast<double>(i));
    return sum(hadamard(v, t.constant(w)));
  };
  const std::vector<std::pair<std::string, Fn>> ops = {
      {"add", [&](Tape<double>& t) { return mix(t, add(t.param(x), t.param(y))); }},
      {"sub", [&](Tape<double>& t) { return mix(t, sub(t.param(x), t.param(y))); }},
      {"add_row", [&](Tape<double>& t) { return mix(t, add_row(t.param(x), t.param(row_bias))); }},
      {"hadamard", [&](Tape<double>& t) { return mix(t, hadamard(t.param(x), t.param(y))); }},
      {"scale", [&](Tape<double>& t) { return mix(t, scale(t.param(x), -1.7)); }},
      {"sigmoid", [&](Tape<double>& t) { return mix(t, sigmoid(t.param(x))); }},
      {"tanh", [&](Tape<double>& t) { return mix(t, madsa::tanh(t.param(x))); }},
      {"relu", [&](Tape<double>& t) { return mix(t, relu(t.param(x))); }},
      {"softmax_rows", [&](Tape<double>& t) { return mix(t, softmax_rows(t.param(x))); }},
      {"mean", [&](Tape<double>& t) { return mean(hadamard(t.param(x), t.param(x))); }},
      {"mean_rows", [&](Tape<double>& t) { return mix(t, mean_rows(t.param(x))); }},
      {"transpose", [&](Tape<double>& t) { return mix(t, transpose(t.param(x))); }},
      {"slice_cols", [&](Tape<double>& t) { return mix(t, slice_cols(t.param(x), 1, 2)); }},
      {"slice_rows", [&](Tape<double>& t) { return mix(t, slice_rows(t.param(x), 1, 2)); }},
      {"concat_cols", [&](Tape<double>& t) { return mix(t, concat_cols<double>({t.param(x), t.param(y)})); }},
      {"concat_rows", [&](Tape<double>& t) { return mix(t, concat_rows<double>({t.param(x), t.param(y)})); }},
      {"matmul", [&](Tape<double>& t) { return mix(t, matmul(t.param(x), t.param(m))); }},
      {"gather_rows", [&](Tape<double>& t) { return mix(t, gather_rows(t.param(x), std::vector<int>{2, 0, 2, 3})); }},
      {"windows", [&](Tape<double>& t) { return mix(t, windows(t.param(x), 2)); }},
      {"nll_loss", [&](Tape<double>& t) { return nll_loss(t.param(x), std::vector<int>{0, 2, -1, 1}); }},
      {"mse_loss",
       [&](Tape<double>& t) { return mse_loss(t.param(x), Matrix<double>(Matrix<double>::Constant(4, 3, 0.25))); }},
      {"scaled_dot_attention",
       [&](Tape<double>& t) { return mix(t, scaled_dot_attention(t.param(x), t.param(y), t.param(x))); }},
  };
  for (const auto& [name, f] : ops) {
    for (Tensor<double>* p : {&x, &y, &m, &row_bias}) g.add(name, f, *p);
  }

  auto kernel = random_tensor({2, 3, 5}, rng);
  auto cb = random_tensor({5}, rng);
  const Fn conv = [&](Tape<double>& t) { return mix(t, relu(conv1d(t.param(x), t.param(kernel), t.param(cb), 2))); };
  for (Tensor<double>* p : {&x, &kernel, &cb}) g.add("conv1d", conv, *p);

  auto proj = random_tensor({3, 2}, rng);
  auto pb = random_tensor({2}, rng);
  auto q = random_tensor({2, 1}, rng);
  const Fn pool = [&](Tape<double>& t) {
    return mix(t, attention_pool(t.param(x), {t.param(proj), t.param(pb), t.param(q)}).pooled);
  };
  for (Tensor<double>* p : {&x, &proj, &pb, &q}) g.add("attention_pool", pool, *p);

  auto wx = random_tensor({3, 8}, rng, 0.7);
  auto wh = random_tensor({2, 8}, rng, 0.7);
  auto lb = random_tensor({8}, rng, 0.7);
  const Fn chain = [&](Tape<double>& t) {
    LstmWeights<double> w{t.param(wx), t.param(wh), t.param(lb)};
    auto xs = t.param(x);
    LstmState<double> s = lstm_zero_state(t, 2);
    for (Index i = 0; i < 3; ++i) s = lstm_step(row(xs, i), s, w);
    return mix(t, concat_cols<double>({s.h, s.c}));
  };
  for (Tensor<double>* p : {&x, &wx, &wh, &lb}) g.add("lstm_step chain", chain, *p);

  // Dialogue loss: the real model class on a two-dialogue corpus at tiny dims.
  const auto user = [](std::string s, Emotion e) { return Turn{Speaker::User, std::move(s), e, {}, {}}; };
  const auto sys = [](std::string s) { return Turn{Speaker::System, std::move(s), {}, {}, {}}; };
  const std::vector<Dialogue> toy = {
      {"a", {user("i lost my job", Emotion::Negative), sys("that sounds hard"), user("thanks", Emotion::Positive),
             sys("any time")}, {}},
      {"b", {user("we won the game", Emotion::Positive), sys("great news")}, {}}};
  dialogue::DialogueConfig dc;
  dc.dims = {0, 3, 4};
  auto dlg = dialogue::DialogueModel::untrained(toy, dc);
  Rng re(11);
  for (auto& e : dlg.model().net.params().entries()) init_uniform(e.tensor, re, 0.6);
  const auto examples = dialogue::DialogueModel::examples(toy, dlg.vocab());
  for (auto& e : dlg.model().net.params().entries()) {
    g.add("dialogue loss " + e.name,
          gradient_check<double>([&](Tape<double>& t) { return dlg.model().net.loss(t, examples); }, e.tensor, kModelEps));
  }

  // Assessor loss at tiny dims, every parameter.
  const assessor::AssessorDims tiny{3, 2, 4, 2, 3};
  assessor::Assessor ass(tiny, 6);
  Rng ra(12);
  for (auto& e : ass.params().entries()) init_uniform(e.tensor, ra, 0.9);
  auto turns = [&](std::vector<Index> lengths) {
    assessor::DialogueEmbedding d;
    for (Index n : lengths) {
      Matrix<double> t(n, tiny.input);
      for (Index i = 0; i < t.size(); ++i) t.data()[i] = ra.uniform(-1, 1);
      d.push_back(t);
    }
    return d;
  };
  const std::vector<assessor::LabeledEmbedding> batch = {{turns({1, 4, 2}), {0, 1, 2, 3, 3, 2, 1, 0}},
                                                         {turns({3, 3}), {3, 3, 0, 0, 1, 1, 2, 2}}};
  for (auto& e : ass.params().entries()) {
    g.add("assessor loss " + e.name,
          gradient_check<double>([&](Tape<double>& t) { return ass.loss(t, batch); }, e.tensor, kModelEps));
  }

  const double secs = seconds_since(t0);
  return {g.reliable && g.worst < kGradTol && secs < kGradSeconds,
          fmt("%d checks (eps %.0e ops, %.0e models), max rel err %.2e (%s) < %.0e, %s, %.1fs < %.0fs", g.checks, kOpEps, kModelEps, g.worst, g.worst_name.c_str(),
              kGradTol, g.reliable ? "all reliable" : "UNRELIABLE", secs, kGradSeconds)};
}

// ---- metrics ---------------------------------------------------------------

Outcome qwk_oracle(Context& c) {
  const auto fx = load_json(c.fixtures / "qwk_oracle.json");
  double worst = 0;
  std::size_t n = 0;
  for (const auto& k : fx["cases"]) {
    const auto y = k["y"].get<std::vector<int>>();
    const auto p = k["y_hat"].get<std::vector<int>>();
    worst = std::max(worst, std::abs(metrics::qwk(y, p, k["R"].get<int>()) - k["K"].get<double>()));
    ++n;
  }
  return {n == 1000 && worst <= kOracleTol, fmt("%zu instances, max |diff| %.2e <= %.0e", n, worst, kOracleTol)};
}

Outcome bleu_oracle(Context& c) {
  using L = std::vector<metrics::TokenList>;
  const auto fx = load_json(c.fixtures / "bleu_oracle.json");
  double worst = 0;
  std::size_t n = 0;
  for (const auto& k : fx["corpora"]) {
    const auto cands = k["candidates"].get<L>();
    const auto refs = k["references"].get<L>();
    worst = std::max({worst, std::abs(metrics::bleu(cands, refs, 1) - k["bleu1"].get<double>()),
                      std::abs(metrics::bleu(cands, refs, 2) - k["bleu2"].get<double>())});
    ++n;
  }
  return {n == 500 && worst <= kOracleTol, fmt("%zu corpora, max |diff| %.2e <= %.0e", n, worst, kOracleTol)};
}

Outcome detection_rule(Context&) {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  std::size_t monotone_breaks = 0;
  std::size_t flagged = 0;
  for (int code = 0; code < 65536; ++code) {
    std::array<int, kAspectCount> v{};
    int total = 0;
    for (std::size_t i = 0; i < kAspectCount; ++i) {
      v[i] = (code >> (2 * i)) & 3;
      total += v[i];
    }
    const bool d = metrics::detect_depression(v);
    flagged += d;
    if (d != (total >= 10)) ++mismatches;
    for (std::size_t i = 0; i < kAspectCount; ++i) {
      if (v[i] == 3) continue;
      auto up = v;
      ++up[i];
      if (d && !metrics::detect_depression(up)) ++monotone_breaks;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && monotone_breaks == 0 && secs < kDetectSeconds,
          fmt("65536 vectors, %zu flagged, %zu rule mismatches, %zu monotonicity breaks, %.2fs < %.0fs", flagged,
              mismatches, monotone_breaks, secs, kDetectSeconds)};
}

// ---- synthesis -------------------------------------------------------------

std::string serialize(const std::vector<Dialogue>& ds) {
  std::string s;
  for (const auto& d : ds) s += text::to_jsonl_line(d) + "\n";
  return s;
}

Outcome synthesis_invariants(Context& c) {
  synthesis::SynthesisConfig sc;
  sc.n_dialogues = kSynthDialogues;
  sc.seed = 2024;
  const auto urg = synthesis::UserResponseGenerator::untrained(c.bank(), {});
  synthesis::HashedEncoder enc;
  const auto seed = synthesis::generate_seed_corpus(sc);
  const auto a = synthesis::synthesize_corpus(seed, c.bank(), urg, enc, sc);
  const auto b = synthesis::synthesize_corpus(synthesis::generate_seed_corpus(sc), c.bank(), urg, enc, sc);
  const bool identical = serialize(a.dialogues) == serialize(b.dialogues);

  std::size_t injections = 0, not_negative = 0, duplicates = 0, label_mismatch = 0, layout = 0;
  for (std::size_t k = 0; k < a.dialogues.size(); ++k) {
    const auto& d = a.dialogues[k];
    std::set<Aspect> seen;
    std::vector<Turn> stripped;
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const Turn& t = d.turns[i];
      if (!(t.speaker == Speaker::System && t.phq_item)) {
        if (!t.phq_item) stripped.push_back(t);
        continue;
      }
      ++injections;
      const Turn* prev = i > 0 ? &d.turns[i - 1] : nullptr;
      if (!prev || prev->speaker != Speaker::User || prev->emotion != Emotion::Negative || prev->phq_item) {
        ++not_negative;
      }
      if (!seen.insert(*t.phq_item).second) ++duplicates;
      const int label = d.aspect_scores[aspect_index(*t.phq_item)];
      const Turn* ans = i + 1 < d.turns.size() ? &d.turns[i + 1] : nullptr;
      if (t.phq_score != label || !ans || ans->phq_score != label) ++label_mismatch;
      if (!ans || ans->speaker != Speaker::User || ans->phq_item != t.phq_item ||
          t.text != c.bank().item(*t.phq_item).question) {
        ++layout;
      }
    }
    // removing the injected pairs gives back the seed dialogue
    if (stripped != seed[k].turns) ++layout;
  }

  const auto& s = a.stats;
  bool hist_ok = s == synthesis::corpus_stats(a.dialogues) && s.total_injections() == injections &&
                 s.dialogues == static_cast<std::size_t>(kSynthDialogues);
  for (Aspect asp : kAspects) {
    std::size_t row = 0;
    for (auto v : s.score_histogram[aspect_index(asp)]) row += v;
    hist_ok = hist_ok && row == s.dialogues;
  }
  return {identical && injections > 0 && not_negative == 0 && duplicates == 0 && label_mismatch == 0 &&
              layout == 0 && hist_ok,
          fmt("%d dialogues, rerun %s, %zu injections, %zu off negative turns, %zu repeats, %zu label mismatches, "
              "%zu layout errors, histogram %s",
              kSynthDialogues, identical ? "byte-identical" : "DIFFERS", injections, not_negative, duplicates,
              label_mismatch, layout, hist_ok ? "consistent" : "INCONSISTENT")};
}

// ---- memorization ----------------------------------------------------------

Outcome memorization(Context& c) {
  const auto t0 = Clock::now();
  synthesis::SynthesisConfig sc;
  sc.n_dialogues = 20;
  const auto urg = synthesis::UserResponseGenerator::untrained(c.bank(), {});
  synthesis::HashedEncoder enc;
  c.mem_corpus = synthesis::synthesize_corpus(synthesis::generate_seed_corpus(sc), c.bank(), urg, enc, sc).dialogues;

  dialogue::DialogueConfig dc;
  dc.train = {80, 4, 1e-2, 0.0, 1};
  c.mem_dialogue = dialogue::train_dialogue_model(c.mem_corpus, dc);
  const auto& dm = *c.mem_dialogue;
  const double nll = c.mem_dialogue->model().net.mean_nll(dialogue::DialogueModel::examples(c.mem_corpus, dm.vocab()));
  const auto gen = metrics::evaluate_generation(
      [&](std::span<const Turn> h) { return dialogue::generate_response(dm, turn_texts(h)).text; }, c.mem_corpus);

  assessor::AssessorConfig ac;
  ac.epochs = kMemAssessorEpochs;
  ac.batch = 2;
  ac.lr = 2e-3;
  ac.dropout = 0.0;
  c.mem_assessor = assessor::train_assessor(c.mem_corpus, dm, ac);
  std::map<std::string, AspectScores> pred;
  for (const auto& d : c.mem_corpus) pred[d.id] = assessor::assess(*c.mem_assessor, dm, d.turns).scores.scores;
  const auto table = metrics::evaluate_assessment(pred, c.mem_corpus);
  const double min_qwk = *std::min_element(table.qwk.begin(), table.qwk.end());
  const double secs = seconds_since(t0);
  return {nll < kMemNll && gen.bleu1 >= kMemBleu1 && min_qwk >= kMemQwk && secs < kMemSeconds,
          fmt("NLL/token %.4f < %.2f, BLEU-1 %.4f >= %.2f (%zu responses), min aspect QWK %.3f >= %.1f "
              "(avg %.3f, %d epochs), %.0fs < %.0fs",
              nll, kMemNll, gen.bleu1, kMemBleu1, gen.pairs, min_qwk, kMemQwk, table.average, kMemAssessorEpochs,
              secs, kMemSeconds)};
}

// ---- gate ------------------------------------------------------------------

Outcome gate_soundness(Context& c) {
  if (!c.mem_dialogue) memorization(c);
  const auto& m = *c.mem_dialogue;
  // Message words come from the memorized user turns, so both emotions occur.
  std::vector<std::string> words;
  for (const auto& d : c.mem_corpus) {
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::User) continue;
      for (auto& w : text::tokenize(t.text)) words.push_back(w);
    }
  }
  std::size_t positive = 0, negative = 0, induced = 0, bad_positive = 0, mismatch = 0, repeats = 0, wrong_text = 0;
  for (int s = 0; s < kFuzzSessions; ++s) {
    Rng rng(stream_seed(0xace, static_cast<std::uint64_t>(s)));
    dialogue::PhqState state;
    std::set<Aspect> asked;
    std::vector<Turn> turns;
    const int messages = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < messages; ++k) {
      std::string msg;
      const int len = 1 + static_cast<int>(rng.below(10));
      for (int w = 0; w < len; ++w) msg += (w ? " " : "") + words[rng.below(words.size())];
      turns.push_back({Speaker::User, msg, {}, {}, {}});
      const auto history = turn_texts(history_window(turns, turns.size()));
      const auto out = dialogue::induce_response(m, c.bank(), history, state);
      if (out.gate.predicted_emotion == Emotion::Positive) {
        ++positive;
        if (out.gate.induced) ++bad_positive;
        if (out.response.text != dialogue::generate_response(m, history).text) ++mismatch;
      } else {
        ++negative;
      }
      if (out.gate.induced) {
        ++induced;
        const auto item = *out.gate.candidates[out.gate.selected].item;
        if (!asked.insert(item).second) ++repeats;
        if (out.response.text != c.bank().item(item).question) ++wrong_text;
      }
      turns.back().emotion = out.gate.predicted_emotion;
      turns.push_back({Speaker::System, out.response.text, {}, {}, {}});
    }
  }
  const bool exercised = positive > 0 && negative > 0 && induced > 0;
  return {exercised && bad_positive == 0 && mismatch == 0 && repeats == 0 && wrong_text == 0,
          fmt("%d sessions, %zu positive / %zu negative turns, %zu induced; %zu induced on positive, "
              "%zu positive responses differing from generation, %zu repeated items, %zu wrong question texts",
              kFuzzSessions, positive, negative, induced, bad_positive, mismatch, repeats, wrong_text)};
}

// ---- ablation --------------------------------------------------------------

Outcome ablation(Context& c) {
  const auto t0 = Clock::now();
  const auto urg = synthesis::train_urg(c.bank(), {});
  synthesis::HashedEncoder enc;
  synthesis::SynthesisConfig sc;
  sc.n_dialogues = 500;
  sc.seed = 7;
  sc.negative_fraction = 0.8;
  const auto seed = synthesis::generate_seed_corpus(sc);
  const auto inductive = synthesis::synthesize_corpus(seed, c.bank(), urg, enc, sc).dialogues;
  auto plain_cfg = sc;
  plain_cfg.gate_enabled = false;
  const auto plain = synthesis::synthesize_corpus(seed, c.bank(), urg, enc, plain_cfg).dialogues;
  auto dev_cfg = sc;
  dev_cfg.seed = 99;
  const auto dev =
      synthesis::synthesize_corpus(synthesis::generate_seed_corpus(dev_cfg), c.bank(), urg, enc, dev_cfg).dialogues;

  // One frozen encoder for both arms: only the assessor's training data differs.
  dialogue::DialogueConfig dc;
  dc.train = {15, 16, 3e-3, 0.01, 1};
  const auto encoder = dialogue::train_dialogue_model(inductive, dc);

  assessor::AssessorConfig ac;
  ac.dims.filters = 32;
  ac.dims.lstm = 32;
  ac.epochs = 20;
  ac.batch = 8;
  ac.lr = 1e-3;
  ac.dropout = 0.0;
  auto score = [&](const std::vector<Dialogue>& train) {
    const auto model = assessor::train_assessor(train, encoder, ac);
    std::map<std::string, AspectScores> pred;
    for (const auto& d : dev) pred[d.id] = assessor::assess(model, encoder, d.turns).scores.scores;
    return metrics::evaluate_assessment(pred, dev).average;
  };
  const double with_gate = score(inductive);
  const double without = score(plain);
  const double diff = with_gate - without;
  return {diff >= kAblationMargin, fmt("dev average QWK inductive %.3f vs gate disabled %.3f, diff %+.3f >= %.2f "
                                       "(500 train / 500 dev dialogues, %.0fs)",
                                       with_gate, without, diff, kAblationMargin, seconds_since(t0))};
}

// ---- checkpoints -----------------------------------------------------------

Outcome checkpoint_round_trip(Context& c) {
  if (!c.mem_dialogue) memorization(c);
  const auto& dm = *c.mem_dialogue;
  const auto& am = *c.mem_assessor;
  const auto dir = c.scratch;
  std::filesystem::create_directories(dir);
  const auto d1 = dir / "dialogue1.ckpt", d2 = dir / "dialogue2.ckpt";
  const auto a1 = dir / "assessor1.ckpt", a2 = dir / "assessor2.ckpt";
  dm.save(d1);
  const auto dl = dialogue::DialogueModel::load(d1);
  dl.save(d2);
  am.save(a1);
  const auto al = assessor::Assessor::load(a1);
  al.save(a2);
  const auto urg = synthesis::train_urg(c.bank(), {{0, 8, 12}, 2, 16, 3e-3, 0.01, 1});
  const auto u1 = dir / "urg1.ckpt", u2 = dir / "urg2.ckpt";
  urg.save(u1);
  synthesis::UserResponseGenerator::load(u1).save(u2);

  bool bytes = slurp(d1) == slurp(d2) && slurp(d1.string() + ".vocab.json") == slurp(d2.string() + ".vocab.json") &&
               slurp(a1) == slurp(a2) && slurp(u1) == slurp(u2) && !slurp(d1).empty() && !slurp(a1).empty();

  std::size_t outputs = 0, differ = 0;
  for (const auto& d : c.mem_corpus) {
    for (std::size_t i = 1; i < d.turns.size(); ++i) {
      if (d.turns[i - 1].speaker != Speaker::User) continue;
      const auto h = turn_texts(history_window(d.turns, i));
      const auto e1 = dialogue::classify_emotion(dm, h), e2 = dialogue::classify_emotion(dl, h);
      const auto r1 = dialogue::generate_response(dm, h), r2 = dialogue::generate_response(dl, h);
      outputs += 2;
      differ += (e1.emotion != e2.emotion || e1.probability != e2.probability) + (r1.text != r2.text);
    }
    const auto s1 = assessor::assess(am, dm, d.turns).scores, s2 = assessor::assess(al, dl, d.turns).scores;
    outputs += 1;
    differ += s1.raw != s2.raw;
  }
  return {bytes && differ == 0, fmt("dialogue, assessor and URG save->load->save %s; %zu/%zu outputs bit-identical",
                                    bytes ? "byte-identical" : "DIFFER", outputs - differ, outputs)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <data_dir> <fixture_dir> [criterion...]\n", argv[0]);
    return 2;
  }
  Context ctx{argv[1], argv[2], std::filesystem::temp_directory_path() / "madsa_acceptance", {}, {}, {}, {}};
  const std::vector<std::pair<std::string, Outcome (*)(Context&)>> criteria = {
      {"gradient-suite", gradient_suite},
      {"qwk-oracle", qwk_oracle},
      {"bleu-oracle", bleu_oracle},
      {"detection-rule", detection_rule},
      {"synthesis-invariants", synthesis_invariants},
      {"memorization", memorization},
      {"gate-soundness", gate_soundness},
      {"checkpoint-round-trip", checkpoint_round_trip},
      {"ablation-direction", ablation},
  };
  std::set<std::string> only(argv + 3, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
