#include "madsa/synthesis/synthesis.hpp"

#include "madsa/tensor/rng.hpp"
#include "madsa/text/corpus.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace madsa::synthesis {

namespace {

constexpr std::uint64_t kSynthesisSalt = 0x9e3779b97f4a7c15ULL;

struct Exchange {
  const char* user;
  const char* system;
};

const std::vector<std::string> kActivities = {"hiking",  "cooking", "painting", "reading", "swimming", "running",
                                              "gardening", "chess",  "dancing",  "cycling", "baking",   "fishing"};
const std::vector<std::string> kPeople = {"my sister", "my brother", "my friend", "my boss",
                                          "my neighbor", "my cousin", "my roommate", "my mother"};
const std::vector<std::string> kTimes = {"today", "yesterday", "this morning", "last night", "this week",
                                         "on sunday"};
const std::vector<std::string> kPlaces = {"the beach", "the museum", "the park", "the market", "the lake",
                                          "the city", "the mountains", "the library"};
const std::vector<std::string> kTasks = {"project", "exam", "report", "presentation", "interview", "essay"};

const std::vector<Exchange> kPositive = {
    {"I went {a} with {p} {t}.", "That sounds fun! How was {a}?"},
    {"I just got back from {l} and it was great.", "Wonderful! What did you like most about {l}?"},
    {"{P} made me laugh so much {t}.", "That is lovely. Laughter really helps."},
    {"I finished my {w} early {t}.", "Well done! You must feel relieved."},
    {"I am looking forward to {a} with {p}.", "That is exciting. I hope you enjoy it."},
    {"We had a picnic at {l} {t}.", "A picnic sounds perfect. Was the weather nice?"},
    {"I got good news about my {w} {t}.", "Congratulations! You worked hard for it."},
    {"{P} and I tried {a} for the first time.", "How fun! Would you do {a} again?"},
    {"It was sunny {t}, so I walked to {l}.", "A walk in the sun is great. Did you stay long?"},
    {"I started learning {a} and I love it.", "That is great. What got you into {a}?"},
};

const std::vector<Exchange> kNegative = {
    {"I had an argument with {p} {t}.", "I am sorry to hear that. Do you want to talk about it?"},
    {"My {w} went badly {t}.", "That sounds frustrating. What happened?"},
    {"{P} cancelled our plans at {l} {t}.", "That is disappointing. Were you looking forward to it?"},
    {"Nothing is fun anymore, not even {a}.", "That sounds hard. When did you notice this?"},
    {"I have lost interest in {a} and everything else.", "I am sorry. That must feel empty."},
    {"I have been feeling so down and hopeless {t}.", "I am sorry you feel this way. I am here for you."},
    {"I feel depressed since {p} moved away.", "That is a big change. Losing closeness is painful."},
    {"I had trouble falling asleep {t}.", "That must be exhausting. How long has it been like this?"},
    {"I keep waking up at night and cannot sleep.", "Broken nights are really draining."},
    {"I have no appetite and skipped my meals {t}.", "Skipping meals can make things worse. Please take care."},
    {"I keep overeating when I am stressed about my {w}.", "Stress eating is common. Let us talk about the stress."},
    {"I feel tired and have no energy {t}.", "That sounds draining. Have you been able to rest?"},
    {"I am exhausted after {a}, even small things tire me.", "I hear you. Being worn out is tough."},
    {"I feel like a failure and I let {p} down.", "You are not a failure. That sounds painful though."},
    {"I feel bad about myself after my {w}.", "It is hard when you are so critical of yourself."},
    {"I cannot concentrate on reading {t}.", "Losing focus can be frustrating. What have you tried?"},
    {"I have trouble concentrating on my {w}.", "That makes work much harder. Is something on your mind?"},
    {"I feel so restless and fidgety {t}.", "Restlessness is uncomfortable. What helps you relax?"},
    {"I have been moving and speaking so slowly lately.", "Thank you for telling me. That sounds heavy."},
};

// Slots are drawn once per exchange so that the user turn and its reply
// mention the same activity, person, place or task.
struct Slots {
  std::string a, p, t, l, w;
};

std::string substitute(const char* tmpl, const Slots& s) {
  std::string out;
  for (const char* c = tmpl; *c; ++c) {
    if (*c == '{' && c[1] && c[2] == '}') {
      switch (c[1]) {
        case 'a': out += s.a; break;
        case 'p': out += s.p; break;
        case 'P': out += std::string(1, static_cast<char>(std::toupper(s.p[0]))) + s.p.substr(1); break;
        case 't': out += s.t; break;
        case 'l': out += s.l; break;
        case 'w': out += s.w; break;
        default: throw std::logic_error("unknown template slot");
      }
      c += 2;
    } else {
      out += *c;
    }
  }
  return out;
}

int draw_score(const std::array<double, kMaxItemScore + 1>& weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (int s = 0; s < kMaxItemScore; ++s) {
    if (u < weights[static_cast<std::size_t>(s)]) return s;
    u -= weights[static_cast<std::size_t>(s)];
  }
  return kMaxItemScore;
}

std::string dialogue_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dlg-%05zu", index);
  return buf;
}

}  // namespace

void SynthesisConfig::validate() const {
  if (n_dialogues < 1) throw ConfigError("n_dialogues must be at least 1");
  if (!(negative_fraction >= 0.0 && negative_fraction <= 1.0)) throw ConfigError("negative_fraction must be in [0, 1]");
  double total = 0;
  for (double w : score_weights) {
    if (!(w >= 0.0)) throw ConfigError("score weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("score weights must not all be zero");
}

SynthesisConfig SynthesisConfig::from_json(const nlohmann::json& j, SynthesisConfig base) {
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("n_dialogues")) base.n_dialogues = j["n_dialogues"].get<int>();
  if (j.contains("negative_fraction")) base.negative_fraction = j["negative_fraction"].get<double>();
  if (j.contains("score_weights")) base.score_weights = j["score_weights"].get<std::array<double, 4>>();
  if (j.contains("gate_enabled")) base.gate_enabled = j["gate_enabled"].get<bool>();
  if (j.contains("include_original")) base.include_original = j["include_original"].get<bool>();
  base.validate();
  return base;
}

nlohmann::ordered_json SynthesisConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["n_dialogues"] = n_dialogues;
  j["negative_fraction"] = negative_fraction;
  j["score_weights"] = score_weights;
  j["gate_enabled"] = gate_enabled;
  j["include_original"] = include_original;
  return j;
}

std::vector<Dialogue> generate_seed_corpus(const SynthesisConfig& config) {
  config.validate();
  std::vector<Dialogue> out;
  out.reserve(static_cast<std::size_t>(config.n_dialogues));
  for (std::size_t i = 0; i < static_cast<std::size_t>(config.n_dialogues); ++i) {
    Rng rng(stream_seed(config.seed, i));
    Dialogue d;
    d.id = dialogue_id(i);
    for (auto& s : d.aspect_scores) s = draw_score(config.score_weights, rng);
    const auto exchanges = 2 + rng.below(4);
    for (std::uint64_t e = 0; e < exchanges; ++e) {
      const bool negative = rng.bernoulli(config.negative_fraction);
      const Exchange& ex = negative ? rng.pick(kNegative) : rng.pick(kPositive);
      Slots s{rng.pick(kActivities), rng.pick(kPeople), rng.pick(kTimes), rng.pick(kPlaces), rng.pick(kTasks)};
      d.turns.push_back({Speaker::User, substitute(ex.user, s), negative ? Emotion::Negative : Emotion::Positive,
                         std::nullopt, std::nullopt});
      d.turns.push_back({Speaker::System, substitute(ex.system, s), std::nullopt, std::nullopt, std::nullopt});
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::size_t SynthesisStats::total_injections() const {
  std::size_t n = 0;
  for (auto k : injections) n += k;
  return n;
}

nlohmann::ordered_json SynthesisStats::to_json() const {
  nlohmann::ordered_json j;
  j["dialogues"] = dialogues;
  j["turns"] = turns;
  j["user_turns"] = user_turns;
  j["negative_turns"] = negative_turns;
  j["total_injections"] = total_injections();
  nlohmann::ordered_json inj;
  nlohmann::ordered_json hist;
  for (Aspect a : kAspects) {
    inj[std::string(aspect_name(a))] = injections[aspect_index(a)];
    hist[std::string(aspect_name(a))] = score_histogram[aspect_index(a)];
  }
  j["injections"] = std::move(inj);
  j["score_histogram"] = std::move(hist);
  return j;
}

SynthesisStats corpus_stats(std::span<const Dialogue> dialogues) {
  SynthesisStats st;
  st.dialogues = dialogues.size();
  for (const auto& d : dialogues) {
    st.turns += d.turns.size();
    for (const auto& t : d.turns) {
      if (t.speaker == Speaker::User) {
        ++st.user_turns;
        if (t.emotion == Emotion::Negative) ++st.negative_turns;
      } else if (t.phq_item) {
        ++st.injections[aspect_index(*t.phq_item)];
      }
    }
    for (std::size_t k = 0; k < kAspectCount; ++k) {
      ++st.score_histogram[k][static_cast<std::size_t>(d.aspect_scores[k])];
    }
  }
  return st;
}

Emotion answer_emotion(int score) {
  if (score < 0 || score > kMaxItemScore) throw std::invalid_argument("item score outside 0-3");
  return score >= 2 ? Emotion::Negative : Emotion::Positive;
}

SynthesisResult synthesize_corpus(std::span<const Dialogue> seed_corpus, const PhqBank& bank,
                                  const UserResponseGenerator& urg, const TextEncoder& encoder,
                                  const SynthesisConfig& config) {
  config.validate();
  std::vector<Vec> question_vectors;
  for (const auto& item : bank.items()) question_vectors.push_back(embed_text(item.question, encoder));

  SynthesisResult result;
  result.dialogues.reserve(seed_corpus.size());
  for (std::size_t i = 0; i < seed_corpus.size(); ++i) {
    const Dialogue& src = seed_corpus[i];
    if (!config.gate_enabled) {
      result.dialogues.push_back(src);
      continue;
    }
    try {
      text::validate(src);
      Rng rng(stream_seed(config.seed ^ kSynthesisSalt, i));
      Dialogue out;
      out.id = src.id;
      out.aspect_scores = src.aspect_scores;
      std::array<bool, kAspectCount> asked{};
      for (std::size_t t = 0; t < src.turns.size(); ++t) {
        const Turn& turn = src.turns[t];
        out.turns.push_back(turn);
        const bool gate = turn.speaker == Speaker::User && turn.emotion == Emotion::Negative &&
                          t + 1 < src.turns.size() && src.turns[t + 1].speaker == Speaker::System;
        if (!gate) continue;
        const Turn& original = src.turns[t + 1];
        std::vector<Candidate> cands;
        if (config.include_original) {
          cands.push_back({original.text, embed_text(original.text, encoder), CandidateKind::Generated, std::nullopt});
        }
        for (Aspect a : kAspects) {
          if (asked[aspect_index(a)]) continue;
          cands.push_back({bank.item(a).question, question_vectors[aspect_index(a)], CandidateKind::Phq, a});
        }
        if (cands.empty()) continue;
        const auto history = turn_texts(history_window(out.turns, out.turns.size()));
        const auto sel = select_response(embed_context(history, encoder), cands);
        const Candidate& win = cands[sel.index];
        if (win.kind != CandidateKind::Phq) continue;
        const Aspect a = *win.item;
        const int score = src.aspect_scores[aspect_index(a)];
        asked[aspect_index(a)] = true;
        const auto answer = urg.respond(bank.item(a), score, rng);
        out.turns.push_back({Speaker::System, win.text, std::nullopt, a, score});
        out.turns.push_back({Speaker::User, answer.text, answer_emotion(score), a, score});
      }
      result.dialogues.push_back(std::move(out));
    } catch (const std::exception& e) {
      throw std::runtime_error("synthesis of dialogue " + src.id + " failed: " + e.what());
    }
  }
  result.stats = corpus_stats(result.dialogues);
  return result;
}

}  // namespace madsa::synthesis
