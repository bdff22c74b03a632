#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace madsa {

// The eight PHQ-8 aspects, in questionnaire order.
enum class Aspect : int { Interest, Mood, Sleep, Appetite, Fatigue, SelfEsteem, Concentration, Moving };

inline constexpr std::size_t kAspectCount = 8;
inline constexpr std::array<Aspect, kAspectCount> kAspects = {
    Aspect::Interest, Aspect::Mood,       Aspect::Sleep,         Aspect::Appetite,
    Aspect::Fatigue,  Aspect::SelfEsteem, Aspect::Concentration, Aspect::Moving};

inline constexpr int kMaxItemScore = 3;

// Turns considered from the history by every model.
inline constexpr std::size_t kHistoryWindow = 7;

std::string_view aspect_name(Aspect a);
std::string_view aspect_label(Aspect a);  // display form, e.g. "Self-esteem"
std::optional<Aspect> parse_aspect(std::string_view name);
inline std::size_t aspect_index(Aspect a) { return static_cast<std::size_t>(a); }

enum class Speaker { User, System };
enum class Emotion { Positive, Negative };

std::string_view speaker_name(Speaker s);
std::string_view emotion_name(Emotion e);

struct Turn {
  Speaker speaker = Speaker::User;
  std::string text;
  std::optional<Emotion> emotion;  // set on every user turn
  std::optional<Aspect> phq_item;
  std::optional<int> phq_score;  // set iff phq_item is

  bool operator==(const Turn&) const = default;
};

using AspectScores = std::array<int, kAspectCount>;

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  AspectScores aspect_scores{};

  bool operator==(const Dialogue&) const = default;
};

// Last kHistoryWindow turns of the first `end` turns.
inline std::span<const Turn> history_window(std::span<const Turn> turns, std::size_t end) {
  const std::size_t begin = end > kHistoryWindow ? end - kHistoryWindow : 0;
  return turns.subspan(begin, end - begin);
}

inline std::vector<std::string> turn_texts(std::span<const Turn> turns) {
  std::vector<std::string> out;
  out.reserve(turns.size());
  for (const auto& t : turns) out.push_back(t.text);
  return out;
}

}  // namespace madsa
